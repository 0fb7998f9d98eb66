//! Core building blocks for jointly learning 2D pose, 3D pose, body-part
//! segmentation and full-body depth with cross-connected hourglass streams.
//!
//! This crate has no notion of a network. It owns the label vocabularies,
//! the encoders that turn ground truth into supervision tensors (and the
//! decoders that invert them), the per-task losses, and every evaluation
//! metric used to compare task combinations.
//!
//! Tensor layout convention: per-sample tensors are channel-first
//! `[channels, rows, cols]`. Shapes are reported as `rows × cols × channels`
//! through [`TensorShape`].

pub mod codecs;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod targets;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    output_shape, parse_task_set, CameraIntrinsics, Joint, Part, Sample, TaskKind, TaskSet,
    TensorShape, NUM_JOINTS, NUM_PARTS,
};
