//! Multi-stream stacked hourglass network.
//!
//! A shared stem feeds one hourglass stream per task. Between consecutive
//! stacks the streams exchange features through a fusion block, and every
//! stack emits a supervised prediction. Tensors are batched channel-first
//! `[N, C, H, W]`; the element type is generic so gradient checks can run
//! in `f64` while training uses `f32`.

pub mod checkpoint;
pub mod config;
pub mod error;
pub mod graph;
pub mod layers;
pub mod loss;
pub mod model;
pub mod params;
pub mod reference;
pub mod scalar;

pub use checkpoint::Archive;
pub use config::{HeadPrior, HourglassConfig, BACKGROUND_PRIOR};
pub use error::{Error, Result};
pub use graph::{Gradients, Graph, NodeId};
pub use loss::{task_loss, total_loss, BatchTargets, LossOptions};
pub use model::{stack_prefix, ForwardOutput, MultiTaskModel};
pub use params::{derive_seed, Init, ParamId, ParamStore};
pub use reference::PlainStackedHourglass;
pub use scalar::Scalar;
