//! Data for multi-task human analysis: a procedural articulated-figure
//! generator, reader and writer for the per-frame file layout, geometric and
//! photometric augmentation, manifests with subject-disjoint splits, and
//! modal consistency validation.

mod augment;
mod error;
mod manifest;
mod pipeline;
mod source;
mod surreal;
mod synthetic;
mod validate;
pub mod warp;

pub use augment::{augment, augment_with, AugmentParams, AugmentTransform};
pub use error::{Error, Result};
pub use manifest::{make_splits, DatasetManifest, ManifestRecord, SourceKind, Split};
pub use pipeline::{augment_seed, epoch_order};
pub use source::SampleSource;
pub use surreal::{
    crop_warp, frame_stem, load_record, load_surreal_format, read_frame, write_frame, JointsFile, LoadOptions,
};
pub use synthetic::{
    generate_figure, generate_range, generate_synthetic, Anchor, BackgroundMode, LimbRecord, SyntheticFigure,
    SyntheticFigureParams,
};
pub use validate::{validate_all, validate_sample, ValidationOptions, ValidationReport, Violation};
