use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown task token {0:?}")]
    UnknownTask(String),
    #[error("task set is empty")]
    EmptyTaskSet,
    #[error("unknown joint name {0:?}")]
    UnknownJoint(String),
    #[error("unknown part name {0:?}")]
    UnknownPart(String),
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },
    #[error("input resolution {input} is not divisible by heatmap resolution {resolution}")]
    StrideMismatch { input: usize, resolution: usize },
    #[error("label {label} out of range (must be < {classes})")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("no foreground pixels to fit a depth quantizer")]
    NoForeground,
    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("target is not one-hot at pixel ({row}, {col})")]
    NotOneHot { row: usize, col: usize },
    #[error("degenerate head length {0}")]
    DegenerateHeadLength(f64),
    #[error("empty region")]
    EmptyRegion,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("missing target for task {0}")]
    MissingTarget(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
