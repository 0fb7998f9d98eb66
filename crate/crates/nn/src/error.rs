use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hgmt_core::error::Error),
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape { op: &'static str, expected: String, actual: String },
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("unknown parameter {0:?}")]
    UnknownParameter(String),
    #[error("duplicate parameter {0:?}")]
    DuplicateParameter(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("checkpoint was written for tasks {found}, model has {expected}")]
    TaskMismatch { expected: String, found: String },
    #[error("missing target for task {0}")]
    MissingTarget(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
