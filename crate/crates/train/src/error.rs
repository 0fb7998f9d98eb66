use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hgmt_core::Error),
    #[error(transparent)]
    Nn(#[from] hgmt_nn::Error),
    #[error(transparent)]
    Data(#[from] hgmt_data::Error),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("aborted at step {step}: non-finite {what}")]
    NonFinite { step: u64, what: String },
    #[error("model tasks {model} are not all annotated in the data ({data})")]
    TaskMismatch { model: String, data: String },
    #[error("{0} is empty")]
    EmptyData(&'static str),
    #[error("sample {index} is {actual} pixels wide, the model expects {expected}")]
    InputSize { index: usize, expected: usize, actual: usize },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
