use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] hgmt_core::Error),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("record {record}: missing {modality} file")]
    MissingModality { record: String, modality: &'static str },
    #[error("record {record}: corrupt {modality}: {reason}")]
    Corrupt { record: String, modality: &'static str, reason: String },
    #[error("record {record}: camera intrinsics absent")]
    MissingIntrinsics { record: String },
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
