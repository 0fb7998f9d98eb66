use thiserror::Error;

/// Failures split by exit code: configuration problems exit with 2,
/// everything that goes wrong while running exits with 3.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<hgmt_train::Error> for CliError {
    fn from(e: hgmt_train::Error) -> Self {
        match e {
            hgmt_train::Error::Config(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<hgmt_data::Error> for CliError {
    fn from(e: hgmt_data::Error) -> Self {
        match e {
            hgmt_data::Error::InvalidParams(msg) => CliError::Config(msg),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<hgmt_core::Error> for CliError {
    fn from(e: hgmt_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<hgmt_nn::Error> for CliError {
    fn from(e: hgmt_nn::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Maps an I/O failure on `path` to a runtime error naming the path.
pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{}: {e}", path.display()))
}
