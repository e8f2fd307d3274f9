use std::path::PathBuf;

use scatter_core::ScatterError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Format(String),

    #[error("cannot decode {}: {message}", path.display())]
    Ingest { path: PathBuf, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] ScatterError),
}

impl CliError {
    /// Process exit status: 2 usage, 3 data, 4 format.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) | CliError::Ingest { .. } | CliError::Io { .. } => 3,
            CliError::Format(_) => 4,
            CliError::Core(e) => match e {
                ScatterError::Parameter(_) | ScatterError::DegenerateBank { .. } => 2,
                ScatterError::Data(_) | ScatterError::Io(_) => 3,
                ScatterError::Format { .. } => 4,
                ScatterError::Internal(_) => 1,
            },
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}
