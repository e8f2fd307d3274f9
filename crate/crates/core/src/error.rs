use thiserror::Error;

pub type Result<T> = std::result::Result<T, ScatterError>;

#[derive(Debug, Error)]
pub enum ScatterError {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("format error at byte {offset}: {message}")]
    Format { offset: u64, message: String },

    #[error("degenerate filter bank: lower frame bound {lower:.4} is below {threshold} (frequency holes)")]
    DegenerateBank { lower: f64, threshold: f64 },

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScatterError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        ScatterError::Parameter(msg.into())
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        ScatterError::Format {
            offset,
            message: msg.into(),
        }
    }
}
