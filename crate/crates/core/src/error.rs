use thiserror::Error;

/// Errors raised by the numeric and learning modules.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PrismError {
    /// Caller passed malformed data, for example a wrong shape or an empty batch.
    #[error("invalid input: {0}")]
    Input(String),
    /// An operation was called in the wrong order (e.g. backward before forward).
    #[error("invalid state: {0}")]
    State(String),
    /// A loss, gradient or parameter became NaN or infinite.
    #[error("numeric failure: {0}")]
    Numeric(String),
    /// The requested operation is not supported for these arguments.
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for PrismError {
    fn from(e: std::io::Error) -> Self {
        PrismError::Io(e.to_string())
    }
}

impl From<csv::Error> for PrismError {
    fn from(e: csv::Error) -> Self {
        PrismError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, PrismError>;

pub(crate) fn input_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(PrismError::Input(msg.into()))
}
