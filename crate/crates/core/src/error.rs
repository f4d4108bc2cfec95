use thiserror::Error;

/// Errors reported by the transform library.
#[derive(Debug, Error)]
pub enum ShtError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A formula was evaluated outside of its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("internal error: {0}")]
    Internal(String),

    /// A quantity that is undefined for the given input, e.g. a relative
    /// error against an all-zero reference.
    #[error("undefined: {0}")]
    Undefined(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ShtError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ShtError::InvalidArgument(msg.into()))
}
