use thiserror::Error;

/// Errors raised by the library. CLI callers map [`Error::Usage`] to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage error: {0}")]
    Usage(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unsupported regime: hazard class {0} has no closed-form optimal mechanism")]
    UnsupportedRegime(String),

    #[error("instance too large: {count} exceeds the limit of {limit}")]
    TooLarge { count: usize, limit: usize },

    #[error("simplex stalled after {iterations} iterations")]
    Stall { iterations: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
