use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("empty point set: {0}")]
    EmptySet(String),
    #[error("point out of bounds: {0}")]
    Bounds(String),
    #[error("spec mismatch: {0}")]
    Spec(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("endpoint occupied: {0}")]
    Endpoint(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
