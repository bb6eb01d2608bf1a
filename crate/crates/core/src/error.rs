//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or input value violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Array shapes, channel counts or layer dimensions do not line up.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A file does not follow the expected on-disk format.
    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// WAV encode/decode failure.
    #[error("wav error: {0}")]
    Wav(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn dimension(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
