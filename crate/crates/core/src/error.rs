use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum QiError {
    /// Caller supplied malformed or inconsistent input.
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// The data is legal but carries no usable signal for the requested quantity.
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, QiError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(QiError::InvalidInput(msg.into()))
}

pub(crate) fn degenerate<T>(msg: impl Into<String>) -> Result<T> {
    Err(QiError::DegenerateData(msg.into()))
}
