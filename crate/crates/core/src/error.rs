//! Crate-wide error type.

use std::io;
use thiserror::Error;

/// Errors produced by the processing stages.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments or inputs violate a documented precondition.
    #[error("validation: {0}")]
    Validation(String),

    /// Underlying I/O failed (missing file, truncated read, permissions).
    #[error("i/o: {0}")]
    Io(#[from] io::Error),

    /// File contents are not in the expected format or version.
    #[error("format: {0}")]
    Format(String),

    /// A detector found nothing that clears its support threshold.
    #[error("detection: {0}")]
    Detection(String),

    /// Too few observations to estimate the requested quantity.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A computation left the domain where its result is meaningful.
    #[error("numeric: {0}")]
    Numeric(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
