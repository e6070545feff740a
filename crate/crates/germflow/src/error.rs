//! Crate-wide error type and result alias.

use thiserror::Error;

/// Everything that can go wrong, split by how callers should react: bad
/// inputs are reported with the offending field or dimension, numeric
/// failures name the stage that broke its contract.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input: dimension mismatches, invariant violations, bad configs.
    #[error("validation: {0}")]
    Validation(String),
    /// A computation failed to meet its numeric contract.
    #[error("numeric failure in {stage}: {message}")]
    Numeric { stage: String, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub fn numeric(stage: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Numeric {
            stage: stage.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
