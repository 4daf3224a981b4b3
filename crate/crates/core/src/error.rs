//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes surfaced by parsing, validation, and analysis.
#[derive(Debug, Error)]
pub enum Error {
    /// Structurally bad input at a known line of a text format.
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },

    /// Input that parsed but violates a semantic requirement.
    #[error("{0}")]
    Invalid(String),

    /// Underlying filesystem failure.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Builds a line-tagged parse error.
    pub fn malformed(line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            line,
            message: message.into(),
        }
    }

    /// Builds a validation error from a message.
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::Invalid(message.into())
    }
}
