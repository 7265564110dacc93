//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by any layer of the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value violates its documented range or structure.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// A tensor/vector dimension does not match the contract.
    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A numeric input or result was NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A backward pass was attempted with a tape that no longer matches
    /// the parameter set it was recorded against.
    #[error("stale or mismatched tape: {0}")]
    StaleTape(String),

    /// Training aborted because a loss term became non-finite.
    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: u64, detail: String },

    /// An estimator's conditioning cell contains no observations.
    #[error("empty conditioning cell: {0}")]
    EmptyCell(String),

    /// A dataset, table, or argument was empty where data is required.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// An experiment run finished with failed grid cells.
    #[error("experiment incomplete: {failed} of {total} cells failed")]
    IncompleteRun { failed: usize, total: usize },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error on {path}: {detail}")]
    Csv { path: String, detail: String },

    /// A parse error in a data or table file.
    #[error("parse error in {path}: {detail}")]
    Parse { path: String, detail: String },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn json(path: impl AsRef<std::path::Path>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
