//! Error type shared by every module of the crate.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two shapes that must agree do not.
    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    /// A precondition of an operation was violated by the caller.
    #[error("contract violation: {0}")]
    Contract(String),

    /// Malformed input data (IDX, CSV, checkpoint, ...).
    #[error("format error in {field}: {detail}")]
    Format { field: String, detail: String },

    /// A trace needed as a divisor was (numerically) zero.
    #[error("singular trace at index {index}: |tr| = {trace:e}")]
    Singularity { index: usize, trace: f64 },

    /// The computation graph violated its topological invariant.
    #[error("internal graph error: {0}")]
    Graph(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(field: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            field: field.into(),
            detail: detail.into(),
        }
    }
}
