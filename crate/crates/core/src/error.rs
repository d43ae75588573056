use thiserror::Error;

/// Errors produced across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input data parsed but violates a record-level constraint.
    #[error("validation error: {0}")]
    Validation(String),

    /// A tabular or binary record could not be parsed.
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    /// A stream references a detector or field the metadata does not know.
    #[error("data error: {0}")]
    Data(String),

    /// The quantity is mathematically undefined for the given input.
    #[error("undefined: {0}")]
    Undefined(String),

    /// The Voigt fit refused the histogram.
    #[error("fit rejected: {0}")]
    FitRejected(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn argument(msg: impl Into<String>) -> Error {
    Error::Argument(msg.into())
}
