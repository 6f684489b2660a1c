use thiserror::Error;

/// Errors raised by the numerical layers and the report runner.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index out of range: {0}")]
    Index(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("truncation error: {0}")]
    Truncation(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("precondition failed: {what} (measured tail {tail:.3e})")]
    Precondition { what: String, tail: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
