use thiserror::Error;

/// Errors produced by the estimator, its harness and the command-line front end.
#[derive(Debug, Error)]
pub enum LaserError {
    /// An argument violated a documented precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed tabular input.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A configuration document did not match the expected schema.
    #[error("invalid configuration field `{field}`: {msg}")]
    Schema { field: String, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LaserError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        LaserError::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, LaserError>;
