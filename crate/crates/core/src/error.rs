use thiserror::Error;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("exhaustive enumeration needs {needed} subsets, budget is {budget}; use sampled mode")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidDimension(msg.into()))
}
