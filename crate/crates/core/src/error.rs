use thiserror::Error;

/// Errors raised by the library.
///
/// Zero-probability states are not errors; they surface as
/// `f64::NEG_INFINITY` from the likelihood functions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("self-loop at line {line}")]
    SelfLoop { line: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("infeasible specification: {0}")]
    Infeasible(String),

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
