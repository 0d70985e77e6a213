use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("internal error: {0}")]
    Internal(String),

    /// Factorization hit a non-positive pivot.
    #[error("solver failure: non-positive pivot at index {index}")]
    SolverFailure { index: usize },

    /// A norm or quantity that is not defined for the given inputs.
    #[error("undefined value: {0}")]
    Undefined(String),

    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
