use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Input data failed structural validation (asymmetric matrix, odd dimension, bad schema).
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("degenerate variance: {0}")]
    DegenerateVariance(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the failure is a user-input problem (as opposed to a numerical one).
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_) | Error::Validation(_) | Error::Parse(_) | Error::DegenerateVariance(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
