use thiserror::Error;

/// Errors raised by the analysis routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("operator I + A is numerically singular at {at} (min singular value {min_singular:.3e})")]
    Singular { at: String, min_singular: f64 },
    #[error("resolution insufficient: {0}")]
    Resolution(String),
    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
    #[error("no parameter on the grid satisfies the target: {0}")]
    Unreachable(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
