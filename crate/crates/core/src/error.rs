use thiserror::Error;

/// Errors raised by the numerical routines and the experiment driver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DsltError {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Cholesky factorization hit a non-positive pivot.
    #[error("covariance factorization failed at pivot {pivot} (value {value:e})")]
    Factorization { pivot: usize, value: f64 },

    /// Circulant embedding produced a negative eigenvalue beyond the clamp tolerance.
    #[error("circulant embedding is not PSD: eigenvalue {eigenvalue:e} at index {index}")]
    Embedding { index: usize, eigenvalue: f64 },

    /// A routine was called outside of its mathematical contract.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A quadrature or series evaluation failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The requested point is singular for the integrand.
    #[error("singular point: {0}")]
    Singular(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for DsltError {
    fn from(e: std::io::Error) -> Self {
        DsltError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, DsltError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(DsltError::Domain(msg.into()))
}
