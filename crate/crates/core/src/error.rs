use thiserror::Error;

/// Errors produced by model construction and numerical evaluation.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    /// Parameters violate a model or query invariant.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The requested operation is not defined for this process family.
    #[error("unsupported for this family: {0}")]
    UnsupportedFamily(String),

    /// A series or iteration did not converge within its budget.
    #[error("did not converge: {0}")]
    NonConvergence(String),

    /// Quadrature or another numerical routine failed to reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Configuration file or CLI input could not be validated.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
