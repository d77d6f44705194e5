use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An exponent, domain, or grid constraint does not hold.
    #[error("domain error: {0}")]
    Domain(String),
    #[error("function vanishes identically")]
    ZeroFunction,
    #[error("invalid alpha: {0}")]
    InvalidAlpha(String),
    #[error("invalid exponents: {0}")]
    InvalidExponents(String),
    #[error("constraint violated: {0}")]
    ConstraintViolated(String),
    #[error("residual too large: {residual:e} > {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },
    #[error("contract violated: {0}")]
    ContractViolated(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("missing reference: {0}")]
    MissingReference(String),
    #[error("insufficient range: {0}")]
    InsufficientRange(String),
}
