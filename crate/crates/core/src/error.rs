use thiserror::Error;

/// Errors raised across the solver pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian: defect {defect:e} exceeds {tol:e}")]
    NotHermitian { defect: f64, tol: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("invalid problem: {0}")]
    InvalidProblem(String),

    #[error("potential has no decaying tail (value {value:e} at the end of its support)")]
    UnboundedSupport { value: f64 },

    #[error("M(b) is singular at lambda = {lambda} (condition number {condition:e})")]
    SingularEndpoint { lambda: f64, condition: f64 },

    #[error("Riccati pole near x = {x} (|F| = {norm:e})")]
    Pole { x: f64, norm: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no ground state to remove: the negative spectrum is empty")]
    EmptySpectrum,

    #[error("Riccati residual {residual:e} exceeds {limit:e}; transform refused")]
    ResidualTooLarge { residual: f64, limit: f64 },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("hypothesis not satisfied: {0}")]
    Hypothesis(String),
}

pub type Result<T> = std::result::Result<T, Error>;
