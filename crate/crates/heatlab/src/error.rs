//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeatlabError {
    #[error("invalid polynomial: {0}")]
    InvalidPolynomial(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("eigensolver did not converge: {0} (best residual {1:.3e})")]
    EigenNoConvergence(String, f64),

    #[error("Krylov exponential did not converge: {0}")]
    KrylovNoConvergence(String),

    #[error("linear solve failed: {0}")]
    SolveFailure(String),

    #[error("Szego basis degree {requested} exceeds the mass criterion; max admissible K = {max_admissible}")]
    SzegoDegree { requested: usize, max_admissible: usize },

    #[error("CFL violation: dt = {dt:.3e} gives ratio {ratio:.3} > 0.5; use dt <= {suggested:.3e}")]
    CflViolation { dt: f64, ratio: f64, suggested: f64 },

    #[error("wave cone exits the grid: {0}")]
    ConeOutOfDomain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification input error: {0}")]
    Verify(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HeatlabError>;
