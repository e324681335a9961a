use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("operation requires a bounded feasible set")]
    UnboundedSet,

    #[error("empty sequence")]
    EmptySequence,

    #[error("point at index {index} lies outside the feasible set")]
    Infeasible { index: usize },

    #[error("inner solver did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("inner solver cannot handle a non-smooth objective without a prox")]
    NonSmooth,

    #[error("sum tree capacity {capacity} exceeded")]
    CapacityExceeded { capacity: usize },

    #[error("norm bound violated: {norm} > {bound}")]
    NormBound { norm: f64, bound: f64 },

    #[error("factorization failed: {0}")]
    Factorization(String),

    #[error("declared constant violated: {0}")]
    ConstantViolated(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
