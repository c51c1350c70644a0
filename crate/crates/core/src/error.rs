use thiserror::Error;

use crate::ifs::ValidationReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rational literal {0:?}")]
    ParseRational(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("refinement level must be positive")]
    ZeroRefinement,

    #[error("invalid IFS: {0}")]
    InvalidIfs(ValidationReport),

    #[error("contraction ratios {0} and {1} are incommensurable up to exponent {2}")]
    Incommensurable(String, String, u32),

    #[error("unknown label {0:?}")]
    UnknownLabel(String),

    #[error("label {0:?} indexes an endmost cylinder and cannot be perturbed")]
    EndmostPerturbed(String),

    #[error("perturbation makes cylinders {0:?} and {1:?} collide")]
    PerturbationCollision(String, String),

    #[error("perturbation component {0} outside [-1, 1]")]
    PerturbationRange(String),

    #[error("word lengths differ: {0} vs {1}")]
    WordLengthMismatch(usize, usize),

    #[error("{what} count {count} exceeds cap {cap}")]
    CapExceeded { what: &'static str, count: u128, cap: u128 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("inconsistent inputs: {0}")]
    Mismatch(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
