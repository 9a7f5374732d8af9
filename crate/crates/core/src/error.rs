use thiserror::Error;

use crate::marginal::InfeasibilityReport;
use crate::reduce::ReductionTrace;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not Hermitian (relative asymmetry {0:e})")]
    NotHermitian(f64),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("subsystem index {index} out of range for {count} subsystems")]
    SubsystemOutOfRange { index: usize, count: usize },

    #[error("Pauli exclusion: {particles} fermions cannot occupy {levels} levels")]
    PauliExclusion { particles: usize, levels: usize },

    #[error("p = {p} is outside the admissible window [{min}, {max}] for N = {particles}")]
    InadmissibleOccupation {
        particles: usize,
        p: usize,
        min: usize,
        max: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("channel is not trace preserving (deviation {0:e})")]
    NotTracePreserving(f64),

    #[error("channel is not completely positive (min Choi eigenvalue {0:e})")]
    NotCompletelyPositive(f64),

    #[error("possibly infeasible: best residual {:e} after {} iterations", .0.best_residual, .0.iterations)]
    PossiblyInfeasible(Box<InfeasibilityReport>),

    #[error("repair failed: residual {residual:e} exceeds {tol:e}")]
    RepairFailed {
        residual: f64,
        tol: f64,
        trace: Box<ReductionTrace>,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn mismatch(expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch { expected, actual }
    }
}
