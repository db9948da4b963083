use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("photon cutoff N = {0} is too small, two-photon dynamics needs N >= 2")]
    TruncationTooSmall(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (relative deviation {0:e})")]
    NotHermitian(f64),

    #[error("trace is {0}, expected 1")]
    TraceNotUnit(f64),

    #[error("matrix has a negative eigenvalue {0:e}")]
    NotPositive(f64),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("time grid must be strictly increasing")]
    NonIncreasingTimes,

    #[error("step size underflow at tau = {tau} (stiffness failure)")]
    StepUnderflow { tau: f64 },

    #[error("Liouvillian null space is degenerate (pivot ratio {0:e})")]
    DegenerateNullSpace(f64),

    #[error("steady-state residual {0:e} exceeds tolerance")]
    SteadyStateResidual(f64),

    #[error("steady-state photon number {0:e} is too small to condition on a detection")]
    EmptyCavity(f64),

    #[error("jump annihilates the state (weight {0:e})")]
    ZeroWeight(f64),

    #[error("flux ratio is undefined: atomic excitation {0:e} vanishes")]
    UndefinedFluxRatio(f64),

    #[error("displacement cutoff too small: trace leakage {0:e}")]
    InsufficientCutoff(f64),

    #[error("records do not share a time grid or configuration")]
    GridMismatch,

    #[error("ensemble needs at least 2 records, got {0}")]
    TooFewRecords(usize),

    #[error("state norm collapsed to {0:e} between jump checks")]
    NormCollapse(f64),

    #[error("linear algebra failure: {0}")]
    Linalg(String),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Linalg(e.to_string())
    }
}

impl From<lax::error::Error> for Error {
    fn from(e: lax::error::Error) -> Self {
        Error::Linalg(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
