use thiserror::Error;

/// Errors raised anywhere in the solver.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A function or Jacobian evaluation produced NaN or infinity.
    #[error("non-finite value at index {index}")]
    Domain { index: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The min-function Jacobian was requested at a kink (x_i = y_i with mu = 0).
    #[error("nonsmooth point at component {index}")]
    Nonsmooth { index: usize },

    #[error("Jacobian is rank deficient")]
    RankDeficient,

    #[error("corrector did not converge in {iterations} iterations")]
    CorrectorFailed { iterations: usize },

    #[error("step size underflow at s = {0}")]
    StepUnderflow(f64),

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("unknown problem id `{0}`")]
    UnknownProblem(String),

    #[error("operation requires a scalar problem, got dimension {0}")]
    NotScalar(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
