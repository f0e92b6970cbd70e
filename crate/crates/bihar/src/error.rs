use thiserror::Error;

/// Error type shared by the whole crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("field/domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("point lies outside the domain")]
    OutsideDomain,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("conjugate gradient stalled after {iterations} iterations (residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("bubble under-resolved on this grid: {0}")]
    UnderResolved(String),

    #[error("critical-mass denominator vanished (field has no positive part)")]
    EmptyPositivePart,

    #[error("gradient-flow step size underflow at t = {t:.6e} (J = {j:.6e})")]
    StepUnderflow { t: f64, j: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("snapshot format error: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;
