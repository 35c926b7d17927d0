use thiserror::Error;

/// Errors raised while validating inputs or running a solver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("thermal tail {discarded:.3e} exceeds tolerance {tolerance:.3e} with {n_fock} Fock levels")]
    TruncationTooSmall {
        discarded: f64,
        tolerance: f64,
        n_fock: usize,
    },

    #[error("step size underflow at t = {time:.6} (h = {step:.3e})")]
    StepUnderflow { time: f64, step: f64 },

    #[error("norm drift {drift:.3e} exceeds limit {limit:.1e} at t = {time:.6}")]
    NormDrift { drift: f64, limit: f64, time: f64 },

    #[error("Krylov subspace failed to converge at t = {time:.6}")]
    KrylovFailure { time: f64 },

    #[error("{failed} of {total} ensemble members failed; first: {first}")]
    Ensemble {
        failed: usize,
        total: usize,
        first: Box<Error>,
    },

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
