//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside its admissible range (Hurst index, horizon,
    /// delay, grid sizes and the like).
    #[error("invalid parameter: {0}")]
    Invalid(String),

    /// A coefficient violates a structural requirement, e.g. a volatility
    /// that vanishes or changes sign on the grid.
    #[error("coefficient violation: {0}")]
    Coefficient(String),

    /// Cholesky factorisation hit a non-positive pivot.
    #[error("covariance factorisation failed at pivot {pivot}: value {value:e}")]
    Factorization { pivot: usize, value: f64 },

    /// The Durbin-Levinson recursion produced a non-positive innovation
    /// variance.
    #[error("innovation variance underflow at step {step}: value {value:e}")]
    VarianceUnderflow { step: usize, value: f64 },

    /// A regression normal matrix was too ill-conditioned to trust.
    #[error("regression at time step {step} ill-conditioned: estimate {cond:e}")]
    IllConditioned { step: usize, cond: f64 },

    /// The generator returned a non-finite value.
    #[error("generator returned a non-finite value at t = {t}")]
    NonFiniteGenerator { t: f64 },

    /// No admissible value exists for the requested quantity.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// Too many paths left the spatial domain of a value field.
    #[error("domain truncation: {fraction:.4} of evaluations extrapolated (limit {limit})")]
    DomainTruncation { fraction: f64, limit: f64 },

    /// Fixed-point iteration stopped making progress before the tolerance.
    #[error("iteration diverged after {iterations} sweeps, last distance {last:e}")]
    Diverged { iterations: usize, last: f64 },

    /// Catch-all for numerical failures with context.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn coefficient(msg: impl Into<String>) -> Self {
        Error::Coefficient(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
