//! Error type shared by all modules of the library.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures reported by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("exponential moment of order {order} is not finite for {what}")]
    DivergentExponentialMoment { what: String, order: f64 },

    #[error("quadrature failed for {what}: error estimate {estimate:e} above tolerance")]
    QuadratureFailure { what: String, estimate: f64 },

    #[error("stochastic exponential is not positive: jumps at or below -1 are present")]
    NonPositiveExponential,

    #[error("price process is not square integrable (exp(2x) moment of the jump measure diverges)")]
    NotSquareIntegrable,

    #[error("degenerate model: sigma^2 + nu(R) must be positive")]
    DegenerateModel,

    #[error("minimal martingale measure assumption violated (margin {margin})")]
    AssumptionViolated { margin: f64 },

    #[error("Blumenthal-Getoor index could not be determined: {0}")]
    IndeterminateIndex(String),

    #[error("no Table-1 case applies: {0}")]
    NoApplicableCase(String),

    #[error("COS truncation: tail mass bound {tail_bound:e} outside the expansion interval exceeds tolerance")]
    CosTruncationError { tail_bound: f64 },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("unsupported sampler: {0}")]
    UnsupportedSampler(String),

    #[error("Monte Carlo path budget exhausted: {0}")]
    PathBudgetExhausted(String),

    #[error("oracle did not converge: refinement changed the value by {change:e} (tolerance {tolerance:e})")]
    OracleNotConverged { change: f64, tolerance: f64 },

    #[error("insufficient paths: got {got}, need at least {need}")]
    InsufficientPaths { got: usize, need: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("interrupted")]
    Interrupted,
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
