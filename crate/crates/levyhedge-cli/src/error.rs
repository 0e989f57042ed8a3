//! CLI failures and their exit codes.

use thiserror::Error;

/// Exit status for success, including consistent or inconclusive verdicts.
pub const EXIT_OK: i32 = 0;
/// Exit status for usage and configuration errors.
pub const EXIT_CONFIG: i32 = 1;
/// Exit status when the fitted rate contradicts the prediction.
pub const EXIT_INCONSISTENT: i32 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Library(#[from] levyhedge::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use levyhedge::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_NUMERICAL,
            CliError::Library(e) => match e {
                E::InvalidParameter(_)
                | E::DivergentExponentialMoment { .. }
                | E::NonPositiveExponential
                | E::NotSquareIntegrable
                | E::DegenerateModel
                | E::AssumptionViolated { .. }
                | E::NoApplicableCase(_)
                | E::PreconditionViolated(_)
                | E::InsufficientPaths { .. } => EXIT_CONFIG,
                _ => EXIT_NUMERICAL,
            },
        }
    }
}
