//! Local risk-minimizing hedging under exponential Lévy models.
//!
//! The crate evaluates the explicit local risk-minimizing strategy of a
//! European claim `g(S_T)` on `S = e^X`, simulates the jump-adjusted
//! discrete-time hedge and estimates its error in `L_p` and weighted BMO
//! norms, so that convergence rates can be compared with theory.
//!
//! * [`levy`]: triplets, measures, market coefficients, minimal martingale measure
//! * [`pricing`]: semigroup values, strategies and representation kernels
//! * [`simulate`]: time nets, path simulation and hedging discretizations
//! * [`metrics`]: error norms, BMO/SM estimators, reverse Hölder constants, rates

pub mod error;
pub mod experiment;
pub mod levy;
pub mod metrics;
pub mod payoff;
pub mod pricing;
pub mod quad;
pub mod simulate;
pub mod special;

pub use error::{Error, Result};
pub use payoff::{Payoff, PayoffKind};

/// Library version recorded in experiment outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
