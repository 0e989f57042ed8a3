//! Error norms and rate verification: empirical `L_p` norms, grid-restricted
//! weighted-BMO and `SM_p` estimators, reverse Hölder constants, tail decay
//! and log-log rate regression.

pub mod bmo;
pub mod holder;
pub mod norms;
pub mod rates;
pub mod weights;

pub use bmo::{sm_p_estimate, weighted_bmo_estimate, CELL_SIZE, MIN_PATHS};
pub use holder::{reverse_holder_constant, HolderDirection};
pub use norms::{lp_norm, NormEstimate, BOOTSTRAP_RESAMPLES};
pub use rates::{
    convergence_rate, tail_decay, ErrorKind, RatePoint, RateReport, TailFit, Verdict, MIN_SAMPLES_PER_N,
    MIN_TAIL_SAMPLES,
};
pub use weights::WeightPath;
