//! Pricing under the minimal martingale measure: the semigroup `G*`, the
//! local risk-minimizing strategy, strategy surfaces for simulation,
//! martingale-representation kernels and growth diagnostics.

pub(crate) mod cos;
pub mod envelope;
pub mod evaluator;
pub mod field;
pub mod kernels;

pub use cos::Cumulants;
pub use envelope::{growth_envelope, GrowthEnvelope, StrategySample};
pub use evaluator::{
    black_scholes_call, lrm_strategy, semigroup_gradient, semigroup_value, Estimate, PricingMethod,
    SemigroupEvaluator, StrategyValue, COS_TAIL_TOLERANCE, MAX_COS_TERMS,
};
pub use field::{
    interpolate_slices, ConstantStrategy, FnStrategy, Strategy, StrategyField, StrategySlice,
    StrategySurface, GridSlice, DEFAULT_FIELD_TERMS,
};
pub use kernels::{
    representation_kernels, KernelField, KernelSlice, LogPayoff, RepresentationEngine, RepresentationKernels,
};
