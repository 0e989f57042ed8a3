//! Lévy triplet algebra: measures, characteristic exponents, conversions,
//! market coefficients, the minimal martingale measure and small-jump
//! classification.

pub mod classify;
pub mod market;
pub mod measure;
pub mod triplet;

pub use classify::{
    classify_small_jumps, table1_parameters, ModelClass, SmallJumpClass, Table1Case, Table1Choice,
    TABLE1_SLACK,
};
pub use market::{
    check_mmm_assumption, jump_intensity_transfer, market_coefficients,
    minimal_martingale_measure, IntegrabilityQuery, MarketCoefficients, MeasureChange, MmmCheck,
};
pub use measure::{CustomMeasure, JumpLaw, JumpMap, Kappa, LevyMeasure, TailDecay};
pub use triplet::{
    characteristic_exponent, exp_to_stochastic_exp, stochastic_to_exp, CharacteristicExponent,
    LevyTriplet, MeasureTag,
};
