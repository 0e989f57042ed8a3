//! Reverse Hölder constants of the density process of the minimal
//! martingale measure.
//!
//! With `dP*/dP = e^{V_T}` for a Lévy process `V`, the conditional moments
//! of `e^{V}` are explicit: `E[e^{sV_T} | 𝓕_ρ] = e^{sV_ρ} e^{-(T-ρ)ψ_V(-si)}`.
//! The constant `c = exp(T |ψ_V(-qi)| / s)` with the moment order `q`
//! dominates the ratio in the reverse Hölder inequality `RH_s`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::LevyTriplet;

/// Which density the inequality is stated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HolderDirection {
    /// `dP*/dP = e^{V_T}` under `P`: moment order `s`.
    PstarOverP,
    /// `dP/dP* = e^{-V_T}` under `P*`: `E*[e^{-sV_T}] = E[e^{(1-s)V_T}]`,
    /// moment order `1 - s`.
    POverPstar,
}

/// `exp(T |ψ_V(-qi)| / s)` with `q = s` or `q = 1 - s`.
pub fn reverse_holder_constant(
    v_triplet: &LevyTriplet,
    s: f64,
    maturity: f64,
    direction: HolderDirection,
) -> Result<f64> {
    if !(s > 1.0) {
        return Err(Error::invalid("the reverse Hölder exponent must exceed 1"));
    }
    if !(maturity > 0.0) {
        return Err(Error::invalid("maturity must be positive"));
    }
    let q = match direction {
        HolderDirection::PstarOverP => s,
        HolderDirection::POverPstar => 1.0 - s,
    };
    if !v_triplet.nu.exp_moment_finite(q) {
        return Err(Error::DivergentExponentialMoment {
            what: "the density exponent V".into(),
            order: q,
        });
    }
    let psi = v_triplet.characteristic_exponent(Complex64::new(0.0, -q))?;
    Ok((maturity * psi.norm() / s).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasure;

    #[test]
    fn trivial_and_deterministic() {
        let zero = LevyTriplet::new(0.0, 0.0, LevyMeasure::Zero).unwrap();
        for d in [HolderDirection::PstarOverP, HolderDirection::POverPstar] {
            assert_eq!(reverse_holder_constant(&zero, 3.0, 1.0, d).unwrap(), 1.0);
        }
        let drift = LevyTriplet::new(-0.4, 0.0, LevyMeasure::Zero).unwrap();
        let c = reverse_holder_constant(&drift, 3.0, 2.0, HolderDirection::PstarOverP).unwrap();
        assert!((c - (2.0f64 * 0.4).exp()).abs() < 1e-14);
    }
}
