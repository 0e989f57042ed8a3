//! Market coefficients of an exponential Lévy price and the minimal
//! martingale measure.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::measure::{JumpMap, LevyMeasure};
use super::triplet::{stochastic_to_exp, LevyTriplet, MeasureTag};
use crate::error::{Error, Result};
use crate::quad::QuadOptions;

/// Exponents `p` reported in [`MarketCoefficients::exp_moment_flags`].
pub const MOMENT_ORDERS: [i32; 7] = [-3, -2, -1, 1, 2, 3, 4];

/// Drift and second-moment characteristics of `S = e^X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketCoefficients {
    /// Drift of `S` relative to its martingale part, per unit of `S`.
    pub gamma_s: f64,
    /// `‖(σ, ν)‖ = σ² + ∫(e^x - 1)² ν(dx)`.
    pub norm_sigma_nu: f64,
    /// Mean-variance trade-off slope `γ_S² / ‖(σ, ν)‖`.
    pub tradeoff_slope: f64,
    /// `p ↦ [∫_{|x|>1} e^{px} ν(dx) < ∞]`.
    pub exp_moment_flags: BTreeMap<i32, bool>,
}

/// Computes [`MarketCoefficients`]; closed forms are used where the measure
/// has them.
pub fn market_coefficients(t: &LevyTriplet) -> Result<MarketCoefficients> {
    t.validate()?;
    if t.sigma == 0.0 && t.nu.is_zero() {
        return Err(Error::DegenerateModel);
    }
    if !t.nu.exp_moment_finite(2.0) {
        return Err(Error::NotSquareIntegrable);
    }
    let k1 = t.nu.kappa(Complex64::new(0.0, -1.0))?.re;
    let mut gamma_s = t.gamma + 0.5 * t.sigma * t.sigma + k1;
    // a drift that cancels up to rounding is a martingale
    if gamma_s.abs() <= 8.0 * f64::EPSILON * (t.gamma.abs() + 0.5 * t.sigma * t.sigma + k1.abs()) {
        gamma_s = 0.0;
    }
    let norm = t.sigma * t.sigma + t.nu.second_moment_of_price_jumps()?;
    if !(norm > 0.0) {
        return Err(Error::DegenerateModel);
    }
    let flags = MOMENT_ORDERS
        .iter()
        .map(|&p| (p, t.nu.exp_moment_finite(p as f64)))
        .collect();
    Ok(MarketCoefficients {
        gamma_s,
        norm_sigma_nu: norm,
        tradeoff_slope: gamma_s * gamma_s / norm,
        exp_moment_flags: flags,
    })
}

/// Outcome of the minimal-martingale-measure feasibility check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmmCheck {
    pub holds: bool,
    /// `‖(σ,ν)‖ - sup_{x ∈ supp ν ∪ {0}} γ_S (e^x - 1)`; positive when the
    /// assumption holds with room to spare.
    pub margin: f64,
    /// Whether the sufficient condition `0 ≥ γ_S ≥ -‖(σ,ν)‖` holds.
    pub via_sufficient: bool,
}

/// Checks `γ_S (e^x - 1) < ‖(σ,ν)‖` on the support of `ν` using the support
/// endpoints of the measure.
pub fn check_mmm_assumption(t: &LevyTriplet) -> Result<MmmCheck> {
    let mc = market_coefficients(t)?;
    Ok(check_with_coefficients(t, &mc))
}

fn check_with_coefficients(t: &LevyTriplet, mc: &MarketCoefficients) -> MmmCheck {
    let gs = mc.gamma_s;
    let norm = mc.norm_sigma_nu;
    let via_sufficient = gs <= 0.0 && gs >= -norm;
    if t.nu.is_zero() || gs == 0.0 {
        return MmmCheck {
            holds: true,
            margin: norm,
            via_sufficient,
        };
    }
    let (lo, hi) = t.nu.support();
    // the binding edge is the right end for γ_S > 0 and the left end otherwise
    let edge = if gs > 0.0 { hi } else { lo };
    let value = gs * edge.exp_m1();
    let sup = value.max(0.0);
    let holds = if edge.is_finite() {
        value < norm
    } else {
        // the supremum is a limit that is not attained
        value <= norm
    };
    MmmCheck {
        holds,
        margin: norm - sup,
        via_sufficient,
    }
}

/// Change to the minimal martingale measure `dP* = 𝓔(U)_T dP`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureChange {
    /// Loading `a = -γ_S/‖(σ,ν)‖` of `U = a(σW + ∫(e^x - 1) dÑ)`.
    pub u_coefficient: f64,
    /// Characteristics of `X` under `P*`.
    pub starred_triplet: LevyTriplet,
    /// Characteristics of `U`.
    pub u_triplet: LevyTriplet,
    /// Characteristics of `V` with `e^V = 𝓔(U)`.
    pub v_triplet: LevyTriplet,
}

impl MeasureChange {
    /// Whether `P* = P`.
    pub fn is_trivial(&self) -> bool {
        self.u_coefficient == 0.0
    }
}

/// Constructs the minimal martingale measure.
pub fn minimal_martingale_measure(t: &LevyTriplet) -> Result<MeasureChange> {
    let mc = market_coefficients(t)?;
    let check = check_with_coefficients(t, &mc);
    if !check.holds {
        return Err(Error::AssumptionViolated {
            margin: check.margin,
        });
    }
    let c = mc.gamma_s / mc.norm_sigma_nu;
    if c == 0.0 {
        let zero = LevyTriplet {
            gamma: 0.0,
            sigma: 0.0,
            nu: LevyMeasure::Zero,
            measure_tag: MeasureTag::Original,
        };
        return Ok(MeasureChange {
            u_coefficient: 0.0,
            starred_triplet: t.clone().with_tag(MeasureTag::Minimal),
            u_triplet: zero.clone(),
            v_triplet: zero,
        });
    }
    let opts = QuadOptions::with_tol(1e-15, 1e-13);
    let m1 = t
        .nu
        .integrate_over(&|x: f64| x * x.exp_m1(), -1.0, 1.0, &[], &opts)
        .ok_or_fail("∫_{|x|≤1} x(e^x - 1) ν")?;
    let starred = LevyTriplet {
        gamma: t.gamma - c * (t.sigma * t.sigma + m1),
        sigma: t.sigma,
        nu: t.nu.reweighted(c),
        measure_tag: MeasureTag::Minimal,
    };

    // U has jumps α_U(x) = -c(e^x - 1) and no drift beyond the large-jump compensation
    let alpha_u = move |x: f64| -c * x.exp_m1();
    let breaks: Vec<f64> = [1.0 + 1.0 / c, 1.0 - 1.0 / c]
        .iter()
        .filter(|v| **v > 0.0)
        .map(|v| v.ln())
        .collect();
    let gamma_u = -t
        .nu
        .integrate(
            &|x: f64| {
                let a = alpha_u(x);
                if a.abs() > 1.0 {
                    a
                } else {
                    0.0
                }
            },
            &breaks,
            &opts,
        )
        .ok_or_fail("γ_U")?;
    let u_triplet = LevyTriplet {
        gamma: gamma_u,
        sigma: c.abs() * t.sigma,
        nu: t.nu.image(&[JumpMap::ExpM1, JumpMap::Scale(-c)]),
        measure_tag: MeasureTag::Original,
    };
    let v_triplet = stochastic_to_exp(&u_triplet)?;
    Ok(MeasureChange {
        u_coefficient: -c,
        starred_triplet: starred,
        u_triplet,
        v_triplet,
    })
}

/// Integrability query transferred between `ν` and `ν*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrabilityQuery {
    /// `∫_{|x|≤1} |x|^β ν*(dx) < ∞`.
    Small(f64),
    /// `∫_{|x|>1} e^{(r-1)x} ν*(dx) < ∞`, equivalently `∫_{|x|>1} e^{rx} ν(dx) < ∞`.
    Big(f64),
}

/// Answers integrability questions about `ν*` via the transfer relations
/// between `ν` and `ν*`.
pub fn jump_intensity_transfer(
    nu: &LevyMeasure,
    change: &MeasureChange,
    query: IntegrabilityQuery,
) -> bool {
    if nu.is_zero() {
        return true;
    }
    match query {
        IntegrabilityQuery::Small(beta) => nu.small_jump_integrable(beta),
        IntegrabilityQuery::Big(r) => {
            if change.is_trivial() {
                nu.exp_moment_finite(r - 1.0)
            } else {
                change.starred_triplet.nu.exp_moment_finite(r - 1.0)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn merton() -> LevyMeasure {
        LevyMeasure::Merton {
            lambda: 0.3,
            mu_j: -0.1,
            sigma_j: 0.15,
        }
    }

    #[test]
    fn diffusion_coefficients() {
        let t = LevyTriplet::new(-0.02, 0.2, LevyMeasure::Zero).unwrap();
        let mc = market_coefficients(&t).unwrap();
        assert!(mc.gamma_s.abs() < 1e-17);
        assert!((mc.norm_sigma_nu - 0.04).abs() < 1e-17);
        assert_eq!(mc.tradeoff_slope, 0.0);
    }

    #[test]
    fn degenerate_model_rejected() {
        let t = LevyTriplet::new(0.1, 0.0, LevyMeasure::Zero).unwrap();
        assert_eq!(market_coefficients(&t), Err(Error::DegenerateModel));
    }

    #[test]
    fn merton_norm_closed_form() {
        let (l, m, s) = (0.3f64, -0.1f64, 0.15f64);
        let t = LevyTriplet::new(0.05, 0.2, merton()).unwrap();
        let mc = market_coefficients(&t).unwrap();
        let closed = 0.04 + l * ((2.0 * m + 2.0 * s * s).exp() - 2.0 * (m + 0.5 * s * s).exp() + 1.0);
        assert!(((mc.norm_sigma_nu - closed) / closed).abs() < 1e-12);
    }

    #[test]
    fn starred_triplet_is_martingale() {
        let t = LevyTriplet::with_gamma_s(-0.02, 0.2, merton()).unwrap();
        let ch = minimal_martingale_measure(&t).unwrap();
        let mc = market_coefficients(&ch.starred_triplet).unwrap();
        assert!(mc.gamma_s.abs() < 1e-12, "{}", mc.gamma_s);
        // e^V is a martingale: ψ_V(-i) = 0
        let psi = ch
            .v_triplet
            .characteristic_exponent(Complex64::new(0.0, -1.0))
            .unwrap();
        assert!(psi.norm() < 1e-10, "{psi}");
    }

    #[test]
    fn martingale_case_is_trivial() {
        let t = LevyTriplet::with_gamma_s(0.0, 0.2, merton()).unwrap();
        let ch = minimal_martingale_measure(&t).unwrap();
        assert!(ch.is_trivial());
        assert_eq!(ch.starred_triplet.nu, t.nu);
        let check = check_mmm_assumption(&t).unwrap();
        assert!(check.holds && check.via_sufficient);
    }

    #[test]
    fn positive_drift_with_unbounded_jumps_fails() {
        let t = LevyTriplet::with_gamma_s(0.05, 0.2, merton()).unwrap();
        assert!(!check_mmm_assumption(&t).unwrap().holds);
        assert!(matches!(
            minimal_martingale_measure(&t),
            Err(Error::AssumptionViolated { .. })
        ));
        let bs = LevyTriplet::with_gamma_s(0.05, 0.2, LevyMeasure::Zero).unwrap();
        assert!(check_mmm_assumption(&bs).unwrap().holds);
    }

    #[test]
    fn transfer_of_queries() {
        let nu = LevyMeasure::Cgmy {
            c: 0.5,
            g: 4.0,
            m: 6.0,
            y: 1.2,
        };
        let t = LevyTriplet::with_gamma_s(-0.05, 0.1, nu.clone()).unwrap();
        let ch = minimal_martingale_measure(&t).unwrap();
        assert!(jump_intensity_transfer(&nu, &ch, IntegrabilityQuery::Small(1.5)));
        assert!(!jump_intensity_transfer(&nu, &ch, IntegrabilityQuery::Small(1.1)));
        assert!(jump_intensity_transfer(&nu, &ch, IntegrabilityQuery::Big(6.0)));
        assert!(!jump_intensity_transfer(&nu, &ch, IntegrabilityQuery::Big(6.5)));
    }
}
