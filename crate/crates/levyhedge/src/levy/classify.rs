//! Small-jump activity classification and the choice of rate parameters
//! `(r, θ)` for the jump-adjusted hedging scheme.

use serde::{Deserialize, Serialize};

use super::measure::LevyMeasure;
use crate::error::{Error, Result};
use crate::payoff::Payoff;
use crate::quad::QuadOptions;

/// Resolution of the Blumenthal–Getoor bisection on `r`.
pub const BG_TOLERANCE: f64 = 0.05;
/// Annuli `[2^{-k-1}, 2^{-k}]` for `k` in this range are used to decide
/// convergence of `∫_{δ≤|x|≤1} |x|^r ν(dx)` as `δ ↓ 0`.
pub const BG_ANNULI: std::ops::RangeInclusive<u32> = 4..=20;

/// Small-jump activity of a Lévy measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallJumpClass {
    pub bg_index: f64,
    pub s1_alpha: Option<f64>,
    pub s2_alpha: Option<f64>,
    /// Whether `ν(R) < ∞`.
    pub finite_activity: bool,
}

impl SmallJumpClass {
    /// Smallest `α` with `∫_{|x|≤1}|x|^α ν < ∞` together with whether it is
    /// attained (closed range) or only approached (open range).
    fn integrability_floor(&self) -> (f64, bool) {
        if self.finite_activity {
            return (0.0, true);
        }
        let a = self.s1_alpha.or(self.s2_alpha).unwrap_or(self.bg_index);
        (a, false)
    }
}

/// Log-slope of the annulus masses `k ↦ log₂ ∫_{annulus k} |x|^r ν(dx)`.
fn annulus_log_slope(nu: &LevyMeasure, r: f64) -> Result<f64> {
    let opts = QuadOptions::with_tol(1e-300, 1e-10);
    let ks: Vec<u32> = BG_ANNULI.collect();
    let mut pts = Vec::new();
    for &k in &ks[..ks.len() - 1] {
        let hi = 2f64.powi(-(k as i32));
        let lo = 0.5 * hi;
        let f = |x: f64| x.abs().powf(r);
        let right = nu.integrate_over(&f, lo, hi, &[], &opts);
        let left = nu.integrate_over(&f, -hi, -lo, &[], &opts);
        let v = right.value + left.value;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::IndeterminateIndex(format!(
                "non-finite annulus mass at k = {k}"
            )));
        }
        pts.push((k as f64, v));
    }
    if pts.iter().all(|(_, v)| *v == 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    if pts.iter().any(|(_, v)| *v == 0.0) {
        return Err(Error::IndeterminateIndex(
            "annulus masses vanish on part of the range".into(),
        ));
    }
    // least-squares slope over the deepest half of the annuli
    let deep = &pts[pts.len() / 2..];
    let n = deep.len() as f64;
    let mx = deep.iter().map(|p| p.0).sum::<f64>() / n;
    let my = deep.iter().map(|p| p.1.log2()).sum::<f64>() / n;
    let sxy: f64 = deep.iter().map(|p| (p.0 - mx) * (p.1.log2() - my)).sum();
    let sxx: f64 = deep.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

/// Classifies the small-jump activity of `ν`.
///
/// The Blumenthal–Getoor index is estimated by bisection on `r`: the integral
/// `∫_{δ≤|x|≤1}|x|^r ν(dx)` converges as `δ ↓ 0` iff the annulus masses
/// decay geometrically.  Finite-activity measures have index 0 by definition.
pub fn classify_small_jumps(nu: &LevyMeasure) -> Result<SmallJumpClass> {
    nu.validate()?;
    if nu.finite_activity() {
        return Ok(SmallJumpClass {
            bg_index: 0.0,
            s1_alpha: None,
            s2_alpha: None,
            finite_activity: true,
        });
    }
    let converges = |r: f64| -> Result<bool> { Ok(annulus_log_slope(nu, r)? < 0.0) };
    let (mut lo, mut hi) = (0.0, 2.0);
    if converges(lo)? {
        hi = lo;
    } else if !converges(hi)? {
        return Err(Error::IndeterminateIndex(
            "∫|x|² ν diverges near zero: not a Lévy measure".into(),
        ));
    }
    while hi - lo > BG_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if converges(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(SmallJumpClass {
        bg_index: 0.5 * (lo + hi),
        s1_alpha: nu.s1_alpha(),
        s2_alpha: nu.s2_alpha(),
        finite_activity: false,
    })
}

/// Rows of Table 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Table1Case {
    C1,
    C2,
    C3,
    C4,
}

/// Model features entering the Table-1 selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelClass {
    pub sigma: f64,
    pub small_jump: SmallJumpClass,
}

/// Selected row and parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table1Choice {
    pub case: Table1Case,
    /// Integrability exponent `α` used for the row.
    pub alpha: f64,
    pub r: f64,
    pub theta: f64,
}

/// Default slack for open parameter ranges.
pub const TABLE1_SLACK: f64 = 0.05;

/// Chooses the Table-1 row and a concrete `(r, θ)`: infimum plus slack for
/// open `r` ranges, supremum minus slack for open `θ` ranges, and the exact
/// value for closed ones.
pub fn table1_parameters(model: &ModelClass, payoff: &Payoff, slack: f64) -> Result<Table1Choice> {
    let eta = payoff.holder_eta;
    let (floor, attained) = model.small_jump.integrability_floor();
    let inside_up = |lo: f64, hi: f64| {
        // a point strictly above `lo` and at most `hi`
        if lo + slack <= hi {
            lo + slack
        } else {
            0.5 * (lo + hi)
        }
    };
    let inside_down = |sup: f64| if sup - slack > 0.0 { sup - slack } else { 0.5 * sup };

    // smallest admissible α ≥ 1 with ∫|x|^α ν < ∞, and whether it is closed
    let alpha_min = if floor < 1.0 || (floor == 1.0 && attained) {
        (1.0, true)
    } else {
        (floor, attained)
    };

    if model.sigma > 0.0 {
        if !(eta > 0.0) {
            return Err(Error::NoApplicableCase(
                "σ > 0 requires η ∈ (0, 1] (row C1)".into(),
            ));
        }
        if alpha_min.0 > 2.0 || (alpha_min.0 == 2.0 && !alpha_min.1) {
            return Err(Error::NoApplicableCase("no α ∈ [1, 2] is integrable".into()));
        }
        let alpha = if alpha_min.1 {
            alpha_min.0
        } else {
            inside_up(alpha_min.0, 2.0)
        };
        let theta = if eta == 1.0 { 1.0 } else { inside_down(eta) };
        return Ok(Table1Choice {
            case: Table1Case::C1,
            alpha,
            r: alpha,
            theta,
        });
    }

    // σ = 0: row C2 needs an integrable α ∈ [1, 1 + η]
    let c2_alpha = if alpha_min.1 {
        (alpha_min.0 <= 1.0 + eta).then_some(alpha_min.0)
    } else {
        (alpha_min.0 < 1.0 + eta).then(|| inside_up(alpha_min.0, 1.0 + eta))
    };
    if let Some(alpha) = c2_alpha {
        return Ok(Table1Choice {
            case: Table1Case::C2,
            alpha,
            r: alpha,
            theta: 1.0,
        });
    }
    if eta < 1.0 {
        let rows = [
            (Table1Case::C3, model.small_jump.s1_alpha, true),
            (
                Table1Case::C4,
                model.small_jump.s2_alpha,
                payoff
                    .sobolev_q
                    .is_some_and(|q| (q - 1.0 / (1.0 - eta)).abs() < 1e-9),
            ),
        ];
        for (case, alpha, regular) in rows {
            let Some(alpha) = alpha else { continue };
            if regular && alpha >= 1.0 + eta && alpha < 2.0 {
                let theta_sup = 2.0 * (1.0 + eta) / alpha - 1.0;
                return Ok(Table1Choice {
                    case,
                    alpha,
                    r: inside_up(alpha, 2.0),
                    theta: inside_down(theta_sup),
                });
            }
        }
    }
    Err(Error::NoApplicableCase(format!(
        "σ = 0, η = {eta}, small-jump index {} fits no row",
        alpha_min.0
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cgmy(y: f64) -> LevyMeasure {
        LevyMeasure::Cgmy {
            c: 0.1,
            g: 5.0,
            m: 5.0,
            y,
        }
    }

    #[test]
    fn cgmy_index_recovered() {
        let c = classify_small_jumps(&cgmy(1.2)).unwrap();
        assert!((1.1..=1.3).contains(&c.bg_index), "{}", c.bg_index);
        assert_eq!(c.s1_alpha, Some(1.2));
    }

    #[test]
    fn nig_and_merton() {
        let nig = LevyMeasure::Nig {
            alpha: 10.0,
            beta: 1.0,
            delta: 0.5,
        };
        let c = classify_small_jumps(&nig).unwrap();
        assert_eq!(c.s1_alpha, Some(1.0));
        assert!((c.bg_index - 1.0).abs() < 0.1);
        let m = classify_small_jumps(&LevyMeasure::Merton {
            lambda: 1.0,
            mu_j: 0.0,
            sigma_j: 0.1,
        })
        .unwrap();
        assert_eq!(m.bg_index, 0.0);
        assert!(m.s1_alpha.is_none() && m.s2_alpha.is_none());
    }

    fn finite() -> SmallJumpClass {
        SmallJumpClass {
            bg_index: 0.0,
            s1_alpha: None,
            s2_alpha: None,
            finite_activity: true,
        }
    }

    #[test]
    fn table1_rows() {
        let c1 = table1_parameters(
            &ModelClass {
                sigma: 0.2,
                small_jump: finite(),
            },
            &Payoff::call(1.0),
            TABLE1_SLACK,
        )
        .unwrap();
        assert_eq!((c1.case, c1.r, c1.theta), (Table1Case::C1, 1.0, 1.0));

        let c2 = table1_parameters(
            &ModelClass {
                sigma: 0.0,
                small_jump: finite(),
            },
            &Payoff::binary(1.0),
            TABLE1_SLACK,
        )
        .unwrap();
        assert_eq!((c2.case, c2.r, c2.theta), (Table1Case::C2, 1.0, 1.0));

        let stable = SmallJumpClass {
            bg_index: 1.5,
            s1_alpha: Some(1.5),
            s2_alpha: Some(1.5),
            finite_activity: false,
        };
        let c3 = table1_parameters(
            &ModelClass {
                sigma: 0.0,
                small_jump: stable,
            },
            &Payoff::binary(1.0),
            TABLE1_SLACK,
        )
        .unwrap();
        assert_eq!(c3.case, Table1Case::C3);
        assert!(c3.r > 1.5 && c3.r <= 2.0);
        assert!(c3.theta > 0.0 && c3.theta < 1.0 / 3.0);
    }

    #[test]
    fn no_row_for_binary_with_diffusion() {
        let r = table1_parameters(
            &ModelClass {
                sigma: 0.2,
                small_jump: finite(),
            },
            &Payoff::binary(1.0),
            TABLE1_SLACK,
        );
        assert!(matches!(r, Err(Error::NoApplicableCase(_))));
    }
}
