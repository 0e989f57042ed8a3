//! Lévy measures.
//!
//! A [`LevyMeasure`] is either one of the parametric families (compound
//! Poisson, Merton, Kou, CGMY, NIG), a user supplied density, or a measure
//! derived from another one: the density reweighting `(1 - c (e^x - 1)) ν(dx)`
//! used by the minimal martingale measure, and image measures under the jump
//! maps `x ↦ e^x - 1`, `x ↦ ln(1 + x)` and `x ↦ k x`.
//!
//! All functionals are integrals against the measure and go through
//! [`LevyMeasure::integrate`], which sums atoms and runs adaptive quadrature on
//! the absolutely continuous part split at `0` and `±1`.  Closed forms of the
//! cumulant-type transform `κ` live in [`Kappa`].

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::quad::{integrate, integrate_pieces, QuadOptions, QuadResult, QuadValue};
use crate::special::{bessel_k_scaled, exp_remainder1, norm_cdf, norm_pdf};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Distribution of the jump sizes of a compound Poisson process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    /// Finitely many jump sizes with the given probabilities.
    Atoms { sizes: Vec<f64>, probs: Vec<f64> },
    /// Jump sizes uniform on `[lo, hi]`.
    Uniform { lo: f64, hi: f64 },
}

/// Declared behaviour of a custom density in one tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decay", rename_all = "snake_case")]
pub enum TailDecay {
    /// The support ends before this side becomes relevant.
    Bounded,
    /// The density decays like `exp(-rate |x|)` (up to polynomial factors).
    Exponential { rate: f64 },
    /// The density decays like `|x|^(-exponent)`.
    Polynomial { exponent: f64 },
}

/// Density type used by [`CustomMeasure`].
pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A Lévy measure given by a density together with declared metadata.
///
/// Integrability of exponential moments cannot be decided reliably from
/// samples of a density, so the tail behaviour is declared by the user and
/// spot-checked by [`CustomMeasure::validate`].
#[derive(Clone)]
pub struct CustomMeasure {
    pub density: DensityFn,
    /// Closed support interval `[lo, hi]` (either end may be infinite).
    pub support: (f64, f64),
    pub left_tail: TailDecay,
    pub right_tail: TailDecay,
    /// Declared Blumenthal–Getoor index; `0` for finite activity.
    pub bg_index: f64,
    /// Whether `ν(R) < ∞`.
    pub finite_activity: bool,
    pub s1_alpha: Option<f64>,
    pub s2_alpha: Option<f64>,
    /// Allow path simulation through a tabulated inverse distribution function.
    pub tabulated_sampler: bool,
}

impl fmt::Debug for CustomMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomMeasure")
            .field("support", &self.support)
            .field("left_tail", &self.left_tail)
            .field("right_tail", &self.right_tail)
            .field("bg_index", &self.bg_index)
            .finish_non_exhaustive()
    }
}

impl PartialEq for CustomMeasure {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.density, &other.density)
            && self.support == other.support
            && self.left_tail == other.left_tail
            && self.right_tail == other.right_tail
    }
}

impl CustomMeasure {
    /// Spot-checks the declared tail decay at 20 log-spaced points per tail and
    /// the Lévy integrability condition `∫ (x² ∧ 1) ν(dx) < ∞`.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.support;
        if !(lo < hi) || lo > 0.0 && hi < 0.0 {
            return Err(Error::invalid("custom measure: empty support"));
        }
        for (sign, tail, edge) in [(1.0, self.right_tail, hi), (-1.0, self.left_tail, lo)] {
            if edge.is_finite() {
                continue;
            }
            let declared = match tail {
                TailDecay::Bounded => {
                    return Err(Error::invalid(
                        "custom measure: unbounded support declared with a bounded tail",
                    ))
                }
                TailDecay::Exponential { rate } => (rate, true),
                TailDecay::Polynomial { exponent } => (exponent, false),
            };
            let pts: Vec<f64> = (0..20)
                .map(|k| 2.0 * 10f64.powf(k as f64 * 1.5 / 19.0))
                .collect();
            let vals: Vec<f64> = pts.iter().map(|&x| (self.density)(sign * x)).collect();
            for w in 0..19 {
                let (a, b) = (vals[w], vals[w + 1]);
                if a <= 0.0 || b <= 0.0 {
                    continue;
                }
                let observed = if declared.1 {
                    -(b.ln() - a.ln()) / (pts[w + 1] - pts[w])
                } else {
                    -(b.ln() - a.ln()) / (pts[w + 1].ln() - pts[w].ln())
                };
                if observed < 0.9 * declared.0 - 1e-9 && w >= 10 {
                    return Err(Error::invalid(format!(
                        "custom measure: declared tail decay {} not met (observed {observed:.3} near |x| = {:.2})",
                        declared.0,
                        pts[w]
                    )));
                }
            }
        }
        let density = self.density.clone();
        let r = integrate_pieces(
            move |x: f64| (x * x).min(1.0) * density(x),
            lo,
            hi,
            &[-1.0, 0.0, 1.0],
            &QuadOptions::with_tol(1e-10, 1e-8),
        );
        if !r.value.is_finite() || r.value < 0.0 {
            return Err(Error::invalid(
                "custom measure: ∫(x² ∧ 1) ν(dx) is not finite",
            ));
        }
        Ok(())
    }
}

/// Maps applied to jump sizes when forming image measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", content = "k", rename_all = "snake_case")]
pub enum JumpMap {
    /// `x ↦ e^x - 1`.
    ExpM1,
    /// `x ↦ ln(1 + x)`.
    Log1p,
    /// `x ↦ k x`.
    Scale(f64),
}

impl JumpMap {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            JumpMap::ExpM1 => x.exp_m1(),
            JumpMap::Log1p => x.ln_1p(),
            JumpMap::Scale(k) => k * x,
        }
    }

    pub fn inverse(&self, y: f64) -> f64 {
        match *self {
            JumpMap::ExpM1 => y.ln_1p(),
            JumpMap::Log1p => y.exp_m1(),
            JumpMap::Scale(k) => y / k,
        }
    }

    pub fn increasing(&self) -> bool {
        match *self {
            JumpMap::Scale(k) => k > 0.0,
            _ => true,
        }
    }

    fn cancels(&self, next: &JumpMap) -> bool {
        matches!(
            (self, next),
            (JumpMap::ExpM1, JumpMap::Log1p) | (JumpMap::Log1p, JumpMap::ExpM1)
        )
    }

    /// Maps a closed interval, swapping ends for decreasing maps.
    fn apply_interval(&self, (lo, hi): (f64, f64)) -> (f64, f64) {
        let guard = |x: f64| match self {
            JumpMap::Log1p if x <= -1.0 => f64::NEG_INFINITY,
            _ => self.apply(x),
        };
        let (a, b) = (guard(lo), guard(hi));
        if self.increasing() {
            (a, b)
        } else {
            (b, a)
        }
    }
}

/// Composition of jump maps, applied left to right.
pub fn apply_maps(maps: &[JumpMap], x: f64) -> f64 {
    maps.iter().fold(x, |acc, m| m.apply(acc))
}

/// Inverse of [`apply_maps`]; `None` when `y` is outside the range.
pub fn invert_maps(maps: &[JumpMap], y: f64) -> Option<f64> {
    let mut v = y;
    for m in maps.iter().rev() {
        match m {
            JumpMap::ExpM1 if v <= -1.0 => return None,
            JumpMap::Log1p if !v.is_finite() => return None,
            _ => {}
        }
        v = m.inverse(v);
        if v.is_nan() {
            return None;
        }
    }
    Some(v)
}

/// Bound on the admissible exponents `p` of `∫_{|x|>1} e^{px} ν(dx) < ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentBound {
    Unbounded,
    Inclusive(f64),
    Exclusive(f64),
}

impl MomentBound {
    fn shift(self, d: f64) -> Self {
        match self {
            MomentBound::Unbounded => MomentBound::Unbounded,
            MomentBound::Inclusive(x) => MomentBound::Inclusive(x + d),
            MomentBound::Exclusive(x) => MomentBound::Exclusive(x + d),
        }
    }

    fn scale(self, k: f64) -> Self {
        match self {
            MomentBound::Unbounded => MomentBound::Unbounded,
            MomentBound::Inclusive(x) => MomentBound::Inclusive(x * k),
            MomentBound::Exclusive(x) => MomentBound::Exclusive(x * k),
        }
    }

    fn allows_upper(self, p: f64) -> bool {
        match self {
            MomentBound::Unbounded => true,
            MomentBound::Inclusive(x) => p <= x,
            MomentBound::Exclusive(x) => p < x,
        }
    }

    fn allows_lower(self, p: f64) -> bool {
        match self {
            MomentBound::Unbounded => true,
            MomentBound::Inclusive(x) => p >= x,
            MomentBound::Exclusive(x) => p > x,
        }
    }
}

/// The exponential moment strip `{p : ∫_{|x|>1} e^{px} ν(dx) < ∞}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStrip {
    pub lower: MomentBound,
    pub upper: MomentBound,
}

impl MomentStrip {
    pub const ALL: MomentStrip = MomentStrip {
        lower: MomentBound::Unbounded,
        upper: MomentBound::Unbounded,
    };

    pub fn contains(&self, p: f64) -> bool {
        if p > 0.0 {
            self.upper.allows_upper(p)
        } else if p < 0.0 {
            self.lower.allows_lower(p)
        } else {
            true
        }
    }
}

/// A Lévy measure on `R \ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "snake_case")]
pub enum LevyMeasure {
    Zero,
    CompoundPoisson {
        intensity: f64,
        jump_law: JumpLaw,
    },
    /// Normal jumps `N(mu_j, sigma_j²)` at rate `lambda`.
    Merton {
        lambda: f64,
        mu_j: f64,
        sigma_j: f64,
    },
    /// Double exponential jumps: up with probability `p` and rate `eta_plus`.
    Kou {
        lambda: f64,
        p: f64,
        eta_plus: f64,
        eta_minus: f64,
    },
    /// `C e^{-G|x|} |x|^{-1-Y}` for `x < 0` and `C e^{-Mx} x^{-1-Y}` for `x > 0`.
    Cgmy { c: f64, g: f64, m: f64, y: f64 },
    /// Normal inverse Gaussian measure `(δα/π) e^{βx} K_1(α|x|)/|x|`.
    Nig { alpha: f64, beta: f64, delta: f64 },
    #[serde(skip)]
    Custom(CustomMeasure),
    /// `(1 - c (e^x - 1)) base(dx)`.
    Reweighted { base: Box<LevyMeasure>, c: f64 },
    /// Image of `base` under the composition of `maps`.
    Image {
        base: Box<LevyMeasure>,
        maps: Vec<JumpMap>,
    },
}

fn default_opts() -> QuadOptions {
    QuadOptions::with_tol(1e-14, 1e-12)
}

impl LevyMeasure {
    /// Checks the parameter ranges of the family.
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite")))
            }
        };
        match self {
            LevyMeasure::Zero => Ok(()),
            LevyMeasure::CompoundPoisson {
                intensity,
                jump_law,
            } => {
                pos(*intensity, "intensity")?;
                match jump_law {
                    JumpLaw::Atoms { sizes, probs } => {
                        if sizes.is_empty() || sizes.len() != probs.len() {
                            return Err(Error::invalid("atoms: sizes and probs must match"));
                        }
                        if sizes.iter().any(|&x| x == 0.0 || !x.is_finite()) {
                            return Err(Error::invalid("atoms: jump sizes must be finite and nonzero"));
                        }
                        if probs.iter().any(|&p| !(p >= 0.0)) {
                            return Err(Error::invalid("atoms: probabilities must be nonnegative"));
                        }
                        let s: f64 = probs.iter().sum();
                        if (s - 1.0).abs() > 1e-12 {
                            return Err(Error::invalid("atoms: probabilities must sum to 1"));
                        }
                        Ok(())
                    }
                    JumpLaw::Uniform { lo, hi } => {
                        if lo < hi && lo.is_finite() && hi.is_finite() {
                            Ok(())
                        } else {
                            Err(Error::invalid("uniform jumps: need lo < hi"))
                        }
                    }
                }
            }
            LevyMeasure::Merton {
                lambda, sigma_j, mu_j,
            } => {
                pos(*lambda, "lambda")?;
                pos(*sigma_j, "sigma_j")?;
                if mu_j.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("mu_j must be finite"))
                }
            }
            LevyMeasure::Kou {
                lambda,
                p,
                eta_plus,
                eta_minus,
            } => {
                pos(*lambda, "lambda")?;
                pos(*eta_minus, "eta_minus")?;
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid("Kou: p must lie in [0, 1]"));
                }
                if !(*eta_plus > 1.0) {
                    return Err(Error::invalid("Kou: eta_plus must exceed 1"));
                }
                Ok(())
            }
            LevyMeasure::Cgmy { c, g, m, y } => {
                pos(*c, "C")?;
                pos(*g, "G")?;
                pos(*m, "M")?;
                if *y > 0.0 && *y < 2.0 {
                    Ok(())
                } else {
                    Err(Error::invalid("CGMY: Y must lie in (0, 2)"))
                }
            }
            LevyMeasure::Nig { alpha, beta, delta } => {
                pos(*alpha, "alpha")?;
                pos(*delta, "delta")?;
                if beta.abs() < *alpha {
                    Ok(())
                } else {
                    Err(Error::invalid("NIG: need |beta| < alpha"))
                }
            }
            LevyMeasure::Custom(c) => c.validate(),
            LevyMeasure::Reweighted { base, c } => {
                base.validate()?;
                if !c.is_finite() {
                    return Err(Error::invalid("reweighting coefficient must be finite"));
                }
                Ok(())
            }
            LevyMeasure::Image { base, maps } => {
                base.validate()?;
                if maps.iter().any(|m| matches!(m, JumpMap::Scale(k) if *k == 0.0 || !k.is_finite())) {
                    return Err(Error::invalid("image: scale factors must be finite and nonzero"));
                }
                Ok(())
            }
        }
    }

    /// Reweighted measure `(1 - c(e^x - 1)) ν(dx)`; the zero measure and `c = 0`
    /// are returned unchanged.
    pub fn reweighted(&self, c: f64) -> LevyMeasure {
        if c == 0.0 || self.is_zero() {
            return self.clone();
        }
        LevyMeasure::Reweighted {
            base: Box::new(self.clone()),
            c,
        }
    }

    /// Image measure under `maps`.  Adjacent `ExpM1`/`Log1p` pairs cancel, so
    /// round trips return the original measure exactly; atoms and the zero
    /// measure are mapped directly.
    pub fn image(&self, maps: &[JumpMap]) -> LevyMeasure {
        let (base, mut all) = match self {
            LevyMeasure::Image { base, maps: inner } => ((**base).clone(), inner.clone()),
            other => (other.clone(), Vec::new()),
        };
        for m in maps {
            match all.last() {
                Some(last) if last.cancels(m) => {
                    all.pop();
                }
                Some(JumpMap::Scale(k)) if matches!(m, JumpMap::Scale(_)) => {
                    let JumpMap::Scale(k2) = m else { unreachable!() };
                    let prod = k * k2;
                    all.pop();
                    if prod != 1.0 {
                        all.push(JumpMap::Scale(prod));
                    }
                }
                _ => all.push(*m),
            }
        }
        if all.is_empty() {
            return base;
        }
        match &base {
            LevyMeasure::Zero => LevyMeasure::Zero,
            LevyMeasure::CompoundPoisson {
                intensity,
                jump_law: JumpLaw::Atoms { sizes, probs },
            } => {
                let mapped: Vec<f64> = sizes.iter().map(|&x| apply_maps(&all, x)).collect();
                if mapped.iter().all(|x| x.is_finite() && *x != 0.0) {
                    LevyMeasure::CompoundPoisson {
                        intensity: *intensity,
                        jump_law: JumpLaw::Atoms {
                            sizes: mapped,
                            probs: probs.clone(),
                        },
                    }
                } else {
                    LevyMeasure::Image {
                        base: Box::new(base.clone()),
                        maps: all,
                    }
                }
            }
            _ => LevyMeasure::Image {
                base: Box::new(base.clone()),
                maps: all,
            },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            LevyMeasure::Zero => true,
            LevyMeasure::Reweighted { base, .. } | LevyMeasure::Image { base, .. } => base.is_zero(),
            _ => false,
        }
    }

    /// Whether `ν(R) < ∞`.
    pub fn finite_activity(&self) -> bool {
        match self {
            LevyMeasure::Zero
            | LevyMeasure::CompoundPoisson { .. }
            | LevyMeasure::Merton { .. }
            | LevyMeasure::Kou { .. } => true,
            LevyMeasure::Cgmy { .. } | LevyMeasure::Nig { .. } => false,
            LevyMeasure::Custom(c) => c.finite_activity,
            LevyMeasure::Reweighted { base, .. } | LevyMeasure::Image { base, .. } => {
                base.finite_activity()
            }
        }
    }

    /// Total mass `ν(R)`, infinite for infinite-activity measures.
    pub fn total_mass(&self) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::CompoundPoisson { intensity, .. } => *intensity,
            LevyMeasure::Merton { lambda, .. } | LevyMeasure::Kou { lambda, .. } => *lambda,
            LevyMeasure::Image { base, .. } => base.total_mass(),
            m if !m.finite_activity() => f64::INFINITY,
            m => m.integrate(&|_| 1.0, &[], &default_opts()).value,
        }
    }

    /// Closed support `[lo, hi]`; `(0, 0)` for the zero measure.
    pub fn support(&self) -> (f64, f64) {
        match self {
            LevyMeasure::Zero => (0.0, 0.0),
            LevyMeasure::CompoundPoisson { jump_law, .. } => match jump_law {
                JumpLaw::Atoms { sizes, probs } => {
                    let live = sizes.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(x, _)| *x);
                    let lo = live.clone().fold(f64::INFINITY, f64::min);
                    let hi = live.fold(f64::NEG_INFINITY, f64::max);
                    (lo, hi)
                }
                JumpLaw::Uniform { lo, hi } => (*lo, *hi),
            },
            LevyMeasure::Merton { .. } | LevyMeasure::Nig { .. } => {
                (f64::NEG_INFINITY, f64::INFINITY)
            }
            LevyMeasure::Kou { p, .. } => {
                let lo = if *p < 1.0 { f64::NEG_INFINITY } else { 0.0 };
                let hi = if *p > 0.0 { f64::INFINITY } else { 0.0 };
                (lo, hi)
            }
            LevyMeasure::Cgmy { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            LevyMeasure::Custom(c) => c.support,
            LevyMeasure::Reweighted { base, .. } => base.support(),
            LevyMeasure::Image { base, maps } => maps
                .iter()
                .fold(base.support(), |acc, m| m.apply_interval(acc)),
        }
    }

    /// Point masses `(position, mass)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            LevyMeasure::CompoundPoisson {
                intensity,
                jump_law: JumpLaw::Atoms { sizes, probs },
            } => sizes
                .iter()
                .zip(probs)
                .filter(|(_, p)| **p > 0.0)
                .map(|(x, p)| (*x, intensity * p))
                .collect(),
            LevyMeasure::Reweighted { base, c } => base
                .atoms()
                .into_iter()
                .map(|(x, w)| (x, w * (1.0 - c * x.exp_m1())))
                .collect(),
            LevyMeasure::Image { base, maps } => base
                .atoms()
                .into_iter()
                .map(|(x, w)| (apply_maps(maps, x), w))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Density of the absolutely continuous part at `x` (`x ≠ 0`).
    pub fn density(&self, x: f64) -> f64 {
        match self {
            LevyMeasure::Zero => 0.0,
            LevyMeasure::CompoundPoisson { intensity, jump_law } => match jump_law {
                JumpLaw::Atoms { .. } => 0.0,
                JumpLaw::Uniform { lo, hi } => {
                    if x >= *lo && x <= *hi {
                        intensity / (hi - lo)
                    } else {
                        0.0
                    }
                }
            },
            LevyMeasure::Merton {
                lambda,
                mu_j,
                sigma_j,
            } => lambda * norm_pdf((x - mu_j) / sigma_j) / sigma_j,
            LevyMeasure::Kou {
                lambda,
                p,
                eta_plus,
                eta_minus,
            } => {
                if x > 0.0 {
                    lambda * p * eta_plus * (-eta_plus * x).exp()
                } else if x < 0.0 {
                    lambda * (1.0 - p) * eta_minus * (eta_minus * x).exp()
                } else {
                    0.0
                }
            }
            LevyMeasure::Cgmy { c, g, m, y } => {
                if x > 0.0 {
                    c * (-m * x).exp() * x.powf(-1.0 - y)
                } else if x < 0.0 {
                    c * (g * x).exp() * (-x).powf(-1.0 - y)
                } else {
                    0.0
                }
            }
            LevyMeasure::Nig { alpha, beta, delta } => {
                if x == 0.0 {
                    return 0.0;
                }
                let ax = alpha * x.abs();
                delta * alpha / std::f64::consts::PI
                    * (beta * x - ax).exp()
                    * bessel_k_scaled(1.0, ax)
                    / x.abs()
            }
            LevyMeasure::Custom(cm) => {
                if x >= cm.support.0 && x <= cm.support.1 {
                    (cm.density)(x).max(0.0)
                } else {
                    0.0
                }
            }
            LevyMeasure::Reweighted { base, c } => (1.0 - c * x.exp_m1()) * base.density(x),
            LevyMeasure::Image { base, maps } => {
                let Some(x0) = invert_maps(maps, x) else {
                    return 0.0;
                };
                // derivative of the inverse map by the chain rule
                let mut v = x0;
                let mut deriv = 1.0;
                for m in maps {
                    deriv *= match m {
                        JumpMap::ExpM1 => v.exp(),
                        JumpMap::Log1p => 1.0 / (1.0 + v),
                        JumpMap::Scale(k) => *k,
                    };
                    v = m.apply(v);
                }
                base.density(x0) / deriv.abs()
            }
        }
    }

    /// Interior points where the density or the measure structure has kinks.
    fn structural_breaks(&self) -> Vec<f64> {
        match self {
            LevyMeasure::CompoundPoisson {
                jump_law: JumpLaw::Uniform { lo, hi },
                ..
            } => vec![*lo, *hi],
            LevyMeasure::Merton { mu_j, .. } => vec![*mu_j],
            _ => Vec::new(),
        }
    }

    /// `∫ f dν` over the whole line, with extra breakpoints for the
    /// continuous part.
    pub fn integrate<T: QuadValue>(
        &self,
        f: &(dyn Fn(f64) -> T + Sync),
        breaks: &[f64],
        opts: &QuadOptions,
    ) -> QuadResult<T> {
        self.integrate_over(f, f64::NEG_INFINITY, f64::INFINITY, breaks, opts)
    }

    /// `∫_{[a, b]} f dν` (atoms at the endpoints included).
    pub fn integrate_over<T: QuadValue>(
        &self,
        f: &(dyn Fn(f64) -> T + Sync),
        a: f64,
        b: f64,
        breaks: &[f64],
        opts: &QuadOptions,
    ) -> QuadResult<T> {
        let exact = |value: T| QuadResult {
            value,
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
        match self {
            LevyMeasure::Zero => exact(T::zero()),
            LevyMeasure::CompoundPoisson {
                jump_law: JumpLaw::Atoms { .. },
                ..
            } => {
                let mut s = T::zero();
                for (x, w) in self.atoms() {
                    if x >= a && x <= b {
                        s = s + f(x) * w;
                    }
                }
                exact(s)
            }
            LevyMeasure::Reweighted { base, c } => {
                let c = *c;
                base.integrate_over(&|x| f(x) * (1.0 - c * x.exp_m1()), a, b, breaks, opts)
            }
            LevyMeasure::Image { base, maps } => {
                let mut pre: Vec<f64> = breaks
                    .iter()
                    .chain([-1.0, 0.0, 1.0].iter())
                    .filter_map(|&y| invert_maps(maps, y))
                    .collect();
                let (mut lo, mut hi) = (
                    invert_maps(maps, a).unwrap_or(f64::NEG_INFINITY),
                    invert_maps(maps, b).unwrap_or(f64::INFINITY),
                );
                if a == f64::NEG_INFINITY {
                    lo = f64::NEG_INFINITY;
                }
                if b == f64::INFINITY {
                    hi = f64::INFINITY;
                }
                let decreasing = maps.iter().filter(|m| !m.increasing()).count() % 2 == 1;
                if decreasing {
                    if a == f64::NEG_INFINITY {
                        hi = f64::INFINITY;
                    } else {
                        hi = invert_maps(maps, a).unwrap_or(f64::INFINITY);
                    }
                    lo = if b == f64::INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        invert_maps(maps, b).unwrap_or(f64::NEG_INFINITY)
                    };
                }
                pre.retain(|x| x.is_finite());
                base.integrate_over(&|x| f(apply_maps(maps, x)), lo, hi, &pre, opts)
            }
            _ => {
                let (slo, shi) = self.support();
                let lo = slo.max(a);
                let hi = shi.min(b);
                if !(lo < hi) {
                    return exact(T::zero());
                }
                let mut pts: Vec<f64> = vec![-1.0, 0.0, 1.0];
                pts.extend_from_slice(breaks);
                pts.extend(self.structural_breaks());
                // keep tails of light-tailed densities from being lost on huge intervals
                for s in [-8.0, -3.0, 3.0, 8.0] {
                    pts.push(s * self.tail_scale());
                }
                integrate_pieces(
                    |x: f64| {
                        let d = self.density(x);
                        if d == 0.0 {
                            T::zero()
                        } else {
                            f(x) * d
                        }
                    },
                    lo,
                    hi,
                    &pts,
                    opts,
                )
            }
        }
    }

    fn tail_scale(&self) -> f64 {
        match self {
            LevyMeasure::Merton { mu_j, sigma_j, .. } => mu_j.abs() + sigma_j,
            LevyMeasure::Kou {
                eta_plus,
                eta_minus,
                ..
            } => 1.0 / eta_plus.min(*eta_minus),
            LevyMeasure::Cgmy { g, m, .. } => 1.0 / g.min(*m),
            LevyMeasure::Nig { alpha, beta, .. } => 1.0 / (alpha - beta.abs()),
            _ => 1.0,
        }
    }

    /// The exponential moment strip, decided analytically from the family
    /// (declared tails for custom densities).
    pub fn moment_strip(&self) -> MomentStrip {
        let (lo, hi) = self.support();
        let bounded = |strip: MomentStrip| MomentStrip {
            lower: if lo.is_finite() { MomentBound::Unbounded } else { strip.lower },
            upper: if hi.is_finite() { MomentBound::Unbounded } else { strip.upper },
        };
        match self {
            LevyMeasure::Zero
            | LevyMeasure::CompoundPoisson { .. }
            | LevyMeasure::Merton { .. } => MomentStrip::ALL,
            LevyMeasure::Kou {
                eta_plus,
                eta_minus,
                ..
            } => bounded(MomentStrip {
                lower: MomentBound::Exclusive(-eta_minus),
                upper: MomentBound::Exclusive(*eta_plus),
            }),
            LevyMeasure::Cgmy { g, m, .. } => MomentStrip {
                lower: MomentBound::Inclusive(-g),
                upper: MomentBound::Inclusive(*m),
            },
            LevyMeasure::Nig { alpha, beta, .. } => MomentStrip {
                lower: MomentBound::Inclusive(-alpha - beta),
                upper: MomentBound::Inclusive(alpha - beta),
            },
            LevyMeasure::Custom(cm) => {
                let side = |t: TailDecay, sign: f64| match t {
                    TailDecay::Bounded => MomentBound::Unbounded,
                    TailDecay::Exponential { rate } => MomentBound::Exclusive(sign * rate),
                    TailDecay::Polynomial { .. } => MomentBound::Inclusive(0.0),
                };
                bounded(MomentStrip {
                    lower: side(cm.left_tail, -1.0),
                    upper: side(cm.right_tail, 1.0),
                })
            }
            LevyMeasure::Reweighted { base, c } => {
                let s = base.moment_strip();
                if *c == 0.0 {
                    s
                } else {
                    MomentStrip {
                        lower: s.lower,
                        upper: s.upper.shift(-1.0),
                    }
                }
            }
            LevyMeasure::Image { base, maps } => bounded(image_strip(base, maps)),
        }
    }

    /// Whether `∫_{|x|>1} e^{px} ν(dx) < ∞`.
    pub fn exp_moment_finite(&self, p: f64) -> bool {
        self.is_zero() || self.moment_strip().contains(p)
    }

    /// Whether `∫_{|x|≤1} |x|^β ν(dx) < ∞`, decided analytically.
    pub fn small_jump_integrable(&self, beta: f64) -> bool {
        match self.declared_bg_index() {
            None => true,
            Some(bg) => beta > bg,
        }
    }

    /// Analytic Blumenthal–Getoor index for infinite-activity families
    /// (`None` for finite activity).
    pub fn declared_bg_index(&self) -> Option<f64> {
        match self {
            LevyMeasure::Cgmy { y, .. } => Some(*y),
            LevyMeasure::Nig { .. } => Some(1.0),
            LevyMeasure::Custom(c) if !c.finite_activity => Some(c.bg_index),
            LevyMeasure::Reweighted { base, .. } | LevyMeasure::Image { base, .. } => {
                base.declared_bg_index()
            }
            _ => None,
        }
    }

    /// Declared `𝒮₁(α)` membership.
    pub fn s1_alpha(&self) -> Option<f64> {
        match self {
            LevyMeasure::Cgmy { y, .. } => Some(*y),
            LevyMeasure::Nig { .. } => Some(1.0),
            LevyMeasure::Custom(c) => c.s1_alpha,
            LevyMeasure::Reweighted { base, .. } => base.s1_alpha(),
            _ => None,
        }
    }

    /// Declared `𝒮₂(α)` membership (`𝒮₁(α) ⊂ 𝒮₂(α)`).
    pub fn s2_alpha(&self) -> Option<f64> {
        match self {
            LevyMeasure::Custom(c) => c.s2_alpha.or(c.s1_alpha),
            LevyMeasure::Reweighted { base, .. } => base.s2_alpha(),
            m => m.s1_alpha(),
        }
    }

    /// Prepared evaluator of `κ`.
    pub fn kappa_fn(&self) -> Result<Kappa> {
        Kappa::new(self)
    }

    /// `κ(z) = ∫ (e^{izx} - 1 - izx 1{|x|≤1}) ν(dx)`.
    pub fn kappa(&self, z: Complex64) -> Result<Complex64> {
        self.kappa_fn()?.eval(z)
    }

    /// `∫ (e^x - 1)² ν(dx)`.
    pub fn second_moment_of_price_jumps(&self) -> Result<f64> {
        let k = self.kappa_fn()?;
        match k {
            Kappa::Quadrature(_) => self
                .integrate(&|x: f64| x.exp_m1().powi(2), &[], &default_opts())
                .ok_or_fail("∫(e^x-1)² ν"),
            _ => {
                let k1 = k.eval(Complex64::new(0.0, -1.0))?.re;
                let k2 = k.eval(Complex64::new(0.0, -2.0))?.re;
                Ok(k2 - 2.0 * k1)
            }
        }
    }
}

/// Moment strip of an image measure for the map chains used in practice:
/// `e^x - 1` (stochastic exponential jumps), its scalings (the density
/// process `U`) and `ln(1 + k(e^x - 1))` (the exponent `V`).
fn image_strip(base: &LevyMeasure, maps: &[JumpMap]) -> MomentStrip {
    let (blo, bhi) = base.support();
    let bs = base.moment_strip();
    let conservative = MomentStrip {
        lower: MomentBound::Inclusive(0.0),
        upper: MomentBound::Inclusive(0.0),
    };
    match maps {
        [] => bs,
        [JumpMap::Scale(k)] => {
            if *k > 0.0 {
                MomentStrip {
                    lower: bs.lower.scale(1.0 / k),
                    upper: bs.upper.scale(1.0 / k),
                }
            } else {
                MomentStrip {
                    lower: bs.upper.scale(1.0 / k),
                    upper: bs.lower.scale(1.0 / k),
                }
            }
        }
        [JumpMap::ExpM1] => MomentStrip {
            lower: MomentBound::Unbounded,
            upper: if bhi.is_finite() {
                MomentBound::Unbounded
            } else {
                MomentBound::Inclusive(0.0)
            },
        },
        [JumpMap::ExpM1, JumpMap::Scale(k)] => {
            let grows = if bhi.is_finite() {
                MomentBound::Unbounded
            } else {
                MomentBound::Inclusive(0.0)
            };
            if *k > 0.0 {
                MomentStrip {
                    lower: MomentBound::Unbounded,
                    upper: grows,
                }
            } else {
                MomentStrip {
                    lower: grows,
                    upper: MomentBound::Unbounded,
                }
            }
        }
        [JumpMap::ExpM1, JumpMap::Scale(k), JumpMap::Log1p] => {
            // e^{p v} = (1 + k(e^x - 1))^p
            let upper = if bhi.is_finite() {
                MomentBound::Unbounded
            } else if *k > 0.0 {
                bs.upper
            } else {
                return conservative;
            };
            let floor = 1.0 - k;
            let lower = if blo.is_finite() || floor > 0.0 {
                MomentBound::Unbounded
            } else if floor == 0.0 {
                bs.lower
            } else {
                return conservative;
            };
            MomentStrip { lower, upper }
        }
        _ => {
            let (lo, hi) = maps.iter().fold((blo, bhi), |acc, m| m.apply_interval(acc));
            if lo.is_finite() && hi.is_finite() {
                MomentStrip::ALL
            } else {
                conservative
            }
        }
    }
}

/// Truncated mean `E[J 1{|J| ≤ 1}]` of `N(mu, s²)`.
fn normal_truncated_mean(mu: f64, s: f64) -> f64 {
    let a = (-1.0 - mu) / s;
    let b = (1.0 - mu) / s;
    mu * (norm_cdf(b) - norm_cdf(a)) - s * (norm_pdf(b) - norm_pdf(a))
}

/// Prepared evaluator of `κ(z) = ∫ (e^{izx} - 1 - izx 1{|x|≤1}) ν(dx)`.
///
/// Closed forms are used for the parametric families and for reweightings of
/// anything with a prepared evaluator, via
/// `κ_c(z) = κ(z) - c[κ(z - i) - κ(z) - κ(-i) - iz m₁]` with
/// `m₁ = ∫_{|x|≤1} x(e^x - 1) ν(dx)`.
#[derive(Debug, Clone)]
pub enum Kappa {
    Zero,
    Atoms {
        atoms: Vec<(f64, f64)>,
    },
    Uniform {
        intensity: f64,
        lo: f64,
        hi: f64,
        trunc_mean: f64,
    },
    Merton {
        lambda: f64,
        mu: f64,
        s: f64,
        trunc_mean: f64,
    },
    Kou {
        lambda: f64,
        p: f64,
        eta_plus: f64,
        eta_minus: f64,
        trunc_mean: f64,
    },
    Cgmy {
        c: f64,
        g: f64,
        m: f64,
        y: f64,
        gamma_neg_y: f64,
        tail_mean: f64,
    },
    Nig {
        alpha: f64,
        beta: f64,
        delta: f64,
        tail_mean: f64,
    },
    Reweighted {
        base: Box<Kappa>,
        c: f64,
        m1: f64,
        base_at_minus_i: Complex64,
        strip: MomentStrip,
    },
    Quadrature(LevyMeasure),
}

impl Kappa {
    pub fn new(nu: &LevyMeasure) -> Result<Kappa> {
        nu.validate()?;
        let opts = default_opts();
        Ok(match nu {
            LevyMeasure::Zero => Kappa::Zero,
            LevyMeasure::CompoundPoisson { intensity, jump_law } => match jump_law {
                JumpLaw::Atoms { .. } => Kappa::Atoms { atoms: nu.atoms() },
                JumpLaw::Uniform { lo, hi } => {
                    let a = lo.max(-1.0);
                    let b = hi.min(1.0);
                    let trunc_mean = if a < b {
                        0.5 * (b * b - a * a) / (hi - lo)
                    } else {
                        0.0
                    };
                    Kappa::Uniform {
                        intensity: *intensity,
                        lo: *lo,
                        hi: *hi,
                        trunc_mean,
                    }
                }
            },
            LevyMeasure::Merton {
                lambda,
                mu_j,
                sigma_j,
            } => Kappa::Merton {
                lambda: *lambda,
                mu: *mu_j,
                s: *sigma_j,
                trunc_mean: normal_truncated_mean(*mu_j, *sigma_j),
            },
            LevyMeasure::Kou {
                lambda,
                p,
                eta_plus,
                eta_minus,
            } => {
                let part = |eta: f64| (1.0 - (-eta).exp() * (1.0 + eta)) / eta;
                Kappa::Kou {
                    lambda: *lambda,
                    p: *p,
                    eta_plus: *eta_plus,
                    eta_minus: *eta_minus,
                    trunc_mean: p * part(*eta_plus) - (1.0 - p) * part(*eta_minus),
                }
            }
            LevyMeasure::Cgmy { c, g, m, y } => {
                let (c, g, m, y) = (*c, *g, *m, *y);
                let tail = integrate(
                    |x: f64| c * x.powf(-y) * ((-m * x).exp() - (-g * x).exp()),
                    1.0,
                    f64::INFINITY,
                    &opts,
                )
                .ok_or_fail("CGMY tail mean")?;
                Kappa::Cgmy {
                    c,
                    g,
                    m,
                    y,
                    gamma_neg_y: if (y - 1.0).abs() > 1e-12 { gamma(-y) } else { f64::NAN },
                    tail_mean: tail,
                }
            }
            LevyMeasure::Nig { alpha, beta, delta } => {
                let tail = nu
                    .integrate_over(&|x: f64| x, 1.0, f64::INFINITY, &[], &opts)
                    .ok_or_fail("NIG right tail mean")?
                    + nu
                        .integrate_over(&|x: f64| x, f64::NEG_INFINITY, -1.0, &[], &opts)
                        .ok_or_fail("NIG left tail mean")?;
                Kappa::Nig {
                    alpha: *alpha,
                    beta: *beta,
                    delta: *delta,
                    tail_mean: tail,
                }
            }
            LevyMeasure::Reweighted { base, c } => {
                let inner = Kappa::new(base)?;
                if matches!(inner, Kappa::Quadrature(_)) {
                    Kappa::Quadrature(nu.clone())
                } else {
                    let m1 = base
                        .integrate_over(&|x: f64| x * x.exp_m1(), -1.0, 1.0, &[], &opts)
                        .ok_or_fail("∫_{|x|≤1} x(e^x - 1) ν")?;
                    let base_at_minus_i = inner.eval(Complex64::new(0.0, -1.0))?;
                    Kappa::Reweighted {
                        base: Box::new(inner),
                        c: *c,
                        m1,
                        base_at_minus_i,
                        strip: nu.moment_strip(),
                    }
                }
            }
            LevyMeasure::Custom(_) | LevyMeasure::Image { .. } => Kappa::Quadrature(nu.clone()),
        })
    }

    fn strip(&self) -> MomentStrip {
        match self {
            Kappa::Kou {
                eta_plus,
                eta_minus,
                p,
                ..
            } => MomentStrip {
                lower: if *p < 1.0 { MomentBound::Exclusive(-eta_minus) } else { MomentBound::Unbounded },
                upper: if *p > 0.0 { MomentBound::Exclusive(*eta_plus) } else { MomentBound::Unbounded },
            },
            Kappa::Cgmy { g, m, .. } => MomentStrip {
                lower: MomentBound::Inclusive(-g),
                upper: MomentBound::Inclusive(*m),
            },
            Kappa::Nig { alpha, beta, .. } => MomentStrip {
                lower: MomentBound::Inclusive(-alpha - beta),
                upper: MomentBound::Inclusive(alpha - beta),
            },
            Kappa::Reweighted { strip, .. } => *strip,
            Kappa::Quadrature(nu) => nu.moment_strip(),
            _ => MomentStrip::ALL,
        }
    }

    /// Evaluates `κ(z)`; `Im z ≠ 0` requires the matching exponential moment.
    pub fn eval(&self, z: Complex64) -> Result<Complex64> {
        let p = -z.im;
        if !self.strip().contains(p) {
            return Err(Error::DivergentExponentialMoment {
                what: "Lévy measure".into(),
                order: p,
            });
        }
        Ok(self.eval_unchecked(z)?)
    }

    fn eval_unchecked(&self, z: Complex64) -> Result<Complex64> {
        let iz = I * z;
        Ok(match self {
            Kappa::Zero => Complex64::new(0.0, 0.0),
            Kappa::Atoms { atoms } => atoms
                .iter()
                .map(|&(x, w)| {
                    let base = (iz * x).exp() - 1.0;
                    w * if x.abs() <= 1.0 {
                        exp_remainder1(iz * x)
                    } else {
                        base
                    }
                })
                .sum(),
            Kappa::Uniform {
                intensity,
                lo,
                hi,
                trunc_mean,
            } => {
                let cf = if z.norm() * (hi - lo).abs().max(lo.abs()).max(hi.abs()) < 1e-6 {
                    // series of the uniform characteristic function
                    let m1 = 0.5 * (lo + hi);
                    let m2 = (lo * lo + lo * hi + hi * hi) / 3.0;
                    1.0 + iz * m1 + iz * iz * m2 * 0.5
                } else {
                    ((iz * *hi).exp() - (iz * *lo).exp()) / (iz * (hi - lo))
                };
                *intensity * (cf - 1.0 - iz * *trunc_mean)
            }
            Kappa::Merton {
                lambda,
                mu,
                s,
                trunc_mean,
            } => {
                let w = iz * *mu - z * z * (s * s) * 0.5;
                *lambda * (crate::special::exp_m1_complex(w) - iz * *trunc_mean)
            }
            Kappa::Kou {
                lambda,
                p,
                eta_plus,
                eta_minus,
                trunc_mean,
            } => {
                let up = *eta_plus / (*eta_plus - iz);
                let down = *eta_minus / (*eta_minus + iz);
                *lambda * (*p * up + (1.0 - p) * down - 1.0 - iz * *trunc_mean)
            }
            Kappa::Cgmy {
                c,
                g,
                m,
                y,
                gamma_neg_y,
                tail_mean,
            } => {
                let (c, g, m, y) = (*c, *g, *m, *y);
                let full = if (y - 1.0).abs() <= 1e-12 {
                    let mz = Complex64::new(m, 0.0) - iz;
                    let gz = Complex64::new(g, 0.0) + iz;
                    c * (mz * (mz / m).ln() + gz * (gz / g).ln())
                } else {
                    let mz = Complex64::new(m, 0.0) - iz;
                    let gz = Complex64::new(g, 0.0) + iz;
                    let lin = iz * y * (m.powf(y - 1.0) - g.powf(y - 1.0));
                    c * *gamma_neg_y * (mz.powf(y) - m.powf(y) + gz.powf(y) - g.powf(y) + lin)
                };
                full + iz * *tail_mean
            }
            Kappa::Nig {
                alpha,
                beta,
                delta,
                tail_mean,
            } => {
                let g0 = (alpha * alpha - beta * beta).sqrt();
                let bz = Complex64::new(*beta, 0.0) + iz;
                let full = *delta * (g0 - (alpha * alpha - bz * bz).sqrt())
                    - iz * (*delta * *beta / g0);
                full + iz * *tail_mean
            }
            Kappa::Reweighted {
                base,
                c,
                m1,
                base_at_minus_i,
                ..
            } => {
                let k = base.eval_unchecked(z)?;
                let shifted = base.eval_unchecked(z - I)?;
                let j = shifted - k - *base_at_minus_i;
                k - *c * (j - iz * *m1)
            }
            Kappa::Quadrature(nu) => {
                let f = move |x: f64| {
                    if x.abs() <= 1.0 {
                        exp_remainder1(iz * x)
                    } else {
                        (iz * x).exp() - 1.0
                    }
                };
                nu.integrate(&f, &[], &QuadOptions::with_tol(1e-13, 1e-11))
                    .ok_or_fail("κ(z) by quadrature")?
            }
        })
    }

    /// `J(u) = ∫ (e^{iux} - 1)(e^x - 1) ν(dx) = κ(u - i) - κ(u) - κ(-i)`.
    pub fn price_jump_transform(&self, u: Complex64, at_minus_i: Complex64) -> Result<Complex64> {
        Ok(self.eval(u - I)? - self.eval(u)? - at_minus_i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_kappa(nu: &LevyMeasure, z: Complex64) -> Complex64 {
        Kappa::Quadrature(nu.clone()).eval(z).unwrap()
    }

    fn families() -> Vec<LevyMeasure> {
        vec![
            LevyMeasure::Merton {
                lambda: 0.5,
                mu_j: -0.1,
                sigma_j: 0.2,
            },
            LevyMeasure::Kou {
                lambda: 1.2,
                p: 0.4,
                eta_plus: 12.0,
                eta_minus: 7.0,
            },
            LevyMeasure::Cgmy {
                c: 0.3,
                g: 4.0,
                m: 6.0,
                y: 1.5,
            },
            LevyMeasure::Cgmy {
                c: 0.5,
                g: 3.0,
                m: 5.0,
                y: 0.5,
            },
            LevyMeasure::Cgmy {
                c: 0.2,
                g: 5.0,
                m: 5.0,
                y: 1.0,
            },
            LevyMeasure::Nig {
                alpha: 8.0,
                beta: -2.0,
                delta: 0.4,
            },
            LevyMeasure::CompoundPoisson {
                intensity: 2.0,
                jump_law: JumpLaw::Uniform { lo: -1.5, hi: 0.7 },
            },
            LevyMeasure::CompoundPoisson {
                intensity: 1.0,
                jump_law: JumpLaw::Atoms {
                    sizes: vec![-0.3, 1.4],
                    probs: vec![0.75, 0.25],
                },
            },
        ]
    }

    #[test]
    fn closed_forms_agree_with_quadrature() {
        let zs = [
            Complex64::new(1.0, 0.0),
            Complex64::new(-3.5, 0.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.0, -2.0),
            Complex64::new(2.0, -1.0),
            Complex64::new(0.7, 0.5),
        ];
        for nu in families() {
            let k = nu.kappa_fn().unwrap();
            for z in zs {
                let a = k.eval(z).unwrap();
                let b = quad_kappa(&nu, z);
                let scale = a.norm().max(1e-3);
                assert!(
                    (a - b).norm() / scale < 1e-7,
                    "{nu:?} at {z}: closed {a} vs quadrature {b}"
                );
            }
        }
    }

    #[test]
    fn reweighted_closed_form_agrees_with_quadrature() {
        for nu in families() {
            let rw = nu.reweighted(-0.3);
            let k = rw.kappa_fn().unwrap();
            for z in [Complex64::new(1.3, 0.0), Complex64::new(0.0, -1.0), Complex64::new(-2.0, -0.5)] {
                let a = k.eval(z).unwrap();
                let b = quad_kappa(&rw, z);
                assert!((a - b).norm() / a.norm().max(1e-3) < 1e-7, "{nu:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn merton_total_mass_and_truncated_mean() {
        let nu = LevyMeasure::Merton {
            lambda: 0.5,
            mu_j: -0.1,
            sigma_j: 0.2,
        };
        let mass = nu.integrate(&|_| 1.0, &[], &default_opts()).value;
        assert!((mass - 0.5).abs() < 1e-12);
        let tm = nu.integrate_over(&|x| x, -1.0, 1.0, &[], &default_opts()).value;
        assert!((tm - 0.5 * normal_truncated_mean(-0.1, 0.2)).abs() < 1e-13);
    }

    #[test]
    fn moment_strips() {
        let kou = LevyMeasure::Kou {
            lambda: 1.0,
            p: 0.5,
            eta_plus: 3.0,
            eta_minus: 2.0,
        };
        assert!(kou.exp_moment_finite(2.9));
        assert!(!kou.exp_moment_finite(3.0));
        assert!(!kou.exp_moment_finite(-2.0));
        let cgmy = LevyMeasure::Cgmy {
            c: 1.0,
            g: 2.0,
            m: 3.0,
            y: 0.5,
        };
        assert!(cgmy.exp_moment_finite(3.0));
        assert!(!cgmy.exp_moment_finite(3.01));
        assert!(!cgmy.reweighted(0.1).exp_moment_finite(2.5));
        assert!(cgmy.reweighted(0.1).exp_moment_finite(2.0));
        assert!(kou.kappa(Complex64::new(0.0, -3.5)).is_err());
    }

    #[test]
    fn image_round_trip_is_exact() {
        let nu = LevyMeasure::Nig {
            alpha: 5.0,
            beta: 1.0,
            delta: 0.3,
        };
        let z = nu.image(&[JumpMap::ExpM1]);
        assert!(matches!(z, LevyMeasure::Image { .. }));
        assert_eq!(z.image(&[JumpMap::Log1p]), nu);
    }

    #[test]
    fn image_density_matches_integral() {
        let nu = LevyMeasure::Merton {
            lambda: 1.0,
            mu_j: 0.2,
            sigma_j: 0.3,
        };
        let z = nu.image(&[JumpMap::ExpM1]);
        // ∫ g dν_Z computed through the base equals ∫ g(y) density_Z(y) dy
        let via_base = z.integrate(&|y| y * y, &[], &default_opts()).value;
        let direct = integrate(|y: f64| y * y * z.density(y), -1.0, 200.0, &default_opts()).value;
        assert!((via_base - direct).abs() < 1e-9, "{via_base} vs {direct}");
    }

    #[test]
    fn atoms_map_directly() {
        let nu = LevyMeasure::CompoundPoisson {
            intensity: 1.0,
            jump_law: JumpLaw::Atoms {
                sizes: vec![std::f64::consts::LN_2],
                probs: vec![1.0],
            },
        };
        let z = nu.image(&[JumpMap::ExpM1]);
        let atoms = z.atoms();
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].0 - 1.0).abs() < 1e-15);
        assert_eq!(atoms[0].1, 1.0);
    }
}
