//! The semigroup `G*(t, y) = E* g(y S_{T-t})`, its gradient and the local
//! risk-minimizing strategy
//!
//! `ϑ(t, y) = [σ² ∂_y G*(t, y) + ∫ (G*(t, e^x y) - G*(t, y))/y (e^x - 1) ν(dx)] / ‖(σ, ν)‖`.

use serde::{Deserialize, Serialize};

use super::cos::{freeze, Cumulants, FrozenSeries, PayoffSeries};
use crate::error::{Error, Result};
use crate::levy::{CharacteristicExponent, LevyMeasure, LevyTriplet, MarketCoefficients};
use crate::payoff::{Payoff, PayoffKind};
use crate::quad::QuadOptions;
use crate::simulate::path::path_rng;
use crate::simulate::SimulationScheme;

/// Largest number of COS terms before giving up on spectral convergence.
pub const MAX_COS_TERMS: usize = 1 << 18;

/// Tolerance on the fourth-moment tail bound outside the COS interval.
pub const COS_TAIL_TOLERANCE: f64 = 1e-3;

/// Numerical method for `G*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PricingMethod {
    /// COS expansion with at least `terms` terms on `c₁τ ± width·√(c₂τ + √(c₄τ))`.
    FourierCos { terms: usize, width: f64 },
    /// Plain Monte Carlo with terminal sampling under `P*`.
    MonteCarlo { paths: usize, seed: u64 },
}

impl Default for PricingMethod {
    fn default() -> Self {
        PricingMethod::FourierCos {
            terms: 1 << 10,
            width: 10.0,
        }
    }
}

/// A value with its Monte Carlo standard error (`0` for deterministic methods).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    fn exact(value: f64) -> Self {
        Estimate {
            value,
            std_error: 0.0,
        }
    }
}

/// Components of the strategy at one `(t, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyValue {
    pub theta: f64,
    /// `σ² ∂_y G*(t, y)`.
    pub diffusion_part: f64,
    /// `∫ (G*(t, e^x y) - G*(t, y))/y (e^x - 1) ν(dx)`.
    pub jump_part: f64,
    pub quadrature_error_bound: f64,
}

/// Evaluator of `G*` for one payoff, maturity and starred triplet.
///
/// Immutable after construction, so queries may run concurrently.
#[derive(Debug, Clone)]
pub struct SemigroupEvaluator {
    pub starred_triplet: LevyTriplet,
    pub payoff: Payoff,
    pub method: PricingMethod,
    pub maturity: f64,
    pub(crate) exponent: CharacteristicExponent,
    pub(crate) cumulants: Cumulants,
    pub(crate) series: Option<PayoffSeries>,
    /// `γ_S` of the triplet (`0` under a martingale measure).
    pub(crate) gamma_s: f64,
    scheme: Option<SimulationScheme>,
}

impl SemigroupEvaluator {
    pub fn new(starred_triplet: LevyTriplet, payoff: Payoff, method: PricingMethod, maturity: f64) -> Result<Self> {
        starred_triplet.validate()?;
        payoff.validate()?;
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::invalid("maturity must be positive"));
        }
        let exponent = starred_triplet.exponent()?;
        let cumulants = Cumulants::of(&starred_triplet)?;
        let gamma_s = if starred_triplet.nu.exp_moment_finite(1.0) {
            -exponent.eval(num_complex::Complex64::new(0.0, -1.0))?.re
        } else {
            0.0
        };
        let (series, scheme) = match method {
            PricingMethod::FourierCos { terms, width } => {
                if terms < 2 || !(width > 0.0) {
                    return Err(Error::invalid("COS needs at least 2 terms and a positive width"));
                }
                // the characteristic function must be evaluable on the real line
                exponent.eval(num_complex::Complex64::new(1.0, 0.0))?;
                (Some(PayoffSeries::new(&payoff)?), None)
            }
            PricingMethod::MonteCarlo { paths, .. } => {
                if paths < 2 {
                    return Err(Error::PathBudgetExhausted("Monte Carlo needs at least 2 paths".into()));
                }
                (None, Some(SimulationScheme::new(&starred_triplet)?))
            }
        };
        Ok(SemigroupEvaluator {
            starred_triplet,
            payoff,
            method,
            maturity,
            exponent,
            cumulants,
            series,
            gamma_s,
            scheme,
        })
    }

    fn check_time(&self, t: f64, y: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.maturity) {
            return Err(Error::invalid(format!("t = {t} outside [0, T]")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::invalid("price must be positive"));
        }
        Ok(())
    }

    /// COS expansion at `τ` valid for log-moneyness in `[x_lo, x_hi]`.
    pub(crate) fn frozen(&self, tau: f64, x_lo: f64, x_hi: f64) -> Result<FrozenSeries> {
        let PricingMethod::FourierCos { terms, width } = self.method else {
            unreachable!("frozen series requested for a Monte Carlo evaluator");
        };
        let series = self.series.as_ref().expect("COS evaluator has a payoff series");
        let w = self.cumulants.half_width(tau, width).max(1e-9);
        let bound = self.cumulants.tail_bound(tau, w);
        if bound > COS_TAIL_TOLERANCE {
            return Err(Error::CosTruncationError { tail_bound: bound });
        }
        let c = self.cumulants.c1 * tau;
        freeze(
            &self.exponent,
            &self.payoff,
            series,
            tau,
            x_lo + c - w,
            x_hi + c + w,
            terms,
            MAX_COS_TERMS,
        )
    }

    /// `E e^{X_τ}` under the evaluator's triplet.
    pub(crate) fn growth(&self, tau: f64) -> f64 {
        (self.gamma_s * tau).exp()
    }

    fn strike(&self) -> f64 {
        self.series.as_ref().map_or(1.0, |s| s.strike)
    }

    fn mc_samples(&self, tau: f64) -> Vec<f64> {
        let PricingMethod::MonteCarlo { paths, seed } = self.method else {
            unreachable!("samples requested for a COS evaluator");
        };
        let scheme = self.scheme.as_ref().expect("Monte Carlo evaluator has a scheme");
        let mut rng = path_rng(seed, 0);
        (0..paths).map(|_| scheme.sample_increment(tau, &mut rng).exp()).collect()
    }

    /// `G*(t, y)`.
    pub fn value(&self, t: f64, y: f64) -> Result<Estimate> {
        self.check_time(t, y)?;
        let tau = self.maturity - t;
        if tau == 0.0 {
            return Ok(Estimate::exact(self.payoff.eval(y)));
        }
        match self.method {
            PricingMethod::FourierCos { .. } => {
                let series = self.series.as_ref().expect("COS series");
                if let super::cos::CosRoute::Linear | super::cos::CosRoute::Constant(_) = series.route {
                    return Ok(Estimate::exact(series.finish_value(0.0, y, self.growth(tau))));
                }
                let x = (y / self.strike()).ln();
                let f = self.frozen(tau, x, x)?;
                Ok(Estimate::exact(series.finish_value(f.value(x), y, self.growth(tau))))
            }
            PricingMethod::MonteCarlo { .. } => {
                let v: Vec<f64> = self.mc_samples(tau).iter().map(|s| self.payoff.eval(y * s)).collect();
                Ok(mean_and_error(&v))
            }
        }
    }

    /// `∂_y G*(t, y)`; `0` when `σ = 0` by convention.
    pub fn gradient(&self, t: f64, y: f64) -> Result<Estimate> {
        self.check_time(t, y)?;
        if self.starred_triplet.sigma == 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        let tau = self.maturity - t;
        if tau == 0.0 {
            return Ok(Estimate::exact(payoff_derivative(&self.payoff, y)));
        }
        match self.method {
            PricingMethod::FourierCos { .. } => {
                let series = self.series.as_ref().expect("COS series");
                if let super::cos::CosRoute::Linear | super::cos::CosRoute::Constant(_) = series.route {
                    return Ok(Estimate::exact(series.finish_gradient(0.0, y, self.growth(tau))));
                }
                let x = (y / self.strike()).ln();
                let f = self.frozen(tau, x, x)?;
                Ok(Estimate::exact(series.finish_gradient(f.value_and_dx(x).1, y, self.growth(tau))))
            }
            PricingMethod::MonteCarlo { .. } => {
                let s = self.mc_samples(tau);
                let h = (1e-4 * y).max(1e-6);
                let quotient = |h: f64| -> Vec<f64> {
                    s.iter()
                        .map(|e| (self.payoff.eval((y + h) * e) - self.payoff.eval((y - h) * e)) / (2.0 * h))
                        .collect()
                };
                let d1 = mean_and_error(&quotient(h));
                let d2 = mean_and_error(&quotient(2.0 * h));
                // Richardson estimate of the O(h²) bias
                let fd = (d1.value - d2.value).abs() / 3.0;
                Ok(Estimate {
                    value: d1.value,
                    std_error: d1.std_error.hypot(fd),
                })
            }
        }
    }
}

fn mean_and_error(v: &[f64]) -> Estimate {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        value: mean,
        std_error: (var / n).sqrt(),
    }
}

/// `g'(y)` (right derivative at kinks, `0` at jumps).
fn payoff_derivative(p: &Payoff, y: f64) -> f64 {
    match &p.kind {
        PayoffKind::Call { strike } => f64::from(u8::from(y >= *strike)),
        PayoffKind::Put { strike } => -f64::from(u8::from(y < *strike)),
        PayoffKind::PowerCall { strike, eta } => {
            if y > *strike {
                eta * (y - strike).powf(eta - 1.0)
            } else {
                0.0
            }
        }
        PayoffKind::Binary { .. } | PayoffKind::Constant { .. } => 0.0,
        PayoffKind::Linear => 1.0,
        PayoffKind::Custom(c) => {
            let h = (1e-6 * y).max(1e-9);
            ((c.f)(y + h) - (c.f)(y - h)) / (2.0 * h)
        }
    }
}

/// Free-function form of [`SemigroupEvaluator::value`].
pub fn semigroup_value(ev: &SemigroupEvaluator, t: f64, y: f64) -> Result<Estimate> {
    ev.value(t, y)
}

/// Free-function form of [`SemigroupEvaluator::gradient`].
pub fn semigroup_gradient(ev: &SemigroupEvaluator, t: f64, y: f64) -> Result<Estimate> {
    ev.gradient(t, y)
}

/// Bound on `|G*(t, e^x y) - G*(t, y)|` from the payoff's regularity.
fn increment_bound(p: &Payoff, y: f64, x: f64) -> f64 {
    let d = y * x.exp_m1().abs();
    match p.kind {
        PayoffKind::Constant { .. } => 0.0,
        PayoffKind::Binary { .. } => 1.0,
        _ => d.powf(p.holder_eta),
    }
}

/// Jump range `[lo, hi]` outside which `∫ (1 + e^x)|e^x - 1| ν` is below `tol`.
pub(crate) fn jump_range(nu: &LevyMeasure, tol: f64) -> (f64, f64) {
    let (slo, shi) = nu.support();
    let opts = QuadOptions::with_tol(1e-16, 1e-8);
    let w = |x: f64| (1.0 + x.exp()) * x.exp_m1().abs();
    let edge = |sign: f64, support: f64| -> f64 {
        if support.is_finite() {
            return support;
        }
        let mut z: f64 = 0.25;
        while z < 700.0 {
            let (a, b) = if sign > 0.0 {
                (z, f64::INFINITY)
            } else {
                (f64::NEG_INFINITY, -z)
            };
            if nu.integrate_over(&w, a, b, &[], &opts).value <= tol {
                break;
            }
            z *= 1.25;
        }
        sign * z
    };
    let lo = if nu.is_zero() { 0.0 } else { edge(-1.0, slo).min(0.0) };
    let hi = if nu.is_zero() { 0.0 } else { edge(1.0, shi).max(0.0) };
    (lo, hi)
}

/// Local risk-minimizing strategy at `(t, y)` by adaptive quadrature of the
/// jump integral over values of `G*`.
///
/// `nu` is the Lévy measure under the original measure `P` and `coeffs` its
/// market coefficients; `ev` evaluates `G*` under `P*`.
pub fn lrm_strategy(
    ev: &SemigroupEvaluator,
    coeffs: &MarketCoefficients,
    nu: &LevyMeasure,
    t: f64,
    y: f64,
) -> Result<StrategyValue> {
    ev.check_time(t, y)?;
    let tau = ev.maturity - t;
    if !(tau > 0.0) {
        return Err(Error::PreconditionViolated("the strategy is defined for t < T".into()));
    }
    if ev.payoff.holder_eta < 1.0 && tau <= 1e-6 * ev.maturity {
        return Err(Error::PreconditionViolated(
            "t within 1e-6·T of maturity for a payoff with η < 1".into(),
        ));
    }
    if !(coeffs.norm_sigma_nu > 0.0) {
        return Err(Error::DegenerateModel);
    }
    if !nu.exp_moment_finite(2.0) || !ev.starred_triplet.nu.exp_moment_finite(2.0) {
        return Err(Error::PreconditionViolated(
            "g(S_T) must be square integrable under P and P*".into(),
        ));
    }
    let sigma = ev.starred_triplet.sigma;
    let opts = QuadOptions::with_tol(1e-13, 1e-10);

    let (diffusion_part, jump_part, err) = match ev.method {
        PricingMethod::FourierCos { .. } => {
            let series = ev.series.as_ref().expect("COS series");
            let route = series.route;
            if let super::cos::CosRoute::Constant(_) = route {
                (0.0, 0.0, 0.0)
            } else {
                let tail_tol = 1e-12 * coeffs.norm_sigma_nu;
                let (jlo, jhi) = jump_range(nu, tail_tol);
                let x = (y / ev.strike()).ln();
                let f = match route {
                    super::cos::CosRoute::Linear => None,
                    _ => Some(ev.frozen(tau, x + jlo, x + jhi)?),
                };
                let growth = ev.growth(tau);
                let g = |z: f64| -> f64 {
                    let yz = y * z.exp();
                    match &f {
                        None => series.finish_value(0.0, yz, growth),
                        Some(f) => series.finish_value(f.value(x + z), yz, growth),
                    }
                };
                let g0 = g(0.0);
                let dg = match &f {
                    None => growth,
                    Some(f) => series.finish_gradient(f.value_and_dx(x).1, y, growth),
                };
                let integrand = |z: f64| (g(z) - g0) / y * z.exp_m1();
                let r = nu.integrate_over(&integrand, jlo, jhi, &[0.0], &opts);
                if !r.value.is_finite() {
                    return Err(Error::QuadratureFailure {
                        what: "jump integral of the strategy".into(),
                        estimate: r.error,
                    });
                }
                // jumps beyond the range: bound through the payoff's regularity
                let outside = |z: f64| {
                    if z < jlo || z > jhi {
                        increment_bound(&ev.payoff, y, z) / y * z.exp_m1().abs()
                    } else {
                        0.0
                    }
                };
                let tail = nu.integrate(&outside, &[jlo, jhi], &opts).value;
                let d = if sigma > 0.0 { sigma * sigma * dg } else { 0.0 };
                (d, r.value, r.error + tail)
            }
        }
        PricingMethod::MonteCarlo { .. } => {
            let s = ev.mc_samples(tau);
            let g0: f64 = s.iter().map(|e| ev.payoff.eval(y * e)).sum::<f64>() / s.len() as f64;
            let integrand = |z: f64| {
                let gz = s.iter().map(|e| ev.payoff.eval(y * z.exp() * e)).sum::<f64>() / s.len() as f64;
                (gz - g0) / y * z.exp_m1()
            };
            let r = nu.integrate(&integrand, &[0.0], &QuadOptions::with_tol(1e-10, 1e-7));
            let d = ev.gradient(t, y)?;
            (sigma * sigma * d.value, r.value, r.error + sigma * sigma * d.std_error)
        }
    };
    Ok(StrategyValue {
        theta: (diffusion_part + jump_part) / coeffs.norm_sigma_nu,
        diffusion_part,
        jump_part,
        quadrature_error_bound: err / coeffs.norm_sigma_nu,
    })
}

/// Black–Scholes price and delta of a call with zero rate.
pub fn black_scholes_call(y: f64, strike: f64, sigma: f64, tau: f64) -> (f64, f64) {
    let v = sigma * tau.sqrt();
    let d1 = ((y / strike).ln() + 0.5 * v * v) / v;
    let d2 = d1 - v;
    let n = crate::special::norm_cdf;
    (y * n(d1) - strike * n(d2), n(d1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{market_coefficients, minimal_martingale_measure};

    fn bs_setup(payoff: Payoff) -> (SemigroupEvaluator, MarketCoefficients, LevyMeasure) {
        let t = LevyTriplet::new(-0.02, 0.2, LevyMeasure::Zero).unwrap();
        let ch = minimal_martingale_measure(&t).unwrap();
        let mc = market_coefficients(&t).unwrap();
        let ev = SemigroupEvaluator::new(ch.starred_triplet, payoff, PricingMethod::default(), 1.0).unwrap();
        (ev, mc, LevyMeasure::Zero)
    }

    #[test]
    fn black_scholes_value_and_delta() {
        let (ev, mc, nu) = bs_setup(Payoff::call(1.0));
        let v = ev.value(0.5, 1.0).unwrap().value;
        let (bs, delta) = black_scholes_call(1.0, 1.0, 0.2, 0.5);
        assert!((v - bs).abs() < 1e-10, "{v} vs {bs}");
        let g = ev.gradient(0.5, 1.0).unwrap().value;
        assert!((g - delta).abs() < 1e-10);
        let th = lrm_strategy(&ev, &mc, &nu, 0.5, 1.0).unwrap();
        assert!((th.theta - delta).abs() < 1e-10);
    }

    #[test]
    fn terminal_value_is_payoff() {
        let (ev, _, _) = bs_setup(Payoff::put(1.2));
        assert!((ev.value(1.0, 1.0).unwrap().value - 0.2).abs() < 1e-15);
    }
}
