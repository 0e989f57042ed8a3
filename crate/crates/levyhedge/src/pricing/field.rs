//! Strategy surfaces for simulation: `ϑ(t, ·)` on a whole log-price grid at
//! once.
//!
//! Inserting the COS expansion of `G*` into the strategy formula gives
//!
//! `ϑ(t, y) = 1/(‖(σ,ν)‖ y) Σ'_k V_k Re[φ_τ(u_k) e^{iu_k(x-a)} (iσ²u_k + J(u_k))]`
//!
//! with `x = ln(y/K)` and `J(u) = ∫ (e^{iux} - 1)(e^x - 1) ν(dx) = κ(u - i) - κ(u) - κ(-i)`.
//! On the uniform grid `x_j = a + j(b - a)/M` the sum is an inverse FFT of
//! length `2M`.  The interval `[a, b]` is fixed for all times, so `u_k` do not
//! depend on `τ`; the number of terms grows as `τ ↓ 0` until `τ Re ψ*(u_N)`
//! is large, capped at `max_terms` (with a spectral filter when the cap
//! binds).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::cos::{CosRoute, SPECTRAL_DECAY};
use super::evaluator::{jump_range, PricingMethod, SemigroupEvaluator};
use crate::error::{Error, Result};
use crate::levy::{Kappa, LevyMeasure, MarketCoefficients};

/// Default cap on the number of COS terms per slice.
pub const DEFAULT_FIELD_TERMS: usize = 1 << 17;

/// Smallest number of grid points per slice (the FFT is zero-padded up to it).
const MIN_GRID: usize = 1 << 12;

/// Largest number of grid points per slice.
const MAX_GRID: usize = 1 << 21;

/// Values of a spectral sum at one time on a uniform log-moneyness grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSlice {
    pub t: f64,
    /// Log-moneyness of the first stored grid point and the spacing.
    x0: f64,
    dx: f64,
    raw: Vec<f64>,
}

impl GridSlice {
    /// Cubic Lagrange interpolation at `x`, clamped to the tabulated range;
    /// returns the value and the clamped abscissa.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        let n = self.raw.len();
        let pos = ((x - self.x0) / self.dx).clamp(1.0, (n - 3) as f64);
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        let (p0, p1, p2, p3) = (self.raw[i - 1], self.raw[i], self.raw[i + 1], self.raw[i + 2]);
        let v = p1
            + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + f * (3.0 * (p1 - p2) + p3 - p0)));
        (v, self.x0 + pos * self.dx)
    }

    /// Whether `x` lies inside the tabulated range.
    pub fn covers(&self, x: f64) -> bool {
        let hi = self.x0 + (self.raw.len() - 3) as f64 * self.dx;
        x >= self.x0 + self.dx && x <= hi
    }
}

/// Characteristic exponent sampled at the frequencies `u_k = kπ/(b - a)` of a
/// fixed interval, shared by all slices of a field.
#[derive(Debug, Clone)]
pub(crate) struct Spectrum {
    pub maturity: f64,
    pub a: f64,
    pub b: f64,
    /// Second cumulant per unit time.
    c2: f64,
    /// `ψ(u_k)`.
    pub psi: Vec<Complex64>,
    /// `min_{j ≥ k} Re ψ(u_j)`.
    suffix_min: Vec<f64>,
}

impl Spectrum {
    pub fn new(ev: &SemigroupEvaluator, a: f64, b: f64, n: usize) -> Result<Self> {
        let psi: Vec<Complex64> = (0..n)
            .into_par_iter()
            .map(|k| ev.exponent.eval(Complex64::new(k as f64 * PI / (b - a), 0.0)))
            .collect::<Result<_>>()?;
        let mut m = f64::INFINITY;
        let mut suffix_min: Vec<f64> = psi
            .iter()
            .rev()
            .map(|p| {
                m = m.min(p.re);
                m
            })
            .collect();
        suffix_min.reverse();
        Ok(Spectrum {
            maturity: ev.maturity,
            a,
            b,
            c2: ev.cumulants.c2,
            psi,
            suffix_min,
        })
    }

    pub fn u(&self, k: usize) -> f64 {
        k as f64 * PI / (self.b - self.a)
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn terms_at(&self, tau: f64) -> usize {
        let k = self.suffix_min.partition_point(|m| tau * m < SPECTRAL_DECAY);
        k.max(64).next_power_of_two().min(self.len())
    }

    pub fn capped_at(&self, tau: f64) -> bool {
        !self.psi.is_empty() && tau * self.suffix_min[self.len() - 1] < SPECTRAL_DECAY
    }

    /// `Σ'_k Re[e^{-τψ(u_k)} w_k e^{iu_k(x-a)}]` at time `t` on a uniform grid
    /// covering `[x_lo, x_hi]`, with at least `per_sd` points per standard
    /// deviation of `X_τ`.
    pub fn slice(&self, t: f64, weights: &[Complex64], x_lo: f64, x_hi: f64, per_sd: f64) -> GridSlice {
        let tau = self.maturity - t;
        let n = self.terms_at(tau).min(weights.len());
        let filter = self.capped_at(tau);
        let resolution = (per_sd * (self.b - self.a) / (self.c2 * tau).sqrt()).min(1e8) as usize;
        let m = (4 * n).max(MIN_GRID).max(resolution.next_power_of_two()).min(MAX_GRID.max(4 * n));
        let len = 2 * m;
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for k in 0..n {
            let mut c = (-tau * self.psi[k]).exp() * weights[k];
            if filter {
                // exponential filter of order 8 against Gibbs oscillations
                c *= (-36.0 * (k as f64 / n as f64).powi(8)).exp();
            }
            buf[k] = c;
        }
        FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
        let dx = (self.b - self.a) / m as f64;
        let j0 = (((x_lo - self.a) / dx).floor() as isize - 2).max(0) as usize;
        let j1 = ((((x_hi - self.a) / dx).ceil().max(0.0) as usize) + 3).min(m);
        GridSlice {
            t,
            x0: self.a + j0 as f64 * dx,
            dx,
            raw: buf[j0..=j1].iter().map(|z| z.re).collect(),
        }
    }
}

/// Strategy at one time on a uniform log-moneyness grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategySlice {
    pub t: f64,
    /// `‖(σ,ν)‖ y (ϑ - offset)` on the grid.
    grid: Option<GridSlice>,
    strike: f64,
    norm: f64,
    offset: f64,
}

impl StrategySlice {
    /// `ϑ(t, s)`; states outside the tabulated range are clamped to it.
    pub fn theta(&self, s: f64) -> f64 {
        match &self.grid {
            None => self.offset,
            Some(g) => {
                let (v, xc) = g.eval((s / self.strike).ln());
                v / (self.norm * self.strike * xc.exp()) + self.offset
            }
        }
    }

    /// Whether `s` lies inside the tabulated range.
    pub fn covers(&self, s: f64) -> bool {
        self.grid.as_ref().is_none_or(|g| g.covers((s / self.strike).ln()))
    }
}

/// Precomputed spectral data for slices of the strategy.
#[derive(Debug, Clone)]
pub struct StrategyField {
    pub maturity: f64,
    /// Log-price range `[ln s_lo, ln s_hi]` of the states to be queried.
    pub state_range: (f64, f64),
    strike: f64,
    norm: f64,
    /// Constant part of the strategy (the whole strategy if `spectrum` is empty).
    offset: f64,
    spectrum: Option<Spectrum>,
    /// `V_k (iσ²u_k + J(u_k))`.
    weights: Vec<Complex64>,
}

impl StrategyField {
    /// Field valid for prices in `[s_lo, s_hi]`; `max_terms` caps the number
    /// of COS terms.
    pub fn new(
        ev: &SemigroupEvaluator,
        coeffs: &MarketCoefficients,
        nu: &LevyMeasure,
        s_lo: f64,
        s_hi: f64,
        max_terms: usize,
    ) -> Result<Self> {
        let PricingMethod::FourierCos { width, .. } = ev.method else {
            return Err(Error::PreconditionViolated("strategy fields need the COS method".into()));
        };
        if !(s_lo > 0.0 && s_hi > s_lo) {
            return Err(Error::invalid("state range must satisfy 0 < s_lo < s_hi"));
        }
        if !(coeffs.norm_sigma_nu > 0.0) {
            return Err(Error::DegenerateModel);
        }
        if ev.gamma_s.abs() > 1e-9 {
            return Err(Error::PreconditionViolated(
                "strategy fields need the evaluator under the martingale measure".into(),
            ));
        }
        let series = ev.series.as_ref().expect("COS evaluator has a payoff series");
        let strike = series.strike;
        let norm = coeffs.norm_sigma_nu;
        let state_range = (s_lo.ln(), s_hi.ln());
        let (offset, spectral) = match series.route {
            CosRoute::Linear => (1.0, false),
            CosRoute::Constant(_) => (0.0, false),
            CosRoute::Series => (0.0, true),
            CosRoute::CallViaPut => (1.0, true),
        };
        let mut field = StrategyField {
            maturity: ev.maturity,
            state_range,
            strike,
            norm,
            offset,
            spectrum: None,
            weights: Vec::new(),
        };
        if !spectral {
            return Ok(field);
        }
        let (xl, xh) = ((s_lo / strike).ln(), (s_hi / strike).ln());
        let (jlo, jhi) = jump_range(nu, 1e-12 * norm);
        let w = ev.cumulants.half_width(ev.maturity, width);
        let c = ev.cumulants.c1 * ev.maturity;
        let a = xl + jlo + c.min(0.0) - w;
        let b = xh + jhi + c.max(0.0) + w;
        let n = max_terms.next_power_of_two().min(super::cos::PayoffSeries::max_terms(&ev.payoff));
        let spectrum = Spectrum::new(ev, a, b, n)?;
        let v = series.coefficients(&ev.payoff, a, b, n);
        let kappa = Kappa::new(nu)?;
        let k_minus_i = kappa.eval(Complex64::new(0.0, -1.0))?;
        let sigma2 = ev.starred_triplet.sigma.powi(2);
        let i = Complex64::new(0.0, 1.0);
        field.weights = (0..n)
            .into_par_iter()
            .map(|k| -> Result<Complex64> {
                let u = Complex64::new(spectrum.u(k), 0.0);
                let j = kappa.price_jump_transform(u, k_minus_i)?;
                Ok(v[k] * (i * sigma2 * u + j))
            })
            .collect::<Result<_>>()?;
        field.spectrum = Some(spectrum);
        Ok(field)
    }

    /// Number of terms used at time to maturity `tau`.
    pub fn terms_at(&self, tau: f64) -> usize {
        self.spectrum.as_ref().map_or(0, |s| s.terms_at(tau))
    }

    /// Whether the term cap binds at `tau`.
    pub fn capped_at(&self, tau: f64) -> bool {
        self.spectrum.as_ref().is_some_and(|s| s.capped_at(tau))
    }

    /// Strategy slice at time `t < T`.
    pub fn slice(&self, t: f64) -> Result<StrategySlice> {
        let tau = self.maturity - t;
        if !(tau > 0.0) {
            return Err(Error::PreconditionViolated("strategy slices need t < T".into()));
        }
        let grid = self.spectrum.as_ref().map(|sp| {
            let ln_k = self.strike.ln();
            sp.slice(
                t,
                &self.weights,
                self.state_range.0 - ln_k,
                self.state_range.1 - ln_k,
                16.0,
            )
        });
        Ok(StrategySlice {
            t,
            grid,
            strike: self.strike,
            norm: self.norm,
            offset: self.offset,
        })
    }

    /// Slices at the given times (in parallel); times at or after maturity
    /// reuse the previous slice.
    pub fn surface(&self, times: &[f64]) -> Result<StrategySurface> {
        let slices: Vec<Option<StrategySlice>> = times
            .par_iter()
            .map(|t| if *t < self.maturity { self.slice(*t).map(Some) } else { Ok(None) })
            .collect::<Result<_>>()?;
        let mut out: Vec<Arc<StrategySlice>> = Vec::with_capacity(times.len());
        for (i, s) in slices.into_iter().enumerate() {
            match s {
                Some(s) => out.push(Arc::new(s)),
                None => {
                    let prev = out.last().cloned().ok_or_else(|| {
                        Error::PreconditionViolated(format!("no slice before t = {}", times[i]))
                    })?;
                    out.push(prev);
                }
            }
        }
        Ok(StrategySurface {
            times: times.to_vec(),
            slices: out,
        })
    }
}

/// A strategy evaluable at any `(t, s)` with `t < T`.
pub trait Strategy: Sync {
    fn theta(&self, t: f64, s: f64) -> f64;
}

/// `ϑ ≡ c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantStrategy(pub f64);

impl Strategy for ConstantStrategy {
    fn theta(&self, _t: f64, _s: f64) -> f64 {
        self.0
    }
}

/// Strategy given by a closure.
pub struct FnStrategy<F: Fn(f64, f64) -> f64 + Sync>(pub F);

impl<F: Fn(f64, f64) -> f64 + Sync> Strategy for FnStrategy<F> {
    fn theta(&self, t: f64, s: f64) -> f64 {
        (self.0)(t, s)
    }
}

/// Linear interpolation in time between two slices.
pub fn interpolate_slices(lo: &StrategySlice, hi: &StrategySlice, t: f64, s: f64) -> f64 {
    if lo.t == hi.t || t <= lo.t {
        return lo.theta(s);
    }
    let w = (t - lo.t) / (hi.t - lo.t);
    (1.0 - w) * lo.theta(s) + w * hi.theta(s)
}

/// Slices at a sorted set of times, linearly interpolated in between.
#[derive(Debug, Clone)]
pub struct StrategySurface {
    pub times: Vec<f64>,
    pub slices: Vec<Arc<StrategySlice>>,
}

impl Strategy for StrategySurface {
    fn theta(&self, t: f64, s: f64) -> f64 {
        let i = self.times.partition_point(|x| *x <= t);
        if i == 0 {
            return self.slices[0].theta(s);
        }
        if i == self.times.len() {
            return self.slices[i - 1].theta(s);
        }
        interpolate_slices(&self.slices[i - 1], &self.slices[i], t, s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::{market_coefficients, minimal_martingale_measure, LevyTriplet};
    use crate::payoff::Payoff;
    use crate::pricing::{black_scholes_call, lrm_strategy};

    #[test]
    fn black_scholes_slice() {
        let t = LevyTriplet::new(-0.02, 0.2, LevyMeasure::Zero).unwrap();
        let ch = minimal_martingale_measure(&t).unwrap();
        let mc = market_coefficients(&t).unwrap();
        let ev = SemigroupEvaluator::new(ch.starred_triplet, Payoff::call(1.0), PricingMethod::default(), 1.0)
            .unwrap();
        let f = StrategyField::new(&ev, &mc, &LevyMeasure::Zero, 0.3, 3.0, DEFAULT_FIELD_TERMS).unwrap();
        for t in [0.0, 0.5, 0.99] {
            let s = f.slice(t).unwrap();
            for y in [0.5, 0.9, 1.0, 1.3, 2.5] {
                let (_, d) = black_scholes_call(y, 1.0, 0.2, 1.0 - t);
                assert!((s.theta(y) - d).abs() < 1e-5, "t={t} y={y}: {} vs {d}", s.theta(y));
            }
        }
    }

    #[test]
    fn fourier_route_matches_quadrature_route() {
        let nu = LevyMeasure::Merton {
            lambda: 0.3,
            mu_j: -0.1,
            sigma_j: 0.15,
        };
        let t = LevyTriplet::with_gamma_s(-0.02, 0.2, nu.clone()).unwrap();
        let ch = minimal_martingale_measure(&t).unwrap();
        let mc = market_coefficients(&t).unwrap();
        for payoff in [Payoff::call(1.0), Payoff::binary(1.1), Payoff::put(0.9)] {
            let ev = SemigroupEvaluator::new(ch.starred_triplet.clone(), payoff, PricingMethod::default(), 1.0)
                .unwrap();
            let f = StrategyField::new(&ev, &mc, &nu, 0.4, 2.5, DEFAULT_FIELD_TERMS).unwrap();
            for tt in [0.0, 0.7] {
                let s = f.slice(tt).unwrap();
                for y in [0.6, 1.0, 1.7] {
                    let q = lrm_strategy(&ev, &mc, &nu, tt, y).unwrap().theta;
                    assert!((s.theta(y) - q).abs() < 1e-5, "t={tt} y={y}: {} vs {q}", s.theta(y));
                }
            }
        }
    }
}
