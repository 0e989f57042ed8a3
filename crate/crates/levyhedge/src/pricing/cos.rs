//! Fourier-cosine (COS) expansion of `x ↦ E h(x + X_τ)` on a truncation
//! interval `[a, b]` in log-moneyness.
//!
//! With `u_k = kπ/(b - a)` and the cosine coefficients `V_k` of `h` on
//! `[a, b]`, the expansion reads
//! `v(x) ≈ Σ'_k Re[φ_τ(u_k) e^{i u_k (x - a)}] V_k`, where `φ_τ = e^{-τψ}` and
//! `Σ'` halves the `k = 0` term.  The halving is folded into the stored
//! coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::levy::{CharacteristicExponent, LevyTriplet};
use crate::payoff::{Payoff, PayoffKind};
use crate::quad::QuadOptions;

/// Per-unit-time cumulants of `X_1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub c1: f64,
    pub c2: f64,
    pub c4: f64,
}

impl Cumulants {
    pub fn of(t: &LevyTriplet) -> Result<Self> {
        let opts = QuadOptions::with_tol(1e-14, 1e-10);
        let tail_mean = t
            .nu
            .integrate(&|x: f64| if x.abs() > 1.0 { x } else { 0.0 }, &[], &opts)
            .ok_or_fail("first cumulant")?;
        let m2 = t.nu.integrate(&|x: f64| x * x, &[], &opts).ok_or_fail("second cumulant")?;
        let m4 = t
            .nu
            .integrate(&|x: f64| x.powi(4), &[], &opts)
            .ok_or_fail("fourth cumulant")?;
        Ok(Cumulants {
            c1: t.gamma + tail_mean,
            c2: t.sigma * t.sigma + m2,
            c4: m4,
        })
    }

    /// Half width `L √(c₂τ + √(c₄τ))` of the truncation interval for `X_τ`.
    pub fn half_width(&self, tau: f64, l: f64) -> f64 {
        l * (self.c2 * tau + (self.c4 * tau).sqrt()).sqrt()
    }

    /// Fourth-moment (Chebyshev) bound on `P(|X_τ - c₁τ| > w)`.
    pub fn tail_bound(&self, tau: f64, w: f64) -> f64 {
        let m4 = self.c4 * tau + 3.0 * (self.c2 * tau).powi(2);
        (m4 / w.powi(4)).min(1.0)
    }
}

/// `χ_k(c, d) = ∫_c^d e^z cos(u_k(z - a)) dz`.
fn chi(u: f64, a: f64, c: f64, d: f64) -> f64 {
    let (sd, cd) = (u * (d - a)).sin_cos();
    let (sc, cc) = (u * (c - a)).sin_cos();
    (cd * d.exp() - cc * c.exp() + u * (sd * d.exp() - sc * c.exp())) / (1.0 + u * u)
}

/// `ψ_k(c, d) = ∫_c^d cos(u_k(z - a)) dz`.
fn psi(u: f64, a: f64, c: f64, d: f64) -> f64 {
    if u == 0.0 {
        d - c
    } else {
        ((u * (d - a)).sin() - (u * (c - a)).sin()) / u
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` (8 points).
const GL8: [(f64, f64); 4] = [
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_5),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_3),
];

/// Cosine coefficients of `h` on `[lo, hi] ⊂ [a, b]` by composite
/// Gauss–Legendre quadrature on panels graded towards `lo`, where the
/// integrands handled here have their only non-smooth point.
fn numeric_coefficients(h: &dyn Fn(f64) -> f64, a: f64, b: f64, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    if !(hi > lo) {
        return out;
    }
    let panels = n.max(256);
    let mut nodes = Vec::with_capacity(8 * panels);
    for j in 0..panels {
        let s0 = j as f64 / panels as f64;
        let s1 = (j + 1) as f64 / panels as f64;
        let (z0, z1) = (lo + (hi - lo) * s0 * s0, lo + (hi - lo) * s1 * s1);
        let (mid, half) = (0.5 * (z0 + z1), 0.5 * (z1 - z0));
        for (x, w) in GL8 {
            for z in [mid - half * x, mid + half * x] {
                nodes.push((z - a, w * half * h(z)));
            }
        }
    }
    let scale = 2.0 / (b - a);
    for (k, v) in out.iter_mut().enumerate() {
        let u = k as f64 * PI / (b - a);
        *v = scale * nodes.iter().map(|(d, w)| w * (u * d).cos()).sum::<f64>();
    }
    out
}

/// How a payoff is evaluated by the COS engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum CosRoute {
    /// `E* g(yS) = y`.
    Linear,
    /// `g ≡ c`.
    Constant(f64),
    /// Series for the payoff itself.
    Series,
    /// Series for the put plus `y - K` (put-call parity under a martingale).
    CallViaPut,
}

/// Cosine coefficients of a built-in payoff in the log-moneyness variable
/// `z = ln(y / K)` with `K` the strike (1 for strike-less payoffs).
#[derive(Debug, Clone)]
pub(crate) struct PayoffSeries {
    pub route: CosRoute,
    pub strike: f64,
}

impl PayoffSeries {
    pub fn new(payoff: &Payoff) -> Result<Self> {
        let (route, strike) = match &payoff.kind {
            PayoffKind::Linear => (CosRoute::Linear, 1.0),
            PayoffKind::Constant { value } => (CosRoute::Constant(*value), 1.0),
            PayoffKind::Call { strike } => (CosRoute::CallViaPut, *strike),
            PayoffKind::Put { strike } | PayoffKind::Binary { strike } => (CosRoute::Series, *strike),
            PayoffKind::PowerCall { strike, eta } => {
                if *eta == 1.0 {
                    (CosRoute::CallViaPut, *strike)
                } else {
                    (CosRoute::Series, *strike)
                }
            }
            PayoffKind::Custom(_) => {
                return Err(Error::PreconditionViolated(
                    "the COS method needs a built-in payoff; use Monte Carlo for custom payoffs".into(),
                ))
            }
        };
        Ok(PayoffSeries { route, strike })
    }

    /// Largest number of terms for which coefficients are computed; numeric
    /// coefficients cost `O(N²)`.
    pub fn max_terms(payoff: &Payoff) -> usize {
        match payoff.kind {
            PayoffKind::PowerCall { eta, .. } if eta < 1.0 => 1 << 13,
            _ => 1 << 20,
        }
    }

    /// `V_k` for `k < n` on `[a, b]`, with the `k = 0` term halved.
    pub fn coefficients(&self, payoff: &Payoff, a: f64, b: f64, n: usize) -> Vec<f64> {
        let k_ = self.strike;
        let scale = 2.0 / (b - a);
        let mut v: Vec<f64> = match &payoff.kind {
            PayoffKind::Put { .. } | PayoffKind::Call { .. } => {
                let d = b.min(0.0);
                (0..n)
                    .map(|k| {
                        let u = k as f64 * PI / (b - a);
                        if a >= d {
                            0.0
                        } else {
                            scale * k_ * (psi(u, a, a, d) - chi(u, a, a, d))
                        }
                    })
                    .collect()
            }
            PayoffKind::PowerCall { eta, .. } if *eta == 1.0 => {
                let d = b.min(0.0);
                (0..n)
                    .map(|k| {
                        let u = k as f64 * PI / (b - a);
                        if a >= d {
                            0.0
                        } else {
                            scale * k_ * (psi(u, a, a, d) - chi(u, a, a, d))
                        }
                    })
                    .collect()
            }
            PayoffKind::Binary { .. } => {
                let c = a.max(0.0);
                (0..n)
                    .map(|k| {
                        let u = k as f64 * PI / (b - a);
                        if c >= b {
                            0.0
                        } else {
                            scale * psi(u, a, c, b)
                        }
                    })
                    .collect()
            }
            PayoffKind::PowerCall { eta, .. } => {
                let eta = *eta;
                let h = move |z: f64| (k_ * z.exp_m1()).max(0.0).powf(eta);
                numeric_coefficients(&h, a, b, a.max(0.0), b, n)
            }
            PayoffKind::Linear | PayoffKind::Constant { .. } | PayoffKind::Custom(_) => vec![0.0; n],
        };
        if let Some(v0) = v.first_mut() {
            *v0 *= 0.5;
        }
        v
    }

    /// Maps the series value at log-moneyness `x` to the payoff's value;
    /// `growth = E e^{X_τ}` (`1` under a martingale measure).
    pub fn finish_value(&self, series: f64, y: f64, growth: f64) -> f64 {
        match self.route {
            CosRoute::Linear => y * growth,
            CosRoute::Constant(c) => c,
            CosRoute::Series => series,
            CosRoute::CallViaPut => series + y * growth - self.strike,
        }
    }

    /// Maps `∂_x` of the series to `∂_y` of the payoff's value.
    pub fn finish_gradient(&self, series_dx: f64, y: f64, growth: f64) -> f64 {
        match self.route {
            CosRoute::Linear => growth,
            CosRoute::Constant(_) => 0.0,
            CosRoute::Series => series_dx / y,
            CosRoute::CallViaPut => series_dx / y + growth,
        }
    }
}

/// A COS expansion frozen at one time to maturity: `c_k = φ_τ(u_k) V_k`.
#[derive(Debug, Clone)]
pub(crate) struct FrozenSeries {
    pub a: f64,
    pub b: f64,
    pub coeffs: Vec<Complex64>,
}

impl FrozenSeries {
    /// `(Σ' Re[c_k e^{iu_k(x-a)}], Σ' Re[i u_k c_k e^{iu_k(x-a)}])`.
    pub fn value_and_dx(&self, x: f64) -> (f64, f64) {
        let w = PI / (self.b - self.a);
        let step = Complex64::from_polar(1.0, w * (x - self.a));
        let mut rot = Complex64::new(1.0, 0.0);
        let (mut v, mut d) = (0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            // re-anchor the rotation periodically to stop rounding drift
            if k % 256 == 0 && k > 0 {
                rot = Complex64::from_polar(1.0, w * k as f64 * (x - self.a));
            }
            let t = c * rot;
            v += t.re;
            d -= w * k as f64 * t.im;
            rot *= step;
        }
        (v, d)
    }

    pub fn value(&self, x: f64) -> f64 {
        self.value_and_dx(x).0
    }
}

/// Threshold on `τ Re ψ(u_N)` above which the remaining terms are negligible
/// (`e^{-34} ≈ 2e-15`).
pub(crate) const SPECTRAL_DECAY: f64 = 34.0;

/// Builds a frozen expansion on `[a, b]` choosing the number of terms by
/// doubling from `n0` until `|φ_τ(u_N)|` is negligible.
pub(crate) fn freeze(
    exponent: &CharacteristicExponent,
    payoff: &Payoff,
    series: &PayoffSeries,
    tau: f64,
    a: f64,
    b: f64,
    n0: usize,
    n_max: usize,
) -> Result<FrozenSeries> {
    let n_max = n_max.min(PayoffSeries::max_terms(payoff));
    let mut n = n0.next_power_of_two().min(n_max);
    loop {
        let u = n as f64 * PI / (b - a);
        let decay = tau * exponent.eval(Complex64::new(u, 0.0))?.re;
        if decay >= SPECTRAL_DECAY {
            break;
        }
        if n >= n_max {
            return Err(Error::CosTruncationError {
                tail_bound: (-decay).exp(),
            });
        }
        n *= 2;
    }
    let v = series.coefficients(payoff, a, b, n);
    let mut coeffs = Vec::with_capacity(n);
    for (k, vk) in v.iter().enumerate() {
        let u = k as f64 * PI / (b - a);
        let phi = (-tau * exponent.eval(Complex64::new(u, 0.0))?).exp();
        coeffs.push(phi * *vk);
    }
    Ok(FrozenSeries { a, b, coeffs })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_coefficients_match_quadrature() {
        let p = Payoff::put(1.0);
        let s = PayoffSeries::new(&p).unwrap();
        let (a, b) = (-2.0, 1.5);
        let v = s.coefficients(&p, a, b, 8);
        let h = |z: f64| (1.0 - z.exp()).max(0.0);
        let num = numeric_coefficients(&h, a, b, a, 0.0, 8);
        for k in 1..8 {
            assert!((v[k] - num[k]).abs() < 1e-10, "{k}: {} vs {}", v[k], num[k]);
        }
        assert!((v[0] - 0.5 * num[0]).abs() < 1e-10);
    }

    #[test]
    fn chebyshev_bound_is_small_at_ten_widths() {
        let c = Cumulants {
            c1: 0.0,
            c2: 0.04,
            c4: 0.001,
        };
        let w = c.half_width(0.5, 10.0);
        assert!(c.tail_bound(0.5, w) <= 3e-4);
    }
}
