//! Martingale-representation kernels of `f(X_T)`.
//!
//! With `F(t, x) = E f(x + X_{T-t})` the process `F(t, X_t)` is a martingale
//! and
//!
//! `f(X_T) = E f(X_T) + ∫ σ ∂_x F(t, X_{t-}) dW_t + ∫∫ (F(t, X_{t-} + z) - F(t, X_{t-})) Ñ(dt, dz)`.
//!
//! `F` is evaluated by the COS engine of [`SemigroupEvaluator`] after the
//! substitution `y = e^x`.  [`RepresentationEngine::kernels`] evaluates the
//! kernels at one point; [`KernelField`] tabulates them on a log-price grid
//! for path-wise checks.

use num_complex::Complex64;
use rayon::prelude::*;

use super::cos::{CosRoute, Cumulants, FrozenSeries};
use super::evaluator::{jump_range, PricingMethod, SemigroupEvaluator};
use super::field::{GridSlice, Spectrum};
use crate::error::{Error, Result};
use crate::levy::{Kappa, LevyTriplet};
use crate::payoff::Payoff;
use crate::quad::QuadOptions;

/// A function `f` of the log-price.
#[derive(Debug, Clone, PartialEq)]
pub enum LogPayoff {
    /// `f ≡ c`.
    Constant(f64),
    /// `f(x) = x`.
    Identity,
    /// `f(x) = g(e^x)` for a price payoff `g`.
    Price(Payoff),
}

impl LogPayoff {
    /// `f = 1_{[k, ∞)}`.
    pub fn indicator(level: f64) -> Self {
        LogPayoff::Price(Payoff::binary(level.exp()))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            LogPayoff::Constant(c) => *c,
            LogPayoff::Identity => x,
            LogPayoff::Price(g) => g.eval(x.exp()),
        }
    }
}

/// Kernels of the representation at one `(t, x)`.
#[derive(Debug, Clone)]
pub struct RepresentationKernels {
    /// `F(t, x)`.
    pub value: f64,
    /// `σ ∂_x F(t, x)`.
    pub diffusion_kernel: f64,
    jump: JumpKernel,
}

#[derive(Debug, Clone)]
enum JumpKernel {
    Zero,
    Identity,
    /// `z ↦ F(t, x + z)` through a frozen series; `z` is clamped to `[lo, hi]`.
    Series {
        series: FrozenSeries,
        x: f64,
        y_strike: f64,
        growth: f64,
        route: CosRoute,
        lo: f64,
        hi: f64,
    },
    /// `z ↦ f(x + z)` at maturity.
    Terminal { f: LogPayoff, x: f64 },
}

impl RepresentationKernels {
    /// `F(t, x + z) - F(t, x)`.
    pub fn jump_kernel(&self, z: f64) -> f64 {
        match &self.jump {
            JumpKernel::Zero => 0.0,
            JumpKernel::Identity => z,
            JumpKernel::Series {
                series,
                x,
                y_strike,
                growth,
                route,
                lo,
                hi,
            } => {
                let z = z.clamp(*lo, *hi);
                let m = x - y_strike.ln();
                finish(*route, series.value(m + z), (x + z).exp(), *growth, *y_strike) - self.value
            }
            JumpKernel::Terminal { f, x } => f.eval(x + z) - f.eval(*x),
        }
    }
}

fn finish(route: CosRoute, series: f64, y: f64, growth: f64, strike: f64) -> f64 {
    match route {
        CosRoute::Linear => y * growth,
        CosRoute::Constant(c) => c,
        CosRoute::Series => series,
        CosRoute::CallViaPut => series + y * growth - strike,
    }
}

/// Evaluator of `F` and its kernels for one `f`, triplet and maturity.
#[derive(Debug, Clone)]
pub struct RepresentationEngine {
    pub triplet: LevyTriplet,
    pub f: LogPayoff,
    pub maturity: f64,
    cumulants: Cumulants,
    ev: Option<SemigroupEvaluator>,
    jump_range: (f64, f64),
}

impl RepresentationEngine {
    pub fn new(triplet: LevyTriplet, f: LogPayoff, method: PricingMethod, maturity: f64) -> Result<Self> {
        triplet.validate()?;
        if !(maturity > 0.0 && maturity.is_finite()) {
            return Err(Error::invalid("maturity must be positive"));
        }
        let cumulants = Cumulants::of(&triplet)?;
        let ev = match &f {
            LogPayoff::Price(g) => {
                if !g.linear_growth() && !triplet.nu.exp_moment_finite(1.0) {
                    return Err(Error::DivergentExponentialMoment {
                        what: "E|f(x + X_t)|".into(),
                        order: 1.0,
                    });
                }
                Some(SemigroupEvaluator::new(triplet.clone(), g.clone(), method, maturity)?)
            }
            LogPayoff::Identity | LogPayoff::Constant(_) => None,
        };
        let jump_range = jump_range(&triplet.nu, 1e-12);
        Ok(RepresentationEngine {
            triplet,
            f,
            maturity,
            cumulants,
            ev,
            jump_range,
        })
    }

    fn check(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.maturity) {
            return Err(Error::invalid(format!("t = {t} outside [0, T]")));
        }
        Ok(self.maturity - t)
    }

    /// `F(t, x)`.
    pub fn value(&self, t: f64, x: f64) -> Result<f64> {
        let tau = self.check(t)?;
        match &self.f {
            LogPayoff::Constant(c) => Ok(*c),
            LogPayoff::Identity => Ok(x + self.cumulants.c1 * tau),
            LogPayoff::Price(_) => Ok(self.ev.as_ref().expect("price evaluator").value(t, x.exp())?.value),
        }
    }

    /// Kernels at `(t, x)`.
    pub fn kernels(&self, t: f64, x: f64) -> Result<RepresentationKernels> {
        let tau = self.check(t)?;
        let sigma = self.triplet.sigma;
        match &self.f {
            LogPayoff::Constant(c) => Ok(RepresentationKernels {
                value: *c,
                diffusion_kernel: 0.0,
                jump: JumpKernel::Zero,
            }),
            LogPayoff::Identity => Ok(RepresentationKernels {
                value: x + self.cumulants.c1 * tau,
                diffusion_kernel: sigma,
                jump: JumpKernel::Identity,
            }),
            LogPayoff::Price(g) => {
                let ev = self.ev.as_ref().expect("price evaluator");
                if tau == 0.0 {
                    return Ok(RepresentationKernels {
                        value: g.eval(x.exp()),
                        diffusion_kernel: sigma * x.exp() * ev.gradient(t, x.exp())?.value,
                        jump: JumpKernel::Terminal { f: self.f.clone(), x },
                    });
                }
                let y = x.exp();
                let diffusion_kernel = if sigma > 0.0 { sigma * y * ev.gradient(t, y)?.value } else { 0.0 };
                let series = ev.series.as_ref().ok_or_else(|| {
                    Error::PreconditionViolated("jump kernels need the COS method".into())
                })?;
                let (lo, hi) = self.jump_range;
                let m = x - series.strike.ln();
                let frozen = match series.route {
                    CosRoute::Linear | CosRoute::Constant(_) => FrozenSeries {
                        a: 0.0,
                        b: 1.0,
                        coeffs: Vec::new(),
                    },
                    _ => ev.frozen(tau, m + lo, m + hi)?,
                };
                let growth = ev.growth(tau);
                let value = finish(series.route, frozen.value(m), y, growth, series.strike);
                Ok(RepresentationKernels {
                    value,
                    diffusion_kernel,
                    jump: JumpKernel::Series {
                        series: frozen,
                        x,
                        y_strike: series.strike,
                        growth,
                        route: series.route,
                        lo,
                        hi,
                    },
                })
            }
        }
    }
}

/// Kernels at `(t, x)` for `f` under `triplet` with the default COS method.
pub fn representation_kernels(
    triplet: &LevyTriplet,
    f: &LogPayoff,
    maturity: f64,
    t: f64,
    x: f64,
) -> Result<RepresentationKernels> {
    RepresentationEngine::new(triplet.clone(), f.clone(), PricingMethod::default(), maturity)?.kernels(t, x)
}

/// `F`, `∂_x F` and the jump compensator `∫ (F(t, x + z) - F(t, x)) ν(dz)`
/// at one time, on a log-price grid.
#[derive(Debug, Clone)]
pub struct KernelSlice {
    pub t: f64,
    value: GridSlice,
    dx: GridSlice,
    compensator: GridSlice,
    strike: f64,
    growth: f64,
    /// `∫ (e^z - 1) ν(dz)`.
    price_jump_mean: f64,
    call: bool,
}

impl KernelSlice {
    /// `F(t, x)`.
    pub fn value(&self, x: f64) -> f64 {
        let m = x - self.strike.ln();
        let v = self.value.eval(m).0;
        if self.call {
            v + self.growth * x.exp() - self.strike
        } else {
            v
        }
    }

    /// `∂_x F(t, x)`.
    pub fn gradient(&self, x: f64) -> f64 {
        let v = self.dx.eval(x - self.strike.ln()).0;
        if self.call {
            v + self.growth * x.exp()
        } else {
            v
        }
    }

    /// `∫ (F(t, x + z) - F(t, x)) ν(dz)`.
    pub fn compensator(&self, x: f64) -> f64 {
        let v = self.compensator.eval(x - self.strike.ln()).0;
        if self.call {
            v + self.growth * x.exp() * self.price_jump_mean
        } else {
            v
        }
    }
}

/// Tabulated representation kernels for a finite-activity jump measure.
#[derive(Debug, Clone)]
pub struct KernelField {
    pub maturity: f64,
    /// Log-price range `[x_lo, x_hi]` of the tabulated states.
    pub state_range: (f64, f64),
    spectrum: Spectrum,
    strike: f64,
    gamma_s: f64,
    price_jump_mean: f64,
    call: bool,
    /// `V_k`, `iu_k V_k` and `V_k ∫ (e^{iu_k z} - 1) ν(dz)`.
    weights: [Vec<Complex64>; 3],
}

impl KernelField {
    /// Field for states with log-price in `[x_lo, x_hi]`; jump kernels are
    /// tabulated over the state range widened by the jump range of `ν`.
    pub fn new(engine: &RepresentationEngine, x_lo: f64, x_hi: f64, max_terms: usize) -> Result<Self> {
        let nu = &engine.triplet.nu;
        if !nu.finite_activity() {
            return Err(Error::PreconditionViolated(
                "tabulated kernels need a finite-activity jump measure".into(),
            ));
        }
        let Some(ev) = engine.ev.as_ref() else {
            return Err(Error::PreconditionViolated(
                "tabulated kernels are only needed for price payoffs".into(),
            ));
        };
        let PricingMethod::FourierCos { width, .. } = ev.method else {
            return Err(Error::PreconditionViolated("tabulated kernels need the COS method".into()));
        };
        if !(x_hi > x_lo) {
            return Err(Error::invalid("state range must satisfy x_lo < x_hi"));
        }
        let series = ev.series.as_ref().expect("COS series");
        let call = match series.route {
            CosRoute::Series => false,
            CosRoute::CallViaPut => true,
            CosRoute::Linear | CosRoute::Constant(_) => {
                return Err(Error::PreconditionViolated(
                    "linear and constant payoffs have closed-form kernels".into(),
                ))
            }
        };
        let strike = series.strike;
        let (jlo, jhi) = engine.jump_range;
        let (ml, mh) = (x_lo - strike.ln() + jlo, x_hi - strike.ln() + jhi);
        let w = ev.cumulants.half_width(ev.maturity, width);
        let c = ev.cumulants.c1 * ev.maturity;
        let a = ml + c.min(0.0) - w;
        let b = mh + c.max(0.0) + w;
        let n = max_terms.next_power_of_two().min(super::cos::PayoffSeries::max_terms(&ev.payoff));
        let spectrum = Spectrum::new(ev, a, b, n)?;
        let v = series.coefficients(&ev.payoff, a, b, n);
        let kappa = Kappa::new(nu)?;
        let opts = QuadOptions::with_tol(1e-15, 1e-12);
        let small_mean = nu
            .integrate(&|z: f64| if z.abs() <= 1.0 { z } else { 0.0 }, &[-1.0, 1.0], &opts)
            .ok_or_fail("truncated jump mean")?;
        let price_jump_mean = nu
            .integrate(&|z: f64| z.exp_m1(), &[0.0], &opts)
            .ok_or_fail("mean price jump")?;
        let i = Complex64::new(0.0, 1.0);
        let rows: Vec<[Complex64; 3]> = (0..n)
            .into_par_iter()
            .map(|k| -> Result<[Complex64; 3]> {
                let u = Complex64::new(spectrum.u(k), 0.0);
                let jump = kappa.eval(u)? + i * u * small_mean;
                Ok([Complex64::new(v[k], 0.0), i * u * v[k], jump * v[k]])
            })
            .collect::<Result<_>>()?;
        let weights = [
            rows.iter().map(|r| r[0]).collect(),
            rows.iter().map(|r| r[1]).collect(),
            rows.iter().map(|r| r[2]).collect(),
        ];
        Ok(KernelField {
            maturity: ev.maturity,
            state_range: (x_lo, x_hi),
            spectrum,
            strike,
            gamma_s: ev.gamma_s,
            price_jump_mean,
            call,
            weights,
        })
    }

    /// Kernel slice at `t < T`.
    pub fn slice(&self, t: f64) -> Result<KernelSlice> {
        let tau = self.maturity - t;
        if !(tau > 0.0) {
            return Err(Error::PreconditionViolated("kernel slices need t < T".into()));
        }
        let lo = self.spectrum.a;
        let hi = self.spectrum.b;
        let grid = |w: &[Complex64]| self.spectrum.slice(t, w, lo, hi, 8.0);
        Ok(KernelSlice {
            t,
            value: grid(&self.weights[0]),
            dx: grid(&self.weights[1]),
            compensator: grid(&self.weights[2]),
            strike: self.strike,
            growth: (self.gamma_s * tau).exp(),
            price_jump_mean: self.price_jump_mean,
            call: self.call,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyMeasure;

    fn merton() -> LevyTriplet {
        LevyTriplet::new(
            0.01,
            0.2,
            LevyMeasure::Merton {
                lambda: 0.3,
                mu_j: -0.1,
                sigma_j: 0.15,
            },
        )
        .unwrap()
    }

    #[test]
    fn trivial_kernels() {
        let t = merton();
        let k = representation_kernels(&t, &LogPayoff::Constant(2.0), 1.0, 0.3, 0.1).unwrap();
        assert_eq!((k.diffusion_kernel, k.jump_kernel(0.4)), (0.0, 0.0));
        let k = representation_kernels(&t, &LogPayoff::Identity, 1.0, 0.3, 0.1).unwrap();
        assert_eq!(k.diffusion_kernel, 0.2);
        assert_eq!(k.jump_kernel(-0.25), -0.25);
    }

    #[test]
    fn linear_price_payoff_grows_with_the_mean() {
        // f(x) = e^x: F(t, x) = e^{x + τ γ_S}
        let t = merton();
        let e = RepresentationEngine::new(
            t.clone(),
            LogPayoff::Price(Payoff::linear()),
            PricingMethod::default(),
            1.0,
        )
        .unwrap();
        let gs = e.ev.as_ref().unwrap().gamma_s;
        let k = e.kernels(0.5, 0.2).unwrap();
        assert!((k.value - (0.2 + 0.5 * gs).exp()).abs() < 1e-13);
        let z = 0.3;
        assert!((k.jump_kernel(z) - k.value * z.exp_m1()).abs() < 1e-12);
    }

    #[test]
    fn field_matches_point_kernels() {
        let t = merton();
        for f in [LogPayoff::indicator(0.0), LogPayoff::Price(Payoff::call(1.0))] {
            let e = RepresentationEngine::new(t.clone(), f, PricingMethod::default(), 1.0).unwrap();
            let field = KernelField::new(&e, -1.0, 1.0, 1 << 14).unwrap();
            for tt in [0.0, 0.6, 0.95] {
                let s = field.slice(tt).unwrap();
                for x in [-0.5, 0.0, 0.3] {
                    let k = e.kernels(tt, x).unwrap();
                    assert!((s.value(x) - k.value).abs() < 1e-6, "{tt} {x}");
                    assert!((0.2 * s.gradient(x) - k.diffusion_kernel).abs() < 1e-5);
                    // compensator against quadrature of the point jump kernel
                    let nu = &t.nu;
                    let c = nu
                        .integrate(&|z: f64| k.jump_kernel(z), &[0.0], &QuadOptions::with_tol(1e-12, 1e-10))
                        .value;
                    assert!((s.compensator(x) - c).abs() < 1e-5, "{tt} {x}: {} vs {c}", s.compensator(x));
                }
            }
        }
    }
}
