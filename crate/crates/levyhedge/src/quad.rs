//! Globally adaptive Gauss–Kronrod (10/21 point) quadrature.
//!
//! The integrator bisects the sub-interval with the largest error estimate
//! until the summed estimate meets the requested tolerance.  Error estimates
//! follow the QUADPACK rescaling heuristic.  Half-infinite and infinite ranges
//! are mapped onto finite ones by `x = a + t / (1 - t)`.
//!
//! Integrands may be real or complex valued (anything implementing
//! [`QuadValue`]).

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Kronrod abscissae; the odd entries are the 10-point Gauss abscissae.
const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077958109831074,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// Values that can be integrated: real and complex numbers.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn is_finite_value(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_finite_value(&self) -> bool {
        self.is_finite()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_finite_value(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions {
            abs_tol,
            rel_tol,
            ..Default::default()
        }
    }
}

/// Outcome of an integration.
#[derive(Debug, Clone, Copy)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

impl<T: QuadValue> QuadResult<T> {
    /// Turns a non-converged result into [`Error::QuadratureFailure`].
    pub fn ok_or_fail(self, what: &str) -> Result<T> {
        if self.converged && self.value.is_finite_value() {
            Ok(self.value)
        } else {
            Err(Error::QuadratureFailure {
                what: what.to_string(),
                estimate: self.error,
            })
        }
    }
}

#[derive(Clone, Copy)]
struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

struct ByError<T>(Segment<T>);

impl<T> PartialEq for ByError<T> {
    fn eq(&self, other: &Self) -> bool {
        self.0.error == other.0.error
    }
}
impl<T> Eq for ByError<T> {}
impl<T> PartialOrd for ByError<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for ByError<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.error.total_cmp(&other.0.error)
    }
}

fn rescale_error(err: f64, result_abs: f64, result_asc: f64) -> f64 {
    let mut err = err.abs();
    if result_asc != 0.0 && err != 0.0 {
        let scale = (200.0 * err / result_asc).powf(1.5);
        err = if scale < 1.0 {
            result_asc * scale
        } else {
            result_asc
        };
    }
    if result_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * result_abs;
        if min_err > err {
            err = min_err;
        }
    }
    err
}

/// One Gauss–Kronrod 21-point rule on `[a, b]`.
fn gk21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Segment<T> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_k = f_center * WGK[10];
    let mut res_g = T::zero();
    let mut res_abs = f_center.magnitude() * WGK[10];
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + (f1 + f2) * WGK[j];
        res_abs += WGK[j] * (f1.magnitude() + f2.magnitude());
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = res_k * 0.5;
    let mut res_asc = WGK[10] * (f_center - mean).magnitude();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
    }
    let value = res_k * half;
    let err = ((res_k - res_g) * half).magnitude();
    let error = rescale_error(err, res_abs * half.abs(), res_asc * half.abs());
    let error = if value.is_finite_value() {
        error
    } else {
        f64::INFINITY
    };
    Segment { a, b, value, error }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate_finite<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> QuadResult<T> {
    if a == b {
        return QuadResult {
            value: T::zero(),
            error: 0.0,
            evaluations: 0,
            converged: true,
        };
    }
    let first = gk21(&mut f, a, b);
    let mut evaluations = 21;
    let mut total = first.value;
    let mut total_err = first.error;
    let mut heap = BinaryHeap::new();
    heap.push(ByError(first));
    let mut intervals = 1;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if total_err <= tol {
            break;
        }
        if intervals >= opts.max_intervals {
            break;
        }
        let Some(ByError(worst)) = heap.pop() else {
            break;
        };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) || (worst.b - worst.a).abs() < 1e-15 * mid.abs() {
            // interval can no longer be split; keep it as final
            heap.push(ByError(Segment {
                error: 0.0,
                ..worst
            }));
            total_err -= worst.error;
            if heap.iter().all(|s| s.0.error == 0.0) {
                break;
            }
            continue;
        }
        let left = gk21(&mut f, worst.a, mid);
        let right = gk21(&mut f, mid, worst.b);
        evaluations += 42;
        total = total - worst.value + left.value + right.value;
        total_err += left.error + right.error - worst.error;
        heap.push(ByError(left));
        heap.push(ByError(right));
        intervals += 1;
    }
    // resum to avoid drift from the running updates
    let mut value = T::zero();
    let mut error = 0.0;
    for s in heap.iter() {
        value = value + s.0.value;
        error += s.0.error;
    }
    let tol = opts.abs_tol.max(opts.rel_tol * value.magnitude());
    QuadResult {
        value,
        error,
        evaluations,
        converged: error.is_finite() && error <= tol * (1.0 + 1e-9),
    }
}

/// Integrates `f` over `[a, b]` where either bound may be infinite.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> QuadResult<T> {
    integrate_dyn(&mut f, a, b, opts)
}

fn integrate_dyn<T: QuadValue>(
    f: &mut dyn FnMut(f64) -> T,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> QuadResult<T> {
    if a > b {
        let r = integrate_dyn(f, b, a, opts);
        return QuadResult {
            value: r.value * -1.0,
            ..r
        };
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => integrate_finite(f, a, b, opts),
        (true, false) => integrate_finite(
            |t: f64| {
                let s = 1.0 - t;
                f(a + t / s) * (1.0 / (s * s))
            },
            0.0,
            1.0,
            opts,
        ),
        (false, true) => integrate_finite(
            |t: f64| {
                let s = 1.0 - t;
                f(b - t / s) * (1.0 / (s * s))
            },
            0.0,
            1.0,
            opts,
        ),
        (false, false) => {
            let half = QuadOptions {
                abs_tol: 0.5 * opts.abs_tol,
                ..*opts
            };
            let left = integrate_dyn(f, f64::NEG_INFINITY, 0.0, &half);
            let right = integrate_dyn(f, 0.0, f64::INFINITY, &half);
            QuadResult {
                value: left.value + right.value,
                error: left.error + right.error,
                evaluations: left.evaluations + right.evaluations,
                converged: left.converged && right.converged,
            }
        }
    }
}

/// Integrates over `[a, b]` split at the given interior breakpoints.
pub fn integrate_pieces<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> QuadResult<T> {
    let mut pts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b && x.is_finite())
        .collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let mut knots = Vec::with_capacity(pts.len() + 2);
    knots.push(a);
    knots.extend(pts);
    knots.push(b);
    let pieces = (knots.len() - 1) as f64;
    let piece_opts = QuadOptions {
        abs_tol: opts.abs_tol / pieces,
        ..*opts
    };
    let mut out = QuadResult {
        value: T::zero(),
        error: 0.0,
        evaluations: 0,
        converged: true,
    };
    for w in knots.windows(2) {
        let r = integrate_dyn(&mut f, w[0], w[1], &piece_opts);
        out.value = out.value + r.value;
        out.error += r.error;
        out.evaluations += r.evaluations;
        out.converged &= r.converged;
    }
    let tol = opts.abs_tol.max(opts.rel_tol * out.value.magnitude());
    if !out.converged && out.error <= tol {
        out.converged = true;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, &QuadOptions::default());
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
        assert!(r.converged);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, &QuadOptions::default());
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn gaussian_over_real_line() {
        let r = integrate(
            |x: f64| (-0.5 * x * x).exp(),
            f64::NEG_INFINITY,
            f64::INFINITY,
            &QuadOptions::default(),
        );
        assert!((r.value - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn complex_oscillatory() {
        let r = integrate(
            |x: f64| Complex64::new(0.0, 3.0 * x).exp(),
            0.0,
            1.0,
            &QuadOptions::default(),
        );
        let exact = (Complex64::new(0.0, 3.0).exp() - 1.0) / Complex64::new(0.0, 3.0);
        assert!((r.value - exact).norm() < 1e-13);
    }

    #[test]
    fn reversed_bounds_change_sign() {
        let r = integrate(|x: f64| x, 1.0, 0.0, &QuadOptions::default());
        assert!((r.value + 0.5).abs() < 1e-15);
    }

    #[test]
    fn pieces_handle_kink() {
        let r = integrate_pieces(|x: f64| x.abs(), -1.0, 2.0, &[0.0], &QuadOptions::default());
        assert!((r.value - 2.5).abs() < 1e-14);
    }
}
