//! Special functions: normal distribution helpers, the modified Bessel
//! function of the second kind, and cancellation-free exponential remainders.

use num_complex::Complex64;
use libm::erfc;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Exponentially scaled modified Bessel function `exp(x) K_nu(x)` for `x > 0`.
///
/// Evaluated by the trapezoidal rule on `K_nu(x) = ∫_0^∞ exp(-x cosh t) cosh(nu t) dt`;
/// the integrand is entire and decays double exponentially, so the rule
/// converges geometrically in the step size.
pub fn bessel_k_scaled(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0, "bessel_k_scaled requires x > 0");
    let h = (0.1f64).min(0.25 / x.sqrt());
    let term = |t: f64| (-x * (t.cosh() - 1.0)).exp() * (nu * t).cosh();
    let mut sum = 0.5 * term(0.0);
    let mut k = 1;
    loop {
        let v = term(k as f64 * h);
        sum += v;
        if v < 1e-18 * sum || k > 100_000 {
            break;
        }
        k += 1;
    }
    sum * h
}

/// Modified Bessel function of the second kind `K_1(x)`.
pub fn bessel_k1(x: f64) -> f64 {
    bessel_k_scaled(1.0, x) * (-x).exp()
}

/// `exp(w) - 1 - w` without cancellation for small `|w|`.
pub fn exp_remainder1(w: Complex64) -> Complex64 {
    if w.norm() < 0.05 {
        let mut term = w * w * 0.5;
        let mut sum = term;
        for k in 3..12 {
            term = term * w / k as f64;
            sum += term;
        }
        sum
    } else {
        w.exp() - 1.0 - w
    }
}

/// `exp(x) - 1 - x` without cancellation for small `|x|`.
pub fn exp_remainder1_real(x: f64) -> f64 {
    if x.abs() < 0.05 {
        let mut term = x * x * 0.5;
        let mut sum = term;
        for k in 3..12 {
            term *= x / k as f64;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

/// `exp(w) - 1` for complex `w`, accurate for small `|w|`.
pub fn exp_m1_complex(w: Complex64) -> Complex64 {
    if w.norm() < 0.05 {
        exp_remainder1(w) + w
    } else {
        w.exp() - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k1_reference_values() {
        // reference values from Abramowitz & Stegun table 9.8
        let cases = [
            (0.1, 9.853844780870606),
            (1.0, 0.6019072301972346),
            (2.5, 0.07389081634774707),
            (10.0, 1.864877345382558e-5),
        ];
        for (x, k) in cases {
            let v = bessel_k1(x);
            assert!(((v - k) / k).abs() < 1e-13, "K1({x}) = {v}, expected {k}");
        }
    }

    #[test]
    fn k_half_closed_form() {
        // K_{1/2}(x) = sqrt(pi / (2x)) exp(-x)
        for x in [1e-3, 0.3, 4.0, 250.0] {
            let v = bessel_k_scaled(0.5, x);
            let e = (std::f64::consts::PI / (2.0 * x)).sqrt();
            assert!(((v - e) / e).abs() < 1e-13, "x = {x}");
        }
    }

    #[test]
    fn remainder_matches_direct_for_moderate_arguments() {
        let w = Complex64::new(0.3, -0.7);
        assert!((exp_remainder1(w) - (w.exp() - 1.0 - w)).norm() < 1e-15);
        let w = Complex64::new(0.01, 0.02);
        assert!((exp_remainder1(w) - (w.exp() - 1.0 - w)).norm() < 1e-15);
        assert!((exp_remainder1_real(1e-9) - 5e-19).abs() < 1e-27);
    }

    #[test]
    fn normal_cdf_symmetry() {
        for x in [0.0, 0.5, 1.7, 4.0] {
            assert!((norm_cdf(x) + norm_cdf(-x) - 1.0).abs() < 4e-16);
        }
        let v = norm_cdf(1.96);
        assert!((v - 0.9750021048517795).abs() < 1e-15, "{v:e}");
    }
}
