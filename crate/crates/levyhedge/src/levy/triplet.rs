//! Lévy triplets, characteristic exponents and the conversions between the
//! exponential and the stochastic-exponential representation of a price.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::measure::{JumpMap, Kappa, LevyMeasure};
use crate::error::{Error, Result};
use crate::quad::QuadOptions;

/// Measure under which a triplet describes the process.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MeasureTag {
    #[default]
    Original,
    Minimal,
    Other(String),
}

/// Characteristics `(γ, σ, ν)` with truncation function `x 1{|x| ≤ 1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyTriplet {
    pub gamma: f64,
    pub sigma: f64,
    pub nu: LevyMeasure,
    #[serde(default)]
    pub measure_tag: MeasureTag,
}

impl LevyTriplet {
    pub fn new(gamma: f64, sigma: f64, nu: LevyMeasure) -> Result<Self> {
        let t = LevyTriplet {
            gamma,
            sigma,
            nu,
            measure_tag: MeasureTag::Original,
        };
        t.validate()?;
        Ok(t)
    }

    /// Triplet whose drift is chosen so that the price drift `γ_S` equals
    /// `gamma_s`.
    pub fn with_gamma_s(gamma_s: f64, sigma: f64, nu: LevyMeasure) -> Result<Self> {
        let k = nu.kappa(Complex64::new(0.0, -1.0))?.re;
        LevyTriplet::new(gamma_s - 0.5 * sigma * sigma - k, sigma, nu)
    }

    pub fn with_tag(mut self, tag: MeasureTag) -> Self {
        self.measure_tag = tag;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be finite and nonnegative"));
        }
        if !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be finite"));
        }
        self.nu.validate()
    }

    /// Prepared characteristic exponent.
    pub fn exponent(&self) -> Result<CharacteristicExponent> {
        Ok(CharacteristicExponent {
            gamma: self.gamma,
            sigma: self.sigma,
            kappa: Kappa::new(&self.nu)?,
        })
    }

    /// `ψ(u)` with `E e^{iuX_t} = e^{-tψ(u)}`.
    pub fn characteristic_exponent(&self, u: Complex64) -> Result<Complex64> {
        self.exponent()?.eval(u)
    }
}

/// `ψ(u) = -iγu + σ²u²/2 - κ(u)` with a prepared `κ`.
#[derive(Debug, Clone)]
pub struct CharacteristicExponent {
    pub gamma: f64,
    pub sigma: f64,
    pub kappa: Kappa,
}

impl CharacteristicExponent {
    pub fn eval(&self, u: Complex64) -> Result<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        Ok(-i * self.gamma * u + 0.5 * self.sigma * self.sigma * u * u - self.kappa.eval(u)?)
    }
}

/// Free function form of [`LevyTriplet::characteristic_exponent`].
pub fn characteristic_exponent(triplet: &LevyTriplet, u: Complex64) -> Result<Complex64> {
    triplet.characteristic_exponent(u)
}

fn conv_opts() -> QuadOptions {
    QuadOptions::with_tol(1e-15, 1e-13)
}

/// `ln(1 + x) - x` without cancellation near zero.
fn log1p_remainder(x: f64) -> f64 {
    if x.abs() < 0.05 {
        let mut term = x;
        let mut sum = 0.0;
        for k in 2..16 {
            term *= -x;
            sum += term / k as f64;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

/// Triplet of `Z` with `e^X = 𝓔(Z)`.
pub fn exp_to_stochastic_exp(x: &LevyTriplet) -> Result<LevyTriplet> {
    let ln2 = std::f64::consts::LN_2;
    let f = |v: f64| -> f64 {
        if v <= -1.0 {
            v.exp_m1()
        } else if v <= ln2 {
            crate::special::exp_remainder1_real(v)
        } else if v <= 1.0 {
            -v
        } else {
            0.0
        }
    };
    let corr = x
        .nu
        .integrate(&f, &[ln2], &conv_opts())
        .ok_or_fail("γ_Z compensator correction")?;
    Ok(LevyTriplet {
        gamma: x.gamma + 0.5 * x.sigma * x.sigma + corr,
        sigma: x.sigma,
        nu: x.nu.image(&[JumpMap::ExpM1]),
        measure_tag: x.measure_tag.clone(),
    })
}

/// Triplet of `Y` with `𝓔(Z) = e^Y`; requires the jumps of `Z` to exceed `-1`.
pub fn stochastic_to_exp(z: &LevyTriplet) -> Result<LevyTriplet> {
    let (lo, _) = z.nu.support();
    if !z.nu.is_zero() && (lo < -1.0 || z.nu.atoms().iter().any(|(x, _)| *x <= -1.0)) {
        return Err(Error::NonPositiveExponential);
    }
    let e = std::f64::consts::E;
    let a = 1.0 / e - 1.0;
    let f = |v: f64| -> f64 {
        if v <= -1.0 {
            0.0
        } else if v < a {
            -v
        } else if v <= 1.0 {
            log1p_remainder(v)
        } else if v <= e - 1.0 {
            v.ln_1p()
        } else {
            0.0
        }
    };
    let corr = z
        .nu
        .integrate(&f, &[a, e - 1.0], &conv_opts())
        .ok_or_fail("γ_Y compensator correction")?;
    Ok(LevyTriplet {
        gamma: z.gamma - 0.5 * z.sigma * z.sigma + corr,
        sigma: z.sigma,
        nu: z.nu.image(&[JumpMap::Log1p]),
        measure_tag: z.measure_tag.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::measure::JumpLaw;

    #[test]
    fn brownian_and_drift_exponents() {
        let bm = LevyTriplet::new(0.0, 1.0, LevyMeasure::Zero).unwrap();
        let v = bm.characteristic_exponent(Complex64::new(2.0, 0.0)).unwrap();
        assert!((v - Complex64::new(2.0, 0.0)).norm() < 1e-15);
        let drift = LevyTriplet::new(3.0, 0.0, LevyMeasure::Zero).unwrap();
        let v = drift.characteristic_exponent(Complex64::new(1.0, 0.0)).unwrap();
        assert!((v - Complex64::new(0.0, -3.0)).norm() < 1e-15);
    }

    #[test]
    fn diffusion_conversion() {
        let t = LevyTriplet::new(-0.02, 0.2, LevyMeasure::Zero).unwrap();
        let z = exp_to_stochastic_exp(&t).unwrap();
        assert!((z.gamma - 0.0).abs() < 1e-15);
        let back = stochastic_to_exp(&z).unwrap();
        assert!((back.gamma + 0.02).abs() < 1e-15);
    }

    #[test]
    fn jump_at_minus_one_and_a_half_is_rejected() {
        let z = LevyTriplet::new(
            0.0,
            0.1,
            LevyMeasure::CompoundPoisson {
                intensity: 1.0,
                jump_law: JumpLaw::Atoms {
                    sizes: vec![-1.5],
                    probs: vec![1.0],
                },
            },
        )
        .unwrap();
        assert_eq!(stochastic_to_exp(&z), Err(Error::NonPositiveExponential));
    }

    #[test]
    fn point_mass_round_trip() {
        let x0 = 0.4;
        let nu = LevyMeasure::CompoundPoisson {
            intensity: 1.0,
            jump_law: JumpLaw::Atoms {
                sizes: vec![x0],
                probs: vec![1.0],
            },
        };
        let t = LevyTriplet::new(0.1, 0.0, nu).unwrap();
        let z = exp_to_stochastic_exp(&t).unwrap();
        assert!((z.nu.atoms()[0].0 - x0.exp_m1()).abs() < 1e-15);
        let y = stochastic_to_exp(&z).unwrap();
        assert!((y.nu.atoms()[0].0 - x0).abs() < 1e-15);
        assert!((y.gamma - 0.1).abs() < 1e-14);
    }

    #[test]
    fn log1p_remainder_matches_libm() {
        for x in [-0.04f64, -1e-2, 0.02, 0.049] {
            let exact = x.ln_1p() - x;
            assert!(((log1p_remainder(x) - exact) / exact).abs() < 1e-11);
        }
        let x = 1e-7f64;
        let series = -x * x / 2.0 + x * x * x / 3.0;
        assert!(((log1p_remainder(x) - series) / series).abs() < 1e-12);
    }

    #[test]
    fn merton_closed_form_exponent() {
        let nu = LevyMeasure::Merton {
            lambda: 0.5,
            mu_j: -0.1,
            sigma_j: 0.2,
        };
        let t = LevyTriplet::new(0.0, 0.2, nu.clone()).unwrap();
        let u = Complex64::new(1.0, 0.0);
        let psi = t.characteristic_exponent(u).unwrap();
        // the exponent relative to the truncation function: drift term of the truncated mean added back
        let i = Complex64::new(0.0, 1.0);
        let tm = nu
            .integrate_over(&|x| x, -1.0, 1.0, &[], &QuadOptions::default())
            .value;
        let closed = 0.5 * 0.04 * u * u - 0.5 * ((i * u * -0.1 - u * u * 0.02).exp() - 1.0) + i * u * tm;
        assert!((psi - closed).norm() < 1e-12, "{psi} vs {closed}");
    }
}
