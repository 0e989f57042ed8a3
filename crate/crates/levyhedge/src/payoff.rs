//! European payoffs `g(S_T)` and their regularity classes.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Payoff function type used by [`PayoffKind::Custom`].
pub type PayoffFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user supplied payoff.
#[derive(Clone)]
pub struct CustomPayoff {
    pub name: String,
    pub f: PayoffFn,
}

impl fmt::Debug for CustomPayoff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomPayoff({})", self.name)
    }
}

impl PartialEq for CustomPayoff {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.f, &other.f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PayoffKind {
    Call { strike: f64 },
    Put { strike: f64 },
    /// `((y - K)^+)^η`.
    PowerCall { strike: f64, eta: f64 },
    /// `1{y ≥ K}`.
    Binary { strike: f64 },
    /// `g(y) = y`.
    Linear,
    Constant { value: f64 },
    #[serde(skip)]
    Custom(CustomPayoff),
}

/// A payoff with its declared Hölder exponent `η` and optional Sobolev index
/// `q` (membership in `W̊^{1,q}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Payoff {
    #[serde(flatten)]
    pub kind: PayoffKind,
    pub holder_eta: f64,
    #[serde(default)]
    pub sobolev_q: Option<f64>,
}

impl Payoff {
    /// Payoff with the canonical Hölder exponent of its kind.
    pub fn new(kind: PayoffKind) -> Result<Self> {
        let eta = match &kind {
            PayoffKind::Call { .. } | PayoffKind::Put { .. } | PayoffKind::Linear => 1.0,
            PayoffKind::Constant { .. } => 1.0,
            PayoffKind::PowerCall { eta, .. } => *eta,
            PayoffKind::Binary { .. } => 0.0,
            PayoffKind::Custom(_) => {
                return Err(Error::invalid(
                    "custom payoffs need an explicit Hölder exponent; use Payoff::custom",
                ))
            }
        };
        let p = Payoff {
            kind,
            holder_eta: eta,
            sobolev_q: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn call(strike: f64) -> Self {
        Payoff::new(PayoffKind::Call { strike }).expect("valid call")
    }

    pub fn put(strike: f64) -> Self {
        Payoff::new(PayoffKind::Put { strike }).expect("valid put")
    }

    pub fn binary(strike: f64) -> Self {
        Payoff::new(PayoffKind::Binary { strike }).expect("valid binary")
    }

    pub fn linear() -> Self {
        Payoff::new(PayoffKind::Linear).expect("valid linear")
    }

    pub fn constant(value: f64) -> Self {
        Payoff::new(PayoffKind::Constant { value }).expect("valid constant")
    }

    pub fn power_call(strike: f64, eta: f64) -> Result<Self> {
        Payoff::new(PayoffKind::PowerCall { strike, eta })
    }

    /// Custom payoff with declared regularity.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        holder_eta: f64,
        sobolev_q: Option<f64>,
    ) -> Result<Self> {
        let p = Payoff {
            kind: PayoffKind::Custom(CustomPayoff {
                name: name.into(),
                f: Arc::new(f),
            }),
            holder_eta,
            sobolev_q,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_sobolev(mut self, q: f64) -> Self {
        self.sobolev_q = Some(q);
        self
    }

    /// Checks parameters and that the declared exponent matches the kind.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.holder_eta) {
            return Err(Error::invalid("Hölder exponent must lie in [0, 1]"));
        }
        if let Some(q) = self.sobolev_q {
            if !(q >= 1.0) {
                return Err(Error::invalid("Sobolev index must be at least 1"));
            }
        }
        let strike_ok = |k: f64| {
            if k > 0.0 && k.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid("strike must be positive"))
            }
        };
        let expect = |eta: f64| {
            if (self.holder_eta - eta).abs() < 1e-12 {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "declared Hölder exponent {} inconsistent with payoff kind (expected {eta})",
                    self.holder_eta
                )))
            }
        };
        match &self.kind {
            PayoffKind::Call { strike } | PayoffKind::Put { strike } => {
                strike_ok(*strike)?;
                expect(1.0)
            }
            PayoffKind::PowerCall { strike, eta } => {
                strike_ok(*strike)?;
                if !(*eta > 0.0 && *eta <= 1.0) {
                    return Err(Error::invalid("power call exponent must lie in (0, 1]"));
                }
                expect(*eta)
            }
            PayoffKind::Binary { strike } => {
                strike_ok(*strike)?;
                expect(0.0)
            }
            PayoffKind::Linear => expect(1.0),
            PayoffKind::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("constant payoff must be finite"))
                }
            }
            PayoffKind::Custom(_) => Ok(()),
        }
    }

    /// `g(y)`.
    pub fn eval(&self, y: f64) -> f64 {
        match &self.kind {
            PayoffKind::Call { strike } => (y - strike).max(0.0),
            PayoffKind::Put { strike } => (strike - y).max(0.0),
            PayoffKind::PowerCall { strike, eta } => (y - strike).max(0.0).powf(*eta),
            PayoffKind::Binary { strike } => {
                if y >= *strike {
                    1.0
                } else {
                    0.0
                }
            }
            PayoffKind::Linear => y,
            PayoffKind::Constant { value } => *value,
            PayoffKind::Custom(c) => (c.f)(y),
        }
    }

    /// Strike of the kinds that have one.
    pub fn strike(&self) -> Option<f64> {
        match &self.kind {
            PayoffKind::Call { strike }
            | PayoffKind::Put { strike }
            | PayoffKind::PowerCall { strike, .. }
            | PayoffKind::Binary { strike } => Some(*strike),
            _ => None,
        }
    }

    /// Whether `g` grows at most linearly, i.e. `g(S_T)` is integrable whenever `S_T` is.
    pub fn linear_growth(&self) -> bool {
        !matches!(self.kind, PayoffKind::Custom(_))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn declared_exponents() {
        assert_eq!(Payoff::call(1.0).holder_eta, 1.0);
        assert_eq!(Payoff::binary(1.0).holder_eta, 0.0);
        assert_eq!(Payoff::power_call(1.0, 0.4).unwrap().holder_eta, 0.4);
        let mut bad = Payoff::call(1.0);
        bad.holder_eta = 0.5;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn serde_round_trip() {
        let p = Payoff::power_call(1.1, 0.5).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"kind\":\"power_call\""));
        let q: Payoff = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }

    proptest! {
        #[test]
        fn holder_bound_holds_on_random_pairs(x in 0.01f64..5.0, y in 0.01f64..5.0, k in 0.5f64..2.0, eta in 0.1f64..1.0) {
            for p in [Payoff::call(k), Payoff::put(k), Payoff::power_call(k, eta).unwrap()] {
                let lhs = (p.eval(x) - p.eval(y)).abs();
                let rhs = (x - y).abs().powf(p.holder_eta);
                prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-15);
            }
            let b = Payoff::binary(k);
            prop_assert!((b.eval(x) - b.eval(y)).abs() <= 1.0);
        }
    }
}
