//! Empirical growth envelope of a strategy near maturity:
//! `sup |ϑ_t| (T - t)^{(1-θ)/2} / Θ(η)_t` over sampled `(t, path)` pairs.

use serde::{Deserialize, Serialize};

/// One sampled strategy value with the matching weight `Θ(η)_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategySample {
    pub t: f64,
    pub theta: f64,
    /// `Θ(η)_t = sup_{u ≤ t} S_u^{η-1}`.
    pub weight: f64,
}

/// Supremum of the normalized strategy and its profile over time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthEnvelope {
    pub sup_ratio: f64,
    /// `(t, max ratio at t)` in increasing `t`.
    pub profile: Vec<(f64, f64)>,
}

/// Growth envelope of `samples` for maturity `T` and exponent `θ`;
/// samples at or after maturity and with zero weight are ignored.  The
/// exponent `η` only enters through the supplied weights.
pub fn growth_envelope(samples: &[StrategySample], maturity: f64, theta: f64, _eta: f64) -> GrowthEnvelope {
    let mut profile: Vec<(f64, f64)> = Vec::new();
    let mut sorted: Vec<&StrategySample> = samples
        .iter()
        .filter(|s| s.t < maturity && s.weight > 0.0)
        .collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    for s in sorted {
        let r = s.theta.abs() * (maturity - s.t).powf(0.5 * (1.0 - theta)) / s.weight;
        match profile.last_mut() {
            Some(last) if last.0 == s.t => last.1 = last.1.max(r),
            _ => profile.push((s.t, r)),
        }
    }
    let sup_ratio = profile.iter().map(|p| p.1).fold(0.0, f64::max);
    GrowthEnvelope { sup_ratio, profile }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_payoff_has_zero_envelope() {
        let s: Vec<_> = (0..10)
            .map(|i| StrategySample {
                t: i as f64 / 10.0,
                theta: 0.0,
                weight: 1.0,
            })
            .collect();
        assert_eq!(growth_envelope(&s, 1.0, 0.5, 0.0).sup_ratio, 0.0);
    }

    #[test]
    fn linear_payoff_is_flat_for_theta_one() {
        let s: Vec<_> = (0..10)
            .map(|i| StrategySample {
                t: i as f64 / 10.0,
                theta: 1.0,
                weight: 2.0,
            })
            .collect();
        let e = growth_envelope(&s, 1.0, 1.0, 1.0);
        assert!(e.profile.iter().all(|p| p.1 == 0.5));
        assert_eq!(e.sup_ratio, 0.5);
    }
}
