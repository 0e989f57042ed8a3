//! Empirical `L_p` norms with bootstrap standard errors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of bootstrap resamples.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

/// Seed of the bootstrap generator (fixed for reproducible reports).
pub(crate) const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

/// A norm estimate with its bootstrap standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormEstimate {
    pub value: f64,
    pub std_error: f64,
}

/// `(mean |x|^p)^{1/p}`.
pub(crate) fn lp(samples: &[f64], p: f64) -> f64 {
    let n = samples.len() as f64;
    let m: f64 = samples.iter().map(|x| x.abs().powf(p)).sum::<f64>() / n;
    m.powf(1.0 / p)
}

/// Standard deviation of a set of replicates.
pub(crate) fn spread(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Bootstrap replicates of `stat` on resamples of `samples`.
pub(crate) fn bootstrap<F: Fn(&[f64]) -> f64>(samples: &[f64], stat: F, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = samples.len();
    let mut buf = vec![0.0; n];
    (0..BOOTSTRAP_RESAMPLES)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = samples[rng.random_range(0..n)];
            }
            stat(&buf)
        })
        .collect()
}

/// Empirical `L_p` norm `(mean |x|^p)^{1/p}` with a bootstrap standard error
/// from 200 resamples.
pub fn lp_norm(samples: &[f64], p: f64) -> Result<NormEstimate> {
    if samples.len() < 2 {
        return Err(Error::InsufficientData("an L_p norm needs at least 2 samples".into()));
    }
    if !(p >= 1.0) {
        return Err(Error::invalid("p must be at least 1"));
    }
    let value = lp(samples, p);
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let reps = bootstrap(samples, |s| lp(s, p), &mut rng);
    Ok(NormEstimate {
        value,
        std_error: spread(&reps),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(lp_norm(&[0.0; 10], 2.0).unwrap().value, 0.0);
        assert_eq!(lp_norm(&[1.0, -1.0], 2.0).unwrap().value, 1.0);
    }
}
