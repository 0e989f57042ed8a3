//! Convergence-rate regression and tail-decay estimation.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::norms::{bootstrap, lp, spread, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED};
use crate::error::{Error, Result};

/// Which error functional the rate is measured in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorKind {
    L2,
    Lp { p: f64 },
    /// Each `n` carries precomputed estimates: the first value is the
    /// estimate, further values (if any) are replicates for its spread.
    BmoEstimate,
}

/// Outcome of comparing the fitted slope with the prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

/// One point of the log-log fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: usize,
    pub error: f64,
    pub std_error: f64,
}

/// Fitted rate with its bootstrap confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub points: Vec<RatePoint>,
    pub slope: f64,
    #[serde(rename = "ci")]
    pub slope_ci: (f64, f64),
    #[serde(rename = "predicted")]
    pub predicted_slope: f64,
    pub verdict: Verdict,
}

/// Smallest number of samples per `n` for sample-based error kinds.
pub const MIN_SAMPLES_PER_N: usize = 1_000;

/// Weighted least-squares slope of `ln e` on `ln n` with weights
/// `(e/se)²` (equal weights if any standard error vanishes).
fn wls_slope(points: &[(f64, f64, f64)]) -> f64 {
    let equal = points.iter().any(|p| !(p.2 > 0.0));
    let w: Vec<f64> = points
        .iter()
        .map(|p| if equal { 1.0 } else { (p.1 / p.2).powi(2) })
        .collect();
    let sw: f64 = w.iter().sum();
    let (xs, ys): (Vec<f64>, Vec<f64>) = points.iter().map(|p| (p.0.ln(), p.1.ln())).unzip();
    let mx = xs.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() / sw;
    let my = ys.iter().zip(&w).map(|(y, w)| y * w).sum::<f64>() / sw;
    let sxy: f64 = (0..xs.len()).map(|i| w[i] * (xs[i] - mx) * (ys[i] - my)).sum();
    let sxx: f64 = (0..xs.len()).map(|i| w[i] * (xs[i] - mx).powi(2)).sum();
    sxy / sxx
}

/// Percentile interval of the replicates.
fn percentile_interval(mut v: Vec<f64>, level: f64) -> (f64, f64) {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(f64::total_cmp);
    let q = |p: f64| v[((p * (v.len() - 1) as f64).round() as usize).min(v.len() - 1)];
    (q((1.0 - level) / 2.0), q((1.0 + level) / 2.0))
}

/// Fits `error ≈ c n^slope` and compares the slope with `-1/(2r)`.
///
/// With at least six values of `n` the smallest is dropped.  The confidence
/// interval is the 95% percentile interval of slopes refitted on bootstrap
/// resamples of the samples of every `n`.
pub fn convergence_rate(runs: &BTreeMap<usize, Vec<f64>>, kind: ErrorKind, predicted_r: f64) -> Result<RateReport> {
    if runs.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "need at least 4 values of n, got {}",
            runs.len()
        )));
    }
    if !(predicted_r > 0.0) {
        return Err(Error::invalid("the predicted rate r must be positive"));
    }
    let p = match kind {
        ErrorKind::L2 => Some(2.0),
        ErrorKind::Lp { p } => Some(p),
        ErrorKind::BmoEstimate => None,
    };
    if p.is_some() {
        if let Some((n, v)) = runs.iter().find(|(_, v)| v.len() < MIN_SAMPLES_PER_N) {
            return Err(Error::InsufficientData(format!(
                "n = {n} has {} samples, need {MIN_SAMPLES_PER_N}",
                v.len()
            )));
        }
    } else if runs.values().any(|v| v.is_empty()) {
        return Err(Error::InsufficientData("an estimate is missing".into()));
    }
    let mut entries: Vec<(&usize, &Vec<f64>)> = runs.iter().collect();
    if entries.len() >= 6 {
        entries.remove(0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut points = Vec::with_capacity(entries.len());
    let mut replicates: Vec<Vec<f64>> = Vec::with_capacity(entries.len());
    for (n, v) in &entries {
        let (error, reps) = match p {
            Some(p) => (lp(v, p), bootstrap(v, |s| lp(s, p), &mut rng)),
            None => (v[0], v.to_vec()),
        };
        let std_error = if reps.len() > 1 { spread(&reps) } else { 0.0 };
        points.push(RatePoint {
            n: **n,
            error,
            std_error,
        });
        replicates.push(reps);
    }
    let predicted_slope = -1.0 / (2.0 * predicted_r);
    let usable = points.iter().all(|q| q.error > 0.0 && q.error.is_finite());
    if !usable {
        return Ok(RateReport {
            points,
            slope: f64::NAN,
            slope_ci: (f64::NAN, f64::NAN),
            predicted_slope,
            verdict: Verdict::Inconclusive,
        });
    }
    let triples: Vec<(f64, f64, f64)> = points.iter().map(|q| (q.n as f64, q.error, q.std_error)).collect();
    let slope = wls_slope(&triples);
    let boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
        .map(|b| {
            let t: Vec<(f64, f64, f64)> = points
                .iter()
                .zip(&replicates)
                .map(|(q, r)| (q.n as f64, r[b % r.len()], q.std_error))
                .collect();
            if t.iter().any(|x| !(x.1 > 0.0)) {
                f64::NAN
            } else {
                wls_slope(&t)
            }
        })
        .collect();
    let slope_ci = if replicates.iter().all(|r| r.len() > 1) {
        percentile_interval(boot, 0.95)
    } else {
        (slope, slope)
    };
    let verdict = if !slope.is_finite() || !slope_ci.0.is_finite() {
        Verdict::Inconclusive
    } else if slope_ci.0 <= predicted_slope && predicted_slope <= slope_ci.1 {
        Verdict::Consistent
    } else {
        Verdict::Inconsistent
    };
    Ok(RateReport {
        points,
        slope,
        slope_ci,
        predicted_slope,
        verdict,
    })
}

/// Polynomial tail fit of `P(|X| > u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    /// `α` in `P(|X| > u) ≈ c u^{-α}` over the thresholds.
    pub exponent: f64,
    /// Coefficient of determination of the log-log fit.
    pub r_squared: f64,
    /// Exponents between consecutive thresholds (increasing for
    /// super-polynomial tails).
    pub local_exponents: Vec<f64>,
}

/// Smallest number of samples for a tail fit.
pub const MIN_TAIL_SAMPLES: usize = 100_000;

/// Log-log regression of the empirical survival function of `|x|` at the
/// given thresholds (thresholds with no exceedances are skipped).
pub fn tail_decay(samples: &[f64], thresholds: &[f64]) -> Result<TailFit> {
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "tail fits need {MIN_TAIL_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    let mut abs: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let n = abs.len() as f64;
    let pts: Vec<(f64, f64)> = thresholds
        .iter()
        .filter(|u| **u > 0.0)
        .filter_map(|&u| {
            let above = abs.len() - abs.partition_point(|x| *x <= u);
            (above > 0).then(|| (u.ln(), (above as f64 / n).ln()))
        })
        .collect();
    if pts.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two thresholds with exceedances (degenerate samples)".into(),
        ));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let local_exponents = pts.windows(2).map(|w| -(w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
    Ok(TailFit {
        exponent: -slope,
        r_squared,
        local_exponents,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(rate: f64) -> BTreeMap<usize, Vec<f64>> {
        [8usize, 16, 32, 64, 128]
            .iter()
            .map(|&n| {
                let c = (n as f64).powf(-rate);
                (n, (0..1000).map(|i| if i % 2 == 0 { c } else { -c }).collect())
            })
            .collect()
    }

    #[test]
    fn exact_power_laws() {
        let r = convergence_rate(&synthetic(0.5), ErrorKind::L2, 1.0).unwrap();
        assert!((r.slope + 0.5).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Consistent);
        let r = convergence_rate(&synthetic(1.0 / 3.0), ErrorKind::L2, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Inconsistent);
    }
}
