//! Grid-restricted estimators of the weighted BMO norm and of the `SM_p`
//! constant of a weight.
//!
//! Conditional expectations given `𝓕_a` are replaced by averages over cells
//! of paths with similar state `(S_a, Θ(η)_a)`: paths are split into
//! equal-count strata by `S_a` and each stratum into equal-count cells by
//! `Θ(η)_a`, with about [`CELL_SIZE`] paths per cell.  Each cell contributes
//! the lower confidence bound `mean - 2·se` of the normalized quantity, so
//! the estimate is a lower bound of the supremum over deterministic times,
//! which is itself a lower bound of the supremum over stopping times.

use rayon::prelude::*;

use super::weights::WeightPath;
use crate::error::{Error, Result};

/// Target number of paths per regression cell.
pub const CELL_SIZE: usize = 50;

/// Smallest number of paths accepted by the estimators.
pub const MIN_PATHS: usize = 10_000;

/// Equal-count cells of path indices by `(S_a, Θ_a)` at metric index `a`.
fn cells(weights: &[WeightPath], a: usize) -> Vec<Vec<usize>> {
    let n = weights.len();
    let q = ((n / CELL_SIZE) as f64).sqrt().floor().max(1.0) as usize;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|i, j| weights[*i].price[a].total_cmp(&weights[*j].price[a]).then(i.cmp(j)));
    let mut out = Vec::with_capacity(q * q);
    for stratum in split(&idx, q) {
        let mut s = stratum.to_vec();
        s.sort_by(|i, j| {
            weights[*i].theta_weight[a]
                .total_cmp(&weights[*j].theta_weight[a])
                .then(i.cmp(j))
        });
        for c in split(&s, q) {
            out.push(c.to_vec());
        }
    }
    out
}

/// Splits `v` into `q` contiguous parts of nearly equal length.
fn split(v: &[usize], q: usize) -> Vec<&[usize]> {
    let n = v.len();
    (0..q).map(|k| &v[k * n / q..(k + 1) * n / q]).filter(|c| !c.is_empty()).collect()
}

/// `mean - 2·se` of the values.
fn lower_bound(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return mean;
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    mean - 2.0 * (var / n).sqrt()
}

fn check(weights: &[WeightPath], time_grid: &[usize]) -> Result<()> {
    if weights.len() < MIN_PATHS {
        return Err(Error::InsufficientPaths {
            got: weights.len(),
            need: MIN_PATHS,
        });
    }
    let len = weights[0].len();
    if weights.iter().any(|w| w.len() != len) {
        return Err(Error::invalid("weight paths must share the metric grid"));
    }
    if time_grid.iter().any(|a| *a >= len) {
        return Err(Error::invalid("time-grid index outside the metric grid"));
    }
    Ok(())
}

/// `max_a max_cells LCB(|E_T - E_a|^p / Φ̄_a^p)^{1/p}` over the metric
/// indices in `time_grid`.
///
/// `error_paths[k]` holds `E` of path `k` at the metric times, the last
/// entry being `E_T`; the value at `a` stands in for `E_{a-}` (they differ
/// only if a jump happens exactly at `a`).
pub fn weighted_bmo_estimate(
    error_paths: &[Vec<f64>],
    weight_paths: &[WeightPath],
    time_grid: &[usize],
    p: f64,
) -> Result<f64> {
    check(weight_paths, time_grid)?;
    if error_paths.len() != weight_paths.len() {
        return Err(Error::invalid("error and weight paths must pair up"));
    }
    let len = weight_paths[0].len();
    if error_paths.iter().any(|e| e.len() != len) {
        return Err(Error::invalid("error paths must share the metric grid"));
    }
    let best = time_grid
        .par_iter()
        .map(|&a| {
            cells(weight_paths, a)
                .iter()
                .map(|c| {
                    let v: Vec<f64> = c
                        .iter()
                        .map(|&k| {
                            let e = &error_paths[k];
                            let d = (e[len - 1] - e[a]).abs();
                            let w = weight_paths[k].phi_bar[a];
                            if d == 0.0 {
                                0.0
                            } else {
                                (d / w).powf(p)
                            }
                        })
                        .collect();
                    lower_bound(&v).max(0.0)
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best.powf(1.0 / p))
}

/// `max_a max_cells LCB(sup_{t ∈ [a, T]} Φ_t^p / Φ_a^p)^{1/p}`, floored at 1.
pub fn sm_p_estimate(weight_paths: &[WeightPath], p: f64, time_grid: &[usize]) -> Result<f64> {
    check(weight_paths, time_grid)?;
    let best = time_grid
        .par_iter()
        .map(|&a| {
            cells(weight_paths, a)
                .iter()
                .map(|c| {
                    let v: Vec<f64> = c
                        .iter()
                        .map(|&k| (weight_paths[k].phi_sup_after[a] / weight_paths[k].phi[a]).powf(p))
                        .collect();
                    lower_bound(&v).max(1.0)
                })
                .fold(1.0, f64::max)
        })
        .reduce(|| 1.0, f64::max);
    Ok(best.powf(1.0 / p))
}
