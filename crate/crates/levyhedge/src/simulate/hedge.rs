//! Discrete-time hedges along simulated paths: the Riemann approximation
//! `A^Rm`, the jump-adjusted approximation `A^Corr` with the threshold times
//! `ρ_i(ε, κ)`, and a fine-grid reference value of `∫ ϑ_{t-} dS_t`.
//!
//! The per-path functions take any [`Strategy`]; [`run_hedges`] evaluates
//! all paths in lockstep against slices of a [`StrategyField`] and gives the
//! same numbers as the per-path functions applied to the field's
//! [`StrategySurface`] on the path grid.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::TimeNet;
use super::path::{grid_index, JumpRecord, PathCursor, SamplePath};
use super::scheme::SimulationScheme;
use crate::error::{Error, Result};
use crate::metrics::WeightPath;
use crate::pricing::{interpolate_slices, Strategy, StrategyField, StrategySlice};

/// Threshold times of a path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTimes {
    /// Triggering jump times followed by `T`.
    pub rho: Vec<f64>,
    /// `𝒩(ε, κ) = rho.len()`.
    pub count: usize,
}

/// Whether a jump of log-size `x` at time `t` triggers:
/// `|e^x - 1| > ε (T - t)^κ`.
pub fn triggers(x: f64, t: f64, maturity: f64, epsilon: f64, kappa: f64) -> bool {
    x.exp_m1().abs() > epsilon * (maturity - t).powf(kappa)
}

/// `ρ_i(ε, κ)`: jumps with `|ΔS_t| > ε (T - t)^κ S_{t-}`, then `T`.
pub fn jump_threshold_times(path: &SamplePath, epsilon: f64, kappa: f64) -> ThresholdTimes {
    let t_end = path.maturity();
    let mut rho: Vec<f64> = path
        .jumps
        .iter()
        .filter(|j| j.time < t_end && triggers(j.size, j.time, t_end, epsilon, kappa))
        .map(|j| j.time)
        .collect();
    rho.push(t_end);
    ThresholdTimes {
        count: rho.len(),
        rho,
    }
}

/// `ΔS` of a jump.
fn price_jump(j: &JumpRecord) -> f64 {
    j.x_before.exp() * j.size.exp_m1()
}

/// Contribution of one interval to the left-point sum of `∫ ϑ_{t-} dS_t`:
/// the frozen left value times the continuous increment plus the jumps
/// `(ϑ_{ρ-}, ΔS_ρ)` at their own strategy values.
fn oracle_increment(theta_left: f64, s_from: f64, s_to: f64, jumps: &[(f64, f64)]) -> f64 {
    let mut continuous = s_to - s_from;
    let mut jump_part = 0.0;
    for (th, ds) in jumps {
        continuous -= ds;
        jump_part += th * ds;
    }
    theta_left * continuous + jump_part
}

/// Grid indices of the net knots (nets are evaluated on the path grid).
fn knot_indices(grid: &[f64], net: &TimeNet) -> Vec<usize> {
    net.knots.iter().map(|t| grid_index(grid, *t)).collect()
}

/// `A^Rm_T = Σ ϑ(t_{i-1}, S_{t_{i-1}-}) (S_{t_i} - S_{t_{i-1}})`, with knots
/// snapped to the path grid.
pub fn riemann_approx(path: &SamplePath, strategy: &dyn Strategy, net: &TimeNet) -> f64 {
    let idx = knot_indices(&path.grid, net);
    let mut a = 0.0;
    for w in idx.windows(2) {
        let th = strategy.theta(path.grid[w[0]], path.left_limit_at(w[0]).exp());
        a += th * (path.log_x[w[1]].exp() - path.log_x[w[0]].exp());
    }
    a
}

/// Terminal values of both approximations on one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectedApprox {
    pub a_rm: f64,
    pub a_corr: f64,
    /// `𝒩(ε, κ) - 1`.
    pub correction_count: usize,
}

/// `A^Corr_T = A^Rm_T + Σ_{ρ_i < T} (ϑ(ρ_i, S_{ρ_i-}) - ϑ(τ)_{ρ_i}) ΔS_{ρ_i}`.
pub fn corrected_approx(
    path: &SamplePath,
    strategy: &dyn Strategy,
    net: &TimeNet,
    epsilon: f64,
    kappa: f64,
) -> CorrectedApprox {
    let a_rm = riemann_approx(path, strategy, net);
    let idx = knot_indices(&path.grid, net);
    let t_end = path.maturity();
    let mut corr = 0.0;
    let mut count = 0;
    for j in &path.jumps {
        if !(j.time < t_end && triggers(j.size, j.time, t_end, epsilon, kappa)) {
            continue;
        }
        // interval (t_{i-1}, t_i] containing the jump
        let i = idx.partition_point(|k| path.grid[*k] < j.time).clamp(1, idx.len() - 1);
        let k = idx[i - 1];
        let frozen = strategy.theta(path.grid[k], path.left_limit_at(k).exp());
        let live = strategy.theta(j.time, j.x_before.exp());
        corr += (live - frozen) * price_jump(j);
        count += 1;
    }
    CorrectedApprox {
        a_rm,
        a_corr: a_rm + corr,
        correction_count: count,
    }
}

/// Left-point sums of `∫ ϑ_{t-} dS_t` on the full path grid and on the
/// subgrid of every second point (plus `T`).
fn oracle_pair(path: &SamplePath, strategy: &dyn Strategy) -> (f64, f64) {
    let g = &path.grid;
    let last = g.len() - 1;
    let jumps_in = |from: usize, to: usize| -> Vec<(f64, f64)> {
        path.jumps_between(from, to)
            .iter()
            .map(|j| (strategy.theta(j.time, j.x_before.exp()), price_jump(j)))
            .collect()
    };
    let sum_over = |points: &[usize]| -> f64 {
        let mut acc = 0.0;
        for w in points.windows(2) {
            let th = strategy.theta(g[w[0]], path.left_limit_at(w[0]).exp());
            acc += oracle_increment(
                th,
                path.log_x[w[0]].exp(),
                path.log_x[w[1]].exp(),
                &jumps_in(w[0], w[1]),
            );
        }
        acc
    };
    let full: Vec<usize> = (0..=last).collect();
    (sum_over(&full), sum_over(&half_points(last)))
}

/// Indices `0, 2, 4, …` and `last`.
fn half_points(last: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=last).step_by(2).collect();
    if *v.last().expect("nonempty") != last {
        v.push(last);
    }
    v
}

/// Reference value of `∫_0^T ϑ_{t-} dS_t`: the left-point sum on the full
/// path grid with exact jump handling, accepted if the sum on the subgrid
/// of every second point differs by at most `tolerance · max(|I|, S_0)`.
pub fn integral_oracle(path: &SamplePath, strategy: &dyn Strategy, tolerance: f64) -> Result<f64> {
    let (full, half) = oracle_pair(path, strategy);
    let scale = full.abs().max(path.log_x[0].exp());
    let change = (full - half).abs();
    if change > tolerance * scale {
        return Err(Error::OracleNotConverged {
            change: change / scale,
            tolerance,
        });
    }
    Ok(full)
}

/// One net of a hedging experiment with its threshold parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgeNet {
    pub net: TimeNet,
    pub epsilon: f64,
    pub kappa: f64,
}

/// Per-path, per-net discretization record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HedgeRun {
    pub seed: u64,
    pub stream: u64,
    pub n: usize,
    pub theta: Option<f64>,
    pub epsilon: f64,
    pub kappa: f64,
    pub a_rm_terminal: f64,
    pub a_corr_terminal: f64,
    pub oracle_integral: f64,
    /// `oracle - A^Rm_T`.
    pub e_rm: f64,
    /// `oracle - A^Corr_T`.
    pub e_corr: f64,
    /// `𝒩(ε, κ) - 1`.
    pub correction_count: usize,
    /// `sup_t |E^Corr_t|` over the path grid.
    pub sup_error_path: f64,
}

impl HedgeRun {
    pub const CSV_HEADER: &'static str = "seed,n,theta,epsilon,kappa,e_rm,e_corr,n_corrections";

    /// CSV row matching [`HedgeRun::CSV_HEADER`] (empty `theta` for nets
    /// that are not adapted).
    pub fn csv_row(&self) -> String {
        let theta = self.theta.map_or(String::new(), |t| format!("{t}"));
        format!(
            "{},{},{},{},{},{:e},{:e},{}",
            self.seed, self.n, theta, self.epsilon, self.kappa, self.e_rm, self.e_corr, self.correction_count
        )
    }
}

/// Writes runs as CSV with a header row.
pub fn write_runs_csv<W: Write>(mut w: W, runs: &[HedgeRun]) -> std::io::Result<()> {
    writeln!(w, "{}", HedgeRun::CSV_HEADER)?;
    for r in runs {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Everything recorded for one path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub stream: u64,
    /// One run per net, in the order of the experiment's nets.
    pub runs: Vec<HedgeRun>,
    /// `E^Corr` at the metric times, per net.
    pub error_paths: Vec<Vec<f64>>,
    /// `|oracle - oracle on the half grid|`.
    pub oracle_change: f64,
    pub weight: Option<WeightPath>,
}

/// Set-up of a batch of hedging runs sharing paths across nets.
#[derive(Debug, Clone)]
pub struct HedgeExperiment {
    pub scheme: SimulationScheme,
    /// `ln S_0`.
    pub x0: f64,
    /// Path grid; must contain the knots of every net and the metric times.
    pub grid: Arc<[f64]>,
    pub nets: Vec<HedgeNet>,
    /// Times (on the grid) at which error and weight paths are recorded.
    pub metric_times: Vec<f64>,
    /// `η` of the recorded weight path `Φ(η)`, if any.
    pub eta_weight: Option<f64>,
    /// Relative tolerance of the root-mean-square oracle refinement change.
    pub oracle_tolerance: f64,
    pub seed: u64,
}

/// Default relative tolerance of the oracle refinement check.
pub const DEFAULT_ORACLE_TOLERANCE: f64 = 1e-3;

/// State of one net on one path.
#[derive(Debug, Clone)]
struct NetWalker {
    a_rm: f64,
    corr: f64,
    frozen: f64,
    s_knot: f64,
    next_knot: usize,
    count: usize,
    sup_err: f64,
    errors: Vec<f64>,
}

/// Running weight quantities of one path.
#[derive(Debug, Clone)]
struct WeightWalker {
    eta: f64,
    theta_w: f64,
    jump_sup: f64,
    gap_sup: f64,
    price: Vec<f64>,
    theta_weight: Vec<f64>,
    jump_sups: Vec<f64>,
    gap_sups: Vec<f64>,
}

impl WeightWalker {
    fn touch(&mut self, x: f64) {
        self.theta_w = self.theta_w.max(((self.eta - 1.0) * x).exp());
        self.gap_sup = self.gap_sup.max(self.theta_w * x.exp());
    }

    fn jump(&mut self, j: &JumpRecord) {
        let before = self.theta_w * j.x_before.exp();
        self.touch(j.x_before);
        self.touch(j.x_before + j.size);
        let after = self.theta_w * (j.x_before + j.size).exp();
        self.jump_sup = self.jump_sup.max((after - before).abs());
    }

    fn record(&mut self, x: f64) {
        self.price.push(x.exp());
        self.theta_weight.push(self.theta_w);
        self.jump_sups.push(self.jump_sup);
        self.gap_sups.push(self.gap_sup);
        self.gap_sup = 0.0;
    }
}

/// State of one path.
#[derive(Debug, Clone)]
struct Walker {
    cursor: PathCursor,
    x: f64,
    left_x: f64,
    full: f64,
    half: f64,
    theta_left: f64,
    half_theta: f64,
    half_s: f64,
    half_jumps: Vec<(f64, f64)>,
    scratch: Vec<JumpRecord>,
    nets: Vec<NetWalker>,
    weight: Option<WeightWalker>,
}

impl HedgeExperiment {
    fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 || self.grid[0] != 0.0 {
            return Err(Error::invalid("the path grid must start at 0 and have two points"));
        }
        let t_end = *self.grid.last().expect("nonempty grid");
        for hn in &self.nets {
            if (hn.net.maturity() - t_end).abs() > 1e-12 * t_end {
                return Err(Error::invalid("net and grid maturities differ"));
            }
            if !(hn.epsilon > 0.0) || !(hn.kappa >= 0.0 && hn.kappa < 0.5) {
                return Err(Error::invalid("need ε > 0 and κ ∈ [0, 1/2)"));
            }
            for k in &hn.net.knots {
                let i = grid_index(&self.grid, *k);
                if (self.grid[i] - k).abs() > 1e-12 * t_end {
                    return Err(Error::invalid(format!("net knot {k} is not on the path grid")));
                }
            }
        }
        for t in &self.metric_times {
            let i = grid_index(&self.grid, *t);
            if (self.grid[i] - t).abs() > 1e-12 * t_end {
                return Err(Error::invalid(format!("metric time {t} is not on the path grid")));
            }
        }
        Ok(())
    }

    /// Runs paths `streams` in lockstep against slices of `field`.
    pub fn run(&self, field: &StrategyField, streams: std::ops::Range<u64>) -> Result<Vec<PathOutcome>> {
        self.validate()?;
        let grid = &self.grid;
        let last = grid.len() - 1;
        let t_end = grid[last];
        let knots: Vec<Vec<usize>> = self.nets.iter().map(|n| knot_indices(grid, &n.net)).collect();
        let mut is_half = vec![false; last + 1];
        for i in half_points(last) {
            is_half[i] = true;
        }
        let mut metric_idx: Vec<usize> = self.metric_times.iter().map(|t| grid_index(grid, *t)).collect();
        metric_idx.sort_unstable();
        metric_idx.dedup();
        let mut is_metric = vec![false; last + 1];
        for i in &metric_idx {
            is_metric[*i] = true;
        }

        let mut walkers: Vec<Walker> = streams
            .clone()
            .map(|stream| {
                let cursor = PathCursor::new(&self.scheme, t_end, self.x0, self.seed, stream);
                let s0 = self.x0.exp();
                let nets = self
                    .nets
                    .iter()
                    .map(|_| NetWalker {
                        a_rm: 0.0,
                        corr: 0.0,
                        frozen: 0.0,
                        s_knot: s0,
                        next_knot: 1,
                        count: 0,
                        sup_err: 0.0,
                        errors: Vec::with_capacity(metric_idx.len()),
                    })
                    .collect();
                let weight = self.eta_weight.map(|eta| WeightWalker {
                    eta,
                    theta_w: 0.0,
                    jump_sup: 0.0,
                    gap_sup: 0.0,
                    price: Vec::with_capacity(metric_idx.len()),
                    theta_weight: Vec::with_capacity(metric_idx.len()),
                    jump_sups: Vec::with_capacity(metric_idx.len()),
                    gap_sups: Vec::with_capacity(metric_idx.len()),
                });
                Walker {
                    cursor,
                    x: self.x0,
                    left_x: self.x0,
                    full: 0.0,
                    half: 0.0,
                    theta_left: 0.0,
                    half_theta: 0.0,
                    half_s: s0,
                    half_jumps: Vec::new(),
                    scratch: Vec::new(),
                    nets,
                    weight,
                }
            })
            .collect();
        for w in walkers.iter_mut() {
            if let Some(ww) = w.weight.as_mut() {
                ww.touch(self.x0);
                if is_metric[0] {
                    ww.record(self.x0);
                }
            }
            if is_metric[0] {
                for nw in w.nets.iter_mut() {
                    nw.errors.push(0.0);
                }
            }
        }

        // slices at grid points 0..last-1, computed in windows that include
        // their right end, which is carried over to the next window
        let window = (2 * rayon::current_num_threads()).max(4);
        let mut start = 0;
        let mut carry: Option<Arc<StrategySlice>> = None;
        while start < last {
            let end = (start + window).min(last);
            let top = end.min(last - 1);
            let from = if carry.is_some() { start + 1 } else { start };
            let fresh: Vec<Arc<StrategySlice>> = (from..=top)
                .into_par_iter()
                .map(|i| field.slice(grid[i]).map(Arc::new))
                .collect::<Result<_>>()?;
            let mut slices: Vec<Arc<StrategySlice>> = Vec::with_capacity(top + 1 - start);
            slices.extend(carry.take());
            slices.extend(fresh);
            walkers.par_iter_mut().for_each(|w| {
                for j in start + 1..=end {
                    let lo = &slices[j - 1 - start];
                    // the step ending at `last` interpolates within the final slice
                    let hi = if j == last { lo } else { &slices[j - start] };
                    self.step(w, j, lo, hi, &knots, &is_half, &is_metric);
                }
            });
            carry = slices.pop();
            start = end;
        }

        let outcomes = walkers
            .into_par_iter()
            .zip(streams.collect::<Vec<u64>>().into_par_iter())
            .map(|(w, stream)| self.finish(w, stream))
            .collect::<Vec<_>>();
        let n = outcomes.len().max(1) as f64;
        let rms_change = (outcomes.iter().map(|o| o.oracle_change.powi(2)).sum::<f64>() / n).sqrt();
        let rms_oracle = (outcomes
            .iter()
            .map(|o| o.runs.first().map_or(0.0, |r| r.oracle_integral).powi(2))
            .sum::<f64>()
            / n)
            .sqrt();
        let scale = rms_oracle.max(self.x0.exp());
        if rms_change > self.oracle_tolerance * scale {
            return Err(Error::OracleNotConverged {
                change: rms_change / scale,
                tolerance: self.oracle_tolerance,
            });
        }
        Ok(outcomes)
    }

    #[allow(clippy::too_many_arguments)]
    fn step(
        &self,
        w: &mut Walker,
        j: usize,
        lo: &StrategySlice,
        hi: &StrategySlice,
        knots: &[Vec<usize>],
        is_half: &[bool],
        is_metric: &[bool],
    ) {
        let grid = &self.grid;
        let last = grid.len() - 1;
        let t_end = grid[last];
        // strategy at the left end of the step
        w.theta_left = lo.theta(w.left_x.exp());
        if is_half[j - 1] {
            w.half_theta = w.theta_left;
        }
        for (nw, k) in w.nets.iter_mut().zip(knots) {
            if k[nw.next_knot - 1] == j - 1 {
                nw.frozen = w.theta_left;
            }
        }
        let s_from = w.x.exp();
        w.scratch.clear();
        let x_new = w.cursor.advance(grid[j], &mut w.scratch);
        let s_new = x_new.exp();
        let rec: Vec<(f64, f64)> = w
            .scratch
            .iter()
            .map(|r| (interpolate_slices(lo, hi, r.time, r.x_before.exp()), price_jump(r)))
            .collect();
        w.full += oracle_increment(w.theta_left, s_from, s_new, &rec);
        w.half_jumps.extend_from_slice(&rec);
        if is_half[j] {
            w.half += oracle_increment(w.half_theta, w.half_s, s_new, &w.half_jumps);
            w.half_jumps.clear();
            w.half_s = s_new;
        }
        for ((nw, k), hn) in w.nets.iter_mut().zip(knots).zip(&self.nets) {
            for (r, (th, ds)) in w.scratch.iter().zip(&rec) {
                if r.time < t_end && triggers(r.size, r.time, t_end, hn.epsilon, hn.kappa) {
                    nw.corr += (th - nw.frozen) * ds;
                    nw.count += 1;
                }
            }
            if k[nw.next_knot] == j {
                nw.a_rm += nw.frozen * (s_new - nw.s_knot);
                nw.s_knot = s_new;
                nw.next_knot = (nw.next_knot + 1).min(k.len() - 1);
            }
            let err = w.full - ((nw.a_rm + nw.frozen * (s_new - nw.s_knot)) + nw.corr);
            nw.sup_err = nw.sup_err.max(err.abs());
            if is_metric[j] {
                nw.errors.push(err);
            }
        }
        if let Some(ww) = w.weight.as_mut() {
            for r in &w.scratch {
                ww.jump(r);
            }
            ww.touch(x_new);
            if is_metric[j] {
                ww.record(x_new);
            }
        }
        w.left_x = match w.scratch.last() {
            Some(r) if r.time == grid[j] => r.x_before,
            _ => x_new,
        };
        w.x = x_new;
    }

    fn finish(&self, w: Walker, stream: u64) -> PathOutcome {
        let runs = w
            .nets
            .iter()
            .zip(&self.nets)
            .map(|(nw, hn)| {
                let a_corr = nw.a_rm + nw.corr;
                HedgeRun {
                    seed: self.seed,
                    stream,
                    n: hn.net.len(),
                    theta: hn.net.theta_tag,
                    epsilon: hn.epsilon,
                    kappa: hn.kappa,
                    a_rm_terminal: nw.a_rm,
                    a_corr_terminal: a_corr,
                    oracle_integral: w.full,
                    e_rm: w.full - nw.a_rm,
                    e_corr: w.full - a_corr,
                    correction_count: nw.count,
                    sup_error_path: nw.sup_err,
                }
            })
            .collect();
        let weight = w.weight.map(|ww| {
            WeightPath::from_samples(ww.eta, ww.price, ww.theta_weight, ww.jump_sups, ww.gap_sups, ww.gap_sup)
        });
        PathOutcome {
            stream,
            runs,
            error_paths: w.nets.into_iter().map(|n| n.errors).collect(),
            oracle_change: (w.full - w.half).abs(),
            weight,
        }
    }
}

/// Weight paths `Φ(η)` of paths `streams` recorded at `metric_times`
/// (which must lie on `grid`), without any hedge.
pub fn sample_weight_paths(
    scheme: &SimulationScheme,
    x0: f64,
    grid: &[f64],
    metric_times: &[f64],
    eta: f64,
    seed: u64,
    streams: std::ops::Range<u64>,
) -> Result<Vec<WeightPath>> {
    let t_end = *grid.last().ok_or_else(|| Error::invalid("empty grid"))?;
    let mut is_metric = vec![false; grid.len()];
    for t in metric_times {
        let i = grid_index(grid, *t);
        if (grid[i] - t).abs() > 1e-12 * t_end {
            return Err(Error::invalid(format!("metric time {t} is not on the path grid")));
        }
        is_metric[i] = true;
    }
    let ids: Vec<u64> = streams.collect();
    Ok(ids
        .into_par_iter()
        .map(|stream| {
            let mut cursor = PathCursor::new(scheme, t_end, x0, seed, stream);
            let mut ww = WeightWalker {
                eta,
                theta_w: 0.0,
                jump_sup: 0.0,
                gap_sup: 0.0,
                price: Vec::new(),
                theta_weight: Vec::new(),
                jump_sups: Vec::new(),
                gap_sups: Vec::new(),
            };
            ww.touch(x0);
            if is_metric[0] {
                ww.record(x0);
            }
            let mut scratch = Vec::new();
            for j in 1..grid.len() {
                scratch.clear();
                let x = cursor.advance(grid[j], &mut scratch);
                for r in &scratch {
                    ww.jump(r);
                }
                ww.touch(x);
                if is_metric[j] {
                    ww.record(x);
                }
            }
            WeightPath::from_samples(ww.eta, ww.price, ww.theta_weight, ww.jump_sups, ww.gap_sups, ww.gap_sup)
        })
        .collect())
}

/// Free-function form of [`HedgeExperiment::run`].
pub fn run_hedges(
    experiment: &HedgeExperiment,
    field: &StrategyField,
    streams: std::ops::Range<u64>,
) -> Result<Vec<PathOutcome>> {
    experiment.run(field, streams)
}
