//! End-to-end experiments: model → minimal martingale measure → strategy →
//! simulation → metrics.
//!
//! [`run_rates`] measures the convergence rate of the jump-adjusted hedge
//! over a sequence of adapted nets; [`run_repcheck`] checks the martingale
//! representation of `f(X_T)` under `P*` by discretizing it on fine grids.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::levy::{
    check_mmm_assumption, classify_small_jumps, market_coefficients, minimal_martingale_measure, table1_parameters,
    LevyMeasure, LevyTriplet, MarketCoefficients, MeasureChange, MmmCheck, ModelClass, SmallJumpClass, Table1Case,
    TABLE1_SLACK,
};
use crate::metrics::{
    convergence_rate, lp_norm, weighted_bmo_estimate, ErrorKind, RateReport, MIN_PATHS, MIN_SAMPLES_PER_N,
};
use crate::payoff::{Payoff, PayoffKind};
use crate::pricing::{
    lrm_strategy, Cumulants, KernelField, KernelSlice, LogPayoff, PricingMethod, RepresentationEngine, SemigroupEvaluator,
    StrategyField, DEFAULT_FIELD_TERMS,
};
use crate::simulate::{
    adapted_time_net, fine_grid, sample_path, HedgeExperiment, HedgeNet, HedgeRun, JumpRecord, PathCursor, SamplePath,
    SimulationScheme,
    DEFAULT_GRID_POINTS, DEFAULT_ORACLE_TOLERANCE,
};

/// Model specification: the drift is given either as `gamma` or through the
/// price drift `gamma_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub gamma_s: Option<f64>,
    pub sigma: f64,
    pub nu: LevyMeasure,
}

impl ModelSpec {
    pub fn triplet(&self) -> Result<LevyTriplet> {
        match (self.gamma, self.gamma_s) {
            (Some(g), None) => LevyTriplet::new(g, self.sigma, self.nu.clone()),
            (None, Some(gs)) => LevyTriplet::with_gamma_s(gs, self.sigma, self.nu.clone()),
            _ => Err(Error::invalid("give exactly one of model.gamma and model.gamma_s")),
        }
    }
}

/// Payoff specification; `holder_eta` defaults to the canonical exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PayoffSpec {
    #[serde(flatten)]
    pub kind: PayoffKind,
    #[serde(default)]
    pub holder_eta: Option<f64>,
    #[serde(default)]
    pub sobolev_q: Option<f64>,
}

impl PayoffSpec {
    pub fn payoff(&self) -> Result<Payoff> {
        let mut p = Payoff::new(self.kind.clone())?;
        if let Some(eta) = self.holder_eta {
            p.holder_eta = eta;
        }
        p.sobolev_q = self.sobolev_q;
        p.validate()?;
        Ok(p)
    }
}

/// Explicit `(r, θ)` (and optionally `κ`) instead of the Table-1 choice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Table1Override {
    pub r: f64,
    pub theta: f64,
    #[serde(default)]
    pub kappa: Option<f64>,
}

/// Threshold level `ε` as a function of the net size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum EpsilonRule {
    /// `ε = n^exponent`, by default `exponent = -1/(2r)`.
    PowerOfN {
        #[serde(default)]
        exponent: Option<f64>,
    },
    Fixed {
        epsilon: f64,
    },
}

impl Default for EpsilonRule {
    fn default() -> Self {
        EpsilonRule::PowerOfN { exponent: None }
    }
}

/// Numerical settings with defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    /// Base number of fine-grid points.
    pub grid_points: usize,
    /// Cap on COS terms of strategy and kernel fields.
    pub field_terms: usize,
    /// COS terms and width of the pricing engine.
    pub cos_terms: usize,
    pub cos_width: f64,
    pub oracle_tolerance: f64,
    pub error_kind: ErrorKind,
    /// Number of metric times for error and weight paths.
    pub metric_points: usize,
    /// Exponent of the weighted BMO estimate.
    pub bmo_p: f64,
    /// Half width of the simulated price range in standard deviations of `X_T`.
    pub state_width: f64,
    /// Fine-grid sizes of the representation check.
    pub repcheck_levels: Vec<usize>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            grid_points: DEFAULT_GRID_POINTS,
            field_terms: DEFAULT_FIELD_TERMS,
            cos_terms: 1 << 10,
            cos_width: 10.0,
            oracle_tolerance: DEFAULT_ORACLE_TOLERANCE,
            error_kind: ErrorKind::L2,
            metric_points: 32,
            bmo_p: 2.0,
            state_width: 8.0,
            repcheck_levels: vec![1 << 12, 1 << 13, 1 << 14],
        }
    }
}

fn default_maturity() -> f64 {
    1.0
}

fn default_s0() -> f64 {
    1.0
}

/// Full description of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub payoff: PayoffSpec,
    #[serde(default = "default_maturity")]
    pub maturity: f64,
    #[serde(default = "default_s0")]
    pub s0: f64,
    #[serde(default)]
    pub table1_case: Option<Table1Override>,
    pub n_values: Vec<usize>,
    pub paths_per_n: usize,
    #[serde(default)]
    pub epsilon_rule: EpsilonRule,
    /// Defaults to `(1 - θ)/2`.
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub eta_weight: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<String>,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub strategy_grid: StrategyGrid,
    #[serde(default)]
    pub simulate: SimulateSpec,
    #[serde(default)]
    pub repcheck: RepTarget,
}

/// `(t, y)` grid of a strategy surface; `y` bounds are multiples of `s0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyGrid {
    pub t_points: usize,
    /// Last time as a fraction of the maturity.
    pub t_max_fraction: f64,
    pub y_low: f64,
    pub y_high: f64,
    pub y_points: usize,
}

impl Default for StrategyGrid {
    fn default() -> Self {
        StrategyGrid {
            t_points: 10,
            t_max_fraction: 0.9,
            y_low: 0.5,
            y_high: 1.5,
            y_points: 21,
        }
    }
}

impl StrategyGrid {
    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }

    /// Times `0, …, t_max_fraction·T`.
    pub fn times(&self, maturity: f64) -> Vec<f64> {
        Self::axis(0.0, self.t_max_fraction * maturity, self.t_points)
    }

    /// Prices `y_low·s0, …, y_high·s0`.
    pub fn prices(&self, s0: f64) -> Vec<f64> {
        Self::axis(self.y_low * s0, self.y_high * s0, self.y_points)
    }

    fn validate(&self) -> Result<()> {
        if self.t_points == 0 || self.y_points == 0 {
            return Err(Error::invalid("strategy_grid needs at least one point per axis"));
        }
        if !(0.0..1.0).contains(&self.t_max_fraction) {
            return Err(Error::invalid("strategy_grid.t_max_fraction must lie in [0, 1)"));
        }
        if !(self.y_low > 0.0 && self.y_high >= self.y_low && self.y_high.is_finite()) {
            return Err(Error::invalid("strategy_grid needs 0 < y_low <= y_high"));
        }
        Ok(())
    }
}

/// Sample-path export settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSpec {
    pub paths: usize,
    /// Number of intervals of the adapted net the paths are reported on.
    pub report_points: usize,
}

impl Default for SimulateSpec {
    fn default() -> Self {
        SimulateSpec {
            paths: 16,
            report_points: 64,
        }
    }
}

/// Terminal function `f(X_T)` of the representation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum RepTarget {
    /// `f(x) = g(e^x)` for the configured payoff `g`.
    #[default]
    Payoff,
    Identity,
    Constant {
        value: f64,
    },
}

impl ExperimentConfig {
    /// Checks the invariants of the configuration.
    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values.windows(2).any(|w| w[1] <= w[0]) || self.n_values[0] == 0 {
            return Err(Error::invalid("n_values must be positive and strictly increasing"));
        }
        if self.paths_per_n < MIN_SAMPLES_PER_N {
            return Err(Error::invalid(format!("paths_per_n must be at least {MIN_SAMPLES_PER_N}")));
        }
        if !(self.maturity > 0.0 && self.maturity.is_finite()) || !(self.s0 > 0.0) {
            return Err(Error::invalid("maturity and s0 must be positive"));
        }
        if let Some(k) = self.kappa {
            if !(0.0..0.5).contains(&k) {
                return Err(Error::invalid("kappa must lie in [0, 1/2)"));
            }
        }
        if let Some(eta) = self.eta_weight {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::invalid("eta_weight must lie in [0, 1]"));
            }
        }
        self.strategy_grid.validate()?;
        self.model.triplet()?;
        self.payoff.payoff()?;
        Ok(())
    }

    /// Merton jump diffusion with a call: a complete, runnable configuration
    /// whose fields show every default.
    pub fn example() -> Self {
        ExperimentConfig {
            model: ModelSpec {
                gamma: None,
                gamma_s: Some(-0.02),
                sigma: 0.2,
                nu: LevyMeasure::Merton {
                    lambda: 0.3,
                    mu_j: -0.1,
                    sigma_j: 0.15,
                },
            },
            payoff: PayoffSpec {
                kind: PayoffKind::Call { strike: 1.0 },
                holder_eta: None,
                sobolev_q: None,
            },
            maturity: 1.0,
            s0: 1.0,
            table1_case: None,
            n_values: vec![8, 16, 32, 64, 128, 256],
            paths_per_n: 4000,
            epsilon_rule: EpsilonRule::default(),
            kappa: None,
            eta_weight: None,
            seed: 20240601,
            output_dir: None,
            numerics: Numerics::default(),
            strategy_grid: StrategyGrid::default(),
            simulate: SimulateSpec::default(),
            repcheck: RepTarget::default(),
        }
    }

    /// Log-payoff checked by [`run_repcheck`].
    pub fn rep_target(&self) -> Result<LogPayoff> {
        Ok(match self.repcheck {
            RepTarget::Payoff => LogPayoff::Price(self.payoff.payoff()?),
            RepTarget::Identity => LogPayoff::Identity,
            RepTarget::Constant { value } => LogPayoff::Constant(value),
        })
    }

    fn method(&self) -> PricingMethod {
        PricingMethod::FourierCos {
            terms: self.numerics.cos_terms,
            width: self.numerics.cos_width,
        }
    }
}

/// Rate parameters in use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParameters {
    /// Table-1 row, `None` when overridden.
    pub case: Option<Table1Case>,
    pub r: f64,
    pub theta: f64,
    pub kappa: f64,
}

/// Resolves `(r, θ, κ)` from the override or from Table 1.
pub fn rate_parameters(config: &ExperimentConfig) -> Result<RateParameters> {
    let triplet = config.model.triplet()?;
    let payoff = config.payoff.payoff()?;
    let (case, r, theta, kappa) = match config.table1_case {
        Some(o) => (None, o.r, o.theta, o.kappa),
        None => {
            let class = ModelClass {
                sigma: triplet.sigma,
                small_jump: classify_small_jumps(&triplet.nu)?,
            };
            let c = table1_parameters(&class, &payoff, TABLE1_SLACK)?;
            (Some(c.case), c.r, c.theta, None)
        }
    };
    let kappa = config.kappa.or(kappa).unwrap_or(0.5 * (1.0 - theta));
    if !(r > 0.0) || !(theta > 0.0 && theta <= 1.0) || !(0.0..0.5).contains(&kappa) {
        return Err(Error::invalid("need r > 0, θ ∈ (0, 1] and κ ∈ [0, 1/2)"));
    }
    Ok(RateParameters { case, r, theta, kappa })
}

/// Everything needed to hedge under one model and payoff.
#[derive(Debug, Clone)]
pub struct HedgeSetup {
    pub triplet: LevyTriplet,
    pub payoff: Payoff,
    pub coefficients: MarketCoefficients,
    pub measure_change: MeasureChange,
    pub evaluator: SemigroupEvaluator,
}

impl HedgeSetup {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        let triplet = config.model.triplet()?;
        let payoff = config.payoff.payoff()?;
        let coefficients = market_coefficients(&triplet)?;
        let measure_change = minimal_martingale_measure(&triplet)?;
        let evaluator = SemigroupEvaluator::new(
            measure_change.starred_triplet.clone(),
            payoff.clone(),
            config.method(),
            config.maturity,
        )?;
        Ok(HedgeSetup {
            triplet,
            payoff,
            coefficients,
            measure_change,
            evaluator,
        })
    }
}

/// Log-price range `x0 + c₁T ± w √(c₂T + √(c₄T))` covering simulated states.
fn state_range(triplet: &LevyTriplet, x0: f64, maturity: f64, width: f64) -> Result<(f64, f64)> {
    let c = Cumulants::of(triplet)?;
    let half = c.half_width(maturity, width).max(1e-3);
    let mid = x0 + c.c1 * maturity;
    Ok((mid.min(x0) - half, mid.max(x0) + half))
}

/// Outcome of a rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesOutcome {
    pub parameters: RateParameters,
    pub report: RateReport,
    /// Runs ordered by path, then by net.
    pub runs: Vec<HedgeRun>,
    /// `(n, weighted BMO estimate)` when weight paths were recorded.
    pub bmo: Option<Vec<(usize, f64)>>,
}

/// Runs the hedging pipeline for every `n` with shared paths and fits the
/// convergence rate of `E^Corr`.
pub fn run_rates(config: &ExperimentConfig) -> Result<RatesOutcome> {
    config.validate()?;
    let params = rate_parameters(config)?;
    let setup = HedgeSetup::new(config)?;
    let t_end = config.maturity;
    let x0 = config.s0.ln();
    let nets: Vec<HedgeNet> = config
        .n_values
        .iter()
        .map(|&n| -> Result<HedgeNet> {
            let epsilon = match config.epsilon_rule {
                EpsilonRule::PowerOfN { exponent } => {
                    (n as f64).powf(exponent.unwrap_or(-1.0 / (2.0 * params.r)))
                }
                EpsilonRule::Fixed { epsilon } => epsilon,
            };
            Ok(HedgeNet {
                net: adapted_time_net(n, params.theta, t_end)?,
                epsilon,
                kappa: params.kappa,
            })
        })
        .collect::<Result<_>>()?;
    let metric_times = adapted_time_net(config.numerics.metric_points.max(2) - 1, params.theta, t_end)?.knots;
    let mut extra: Vec<f64> = nets.iter().flat_map(|n| n.net.knots.iter().copied()).collect();
    extra.extend(&metric_times);
    let grid: Arc<[f64]> = fine_grid(config.numerics.grid_points, t_end, &extra)?.into();
    let (lo, hi) = state_range(&setup.triplet, x0, t_end, config.numerics.state_width)?;
    let field = StrategyField::new(
        &setup.evaluator,
        &setup.coefficients,
        &setup.triplet.nu,
        lo.exp(),
        hi.exp(),
        config.numerics.field_terms,
    )?;
    let experiment = HedgeExperiment {
        scheme: SimulationScheme::new(&setup.triplet)?,
        x0,
        grid,
        nets,
        metric_times,
        eta_weight: config.eta_weight,
        oracle_tolerance: config.numerics.oracle_tolerance,
        seed: config.seed,
    };
    let outcomes = experiment.run(&field, 0..config.paths_per_n as u64)?;
    let mut samples: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for o in &outcomes {
        for r in &o.runs {
            samples.entry(r.n).or_default().push(r.e_corr);
        }
    }
    let bmo = match config.eta_weight {
        Some(_) if outcomes.len() >= MIN_PATHS => {
            let weights: Vec<_> = outcomes.iter().map(|o| o.weight.clone().expect("weight path")).collect();
            let grid_idx: Vec<usize> = (0..weights[0].len()).collect();
            let mut v = Vec::with_capacity(config.n_values.len());
            for (k, n) in config.n_values.iter().enumerate() {
                let errors: Vec<Vec<f64>> = outcomes.iter().map(|o| o.error_paths[k].clone()).collect();
                v.push((*n, weighted_bmo_estimate(&errors, &weights, &grid_idx, config.numerics.bmo_p)?));
            }
            Some(v)
        }
        Some(_) => {
            log::warn!(
                "weighted BMO estimates need {MIN_PATHS} paths, got {}; skipped",
                outcomes.len()
            );
            None
        }
        None => None,
    };
    let report = match (config.numerics.error_kind, &bmo) {
        (ErrorKind::BmoEstimate, Some(b)) => {
            let m: BTreeMap<usize, Vec<f64>> = b.iter().map(|(n, e)| (*n, vec![*e])).collect();
            convergence_rate(&m, ErrorKind::BmoEstimate, params.r)?
        }
        (ErrorKind::BmoEstimate, None) => {
            return Err(Error::PreconditionViolated(
                "BMO rates need eta_weight and at least 10^4 paths".into(),
            ))
        }
        (kind, _) => convergence_rate(&samples, kind, params.r)?,
    };
    let runs = outcomes.into_iter().flat_map(|o| o.runs).collect();
    Ok(RatesOutcome {
        parameters: params,
        report,
        runs,
        bmo,
    })
}

/// Market coefficients with the feasibility of the minimal martingale
/// measure and the small-jump class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientsReport {
    pub triplet: LevyTriplet,
    pub coefficients: MarketCoefficients,
    pub mmm_assumption: MmmCheck,
    /// `None` when the Blumenthal-Getoor index is indeterminate.
    pub small_jumps: Option<SmallJumpClass>,
    pub martingale: bool,
}

pub fn coefficients_report(config: &ExperimentConfig) -> Result<CoefficientsReport> {
    let triplet = config.model.triplet()?;
    let coefficients = market_coefficients(&triplet)?;
    let mmm_assumption = check_mmm_assumption(&triplet)?;
    let small_jumps = match classify_small_jumps(&triplet.nu) {
        Ok(c) => Some(c),
        Err(Error::IndeterminateIndex(msg)) => {
            log::warn!("small-jump class not determined: {msg}");
            None
        }
        Err(e) => return Err(e),
    };
    Ok(CoefficientsReport {
        martingale: coefficients.gamma_s == 0.0,
        triplet,
        coefficients,
        mmm_assumption,
        small_jumps,
    })
}

/// One row of a strategy surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub t: f64,
    pub y: f64,
    pub theta: f64,
    pub diffusion_part: f64,
    pub jump_part: f64,
}

/// Evaluates the strategy by quadrature on the configured `(t, y)` grid,
/// ordered by `t`, then `y`.
pub fn strategy_surface(config: &ExperimentConfig) -> Result<Vec<StrategyRow>> {
    config.strategy_grid.validate()?;
    let setup = HedgeSetup::new(config)?;
    let points: Vec<(f64, f64)> = config
        .strategy_grid
        .times(config.maturity)
        .into_iter()
        .flat_map(|t| config.strategy_grid.prices(config.s0).into_iter().map(move |y| (t, y)))
        .collect();
    points
        .into_par_iter()
        .map(|(t, y)| {
            let v = lrm_strategy(&setup.evaluator, &setup.coefficients, &setup.triplet.nu, t, y)?;
            Ok(StrategyRow {
                t,
                y,
                theta: v.theta,
                diffusion_part: v.diffusion_part,
                jump_part: v.jump_part,
            })
        })
        .collect()
}

/// Simulates `simulate.paths` paths under `P` on the fine grid; values are
/// reported by the caller at the knots of [`simulation_report_times`].
pub fn simulate_paths(config: &ExperimentConfig) -> Result<Vec<SamplePath>> {
    let triplet = config.model.triplet()?;
    let scheme = SimulationScheme::new(&triplet)?;
    let times = simulation_report_times(config)?;
    let grid: Arc<[f64]> = fine_grid(config.numerics.grid_points, config.maturity, &times)?.into();
    let x0 = config.s0.ln();
    Ok((0..config.simulate.paths as u64)
        .into_par_iter()
        .map(|stream| sample_path(&scheme, &grid, x0, config.seed, stream))
        .collect())
}

/// Knots of the adapted net used to report simulated paths.
pub fn simulation_report_times(config: &ExperimentConfig) -> Result<Vec<f64>> {
    let theta = rate_parameters(config).map(|p| p.theta).unwrap_or(1.0);
    Ok(adapted_time_net(config.simulate.report_points.max(1), theta, config.maturity)?.knots)
}

/// Residual of the discretized representation at one grid size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepLevel {
    pub grid_points: usize,
    /// `‖f(X_T) - RHS‖_{L₂}` with its bootstrap standard error.
    pub residual: f64,
    pub std_error: f64,
}

/// Outcome of a representation check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepCheckReport {
    pub levels: Vec<RepLevel>,
    /// `‖f(X_T)‖_{L₂}` at the finest level.
    pub target_norm: f64,
    /// Residual at the finest level relative to `‖f(X_T)‖_{L₂}`.
    pub relative_residual: f64,
    pub monotone: bool,
}

/// Kernels along a path, either tabulated or in closed form.
enum KernelSource {
    Field(KernelField),
    /// `F(t, x) = c`.
    Constant(f64),
    /// `F(t, x) = x + c₁(T - t)` with `∫ z ν(dz)` as compensator.
    Identity { c1: f64, jump_mean: f64 },
}

enum KernelAt {
    Slice(Arc<KernelSlice>),
    Closed,
}

impl KernelSource {
    fn value(&self, k: &KernelAt, t_end: f64, t: f64, x: f64) -> f64 {
        match (self, k) {
            (_, KernelAt::Slice(s)) => s.value(x),
            (KernelSource::Constant(c), _) => *c,
            (KernelSource::Identity { c1, .. }, _) => x + c1 * (t_end - t),
            (KernelSource::Field(_), KernelAt::Closed) => unreachable!("tabulated kernels need a slice"),
        }
    }

    fn gradient(&self, k: &KernelAt, x: f64) -> f64 {
        match (self, k) {
            (_, KernelAt::Slice(s)) => s.gradient(x),
            (KernelSource::Constant(_), _) => 0.0,
            (KernelSource::Identity { .. }, _) => 1.0,
            (KernelSource::Field(_), KernelAt::Closed) => unreachable!("tabulated kernels need a slice"),
        }
    }

    fn compensator(&self, k: &KernelAt, x: f64) -> f64 {
        match (self, k) {
            (_, KernelAt::Slice(s)) => s.compensator(x),
            (KernelSource::Constant(_), _) => 0.0,
            (KernelSource::Identity { jump_mean, .. }, _) => *jump_mean,
            (KernelSource::Field(_), KernelAt::Closed) => unreachable!("tabulated kernels need a slice"),
        }
    }

    fn at(&self, t: f64) -> Result<KernelAt> {
        match self {
            KernelSource::Field(f) => Ok(KernelAt::Slice(Arc::new(f.slice(t)?))),
            _ => Ok(KernelAt::Closed),
        }
    }
}

/// Checks `f(X_T) = E f(X_T) + ∫ σ∂_xF dW + ∫∫ (F(t, X_{t-} + z) - F(t, X_{t-})) Ñ`
/// under `P*` on fine grids of the configured sizes.
///
/// On each grid the Brownian and compensator integrals use left-point
/// kernels; jumps use kernels interpolated linearly in time between the
/// neighbouring grid slices (the payoff itself at maturity).  The Brownian
/// increment is recovered from the path as the continuous increment minus
/// the drift.  Requires a finite-activity jump measure.
pub fn run_repcheck(config: &ExperimentConfig, f: &LogPayoff) -> Result<RepCheckReport> {
    config.validate()?;
    let triplet = config.model.triplet()?;
    let mmm = minimal_martingale_measure(&triplet)?;
    let star = mmm.starred_triplet;
    if !star.nu.finite_activity() {
        return Err(Error::PreconditionViolated(
            "the representation check needs a finite-activity jump measure".into(),
        ));
    }
    let t_end = config.maturity;
    let x0 = config.s0.ln();
    let engine = RepresentationEngine::new(star.clone(), f.clone(), config.method(), t_end)?;
    let (lo, hi) = state_range(&star, x0, t_end, config.numerics.state_width)?;
    let source = match f {
        LogPayoff::Constant(c) => KernelSource::Constant(*c),
        LogPayoff::Identity => {
            let c = Cumulants::of(&star)?;
            let jump_mean = star
                .nu
                .integrate(&|z: f64| z, &[0.0], &crate::quad::QuadOptions::with_tol(1e-15, 1e-12))
                .ok_or_fail("mean jump")?;
            KernelSource::Identity { c1: c.c1, jump_mean }
        }
        LogPayoff::Price(g) => match g.kind {
            PayoffKind::Constant { value } => KernelSource::Constant(value),
            _ => KernelSource::Field(KernelField::new(&engine, lo, hi, config.numerics.field_terms)?),
        },
    };
    let scheme = SimulationScheme::with_cutoff(&star, Some(0.0))?;
    let f0 = engine.value(0.0, x0)?;
    let paths = config.paths_per_n;
    let mut levels = Vec::new();
    let mut target_norm = 0.0;
    for &m in &config.numerics.repcheck_levels {
        let grid = fine_grid(m, t_end, &[])?;
        let (residuals, targets) = repcheck_level(&source, &scheme, &grid, x0, f0, f, config.seed, paths)?;
        let r = lp_norm(&residuals, 2.0)?;
        target_norm = lp_norm(&targets, 2.0)?.value;
        levels.push(RepLevel {
            grid_points: m,
            residual: r.value,
            std_error: r.std_error,
        });
    }
    let last = levels.last().map_or(0.0, |l| l.residual);
    Ok(RepCheckReport {
        monotone: levels.windows(2).all(|w| w[1].residual <= w[0].residual),
        relative_residual: if target_norm > 0.0 { last / target_norm } else { last },
        target_norm,
        levels,
    })
}

/// Per-path state of the representation check.
struct RepWalker {
    cursor: PathCursor,
    x: f64,
    rhs: f64,
    scratch: Vec<JumpRecord>,
}

#[allow(clippy::too_many_arguments)]
fn repcheck_level(
    source: &KernelSource,
    scheme: &SimulationScheme,
    grid: &[f64],
    x0: f64,
    f0: f64,
    f: &LogPayoff,
    seed: u64,
    paths: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let last = grid.len() - 1;
    let t_end = grid[last];
    let mut walkers: Vec<RepWalker> = (0..paths as u64)
        .map(|stream| RepWalker {
            cursor: PathCursor::new(scheme, t_end, x0, seed, stream),
            x: x0,
            rhs: f0,
            scratch: Vec::new(),
        })
        .collect();
    let window = (2 * rayon::current_num_threads()).max(4);
    let mut start = 0;
    let mut carry: Option<Option<KernelAt>> = None;
    while start < last {
        let end = (start + window).min(last);
        // kernels at grid points start..=end (the payoff itself at T); the
        // right end is carried over to the next window
        let from = if carry.is_some() { start + 1 } else { start };
        let fresh: Vec<Option<KernelAt>> = (from..=end)
            .into_par_iter()
            .map(|i| if i < last { source.at(grid[i]).map(Some) } else { Ok(None) })
            .collect::<Result<_>>()?;
        let mut at: Vec<Option<KernelAt>> = Vec::with_capacity(end + 1 - start);
        at.extend(carry.take());
        at.extend(fresh);
        walkers.par_iter_mut().for_each(|w| {
            for j in start + 1..=end {
                let (t0, t1) = (grid[j - 1], grid[j]);
                let dt = t1 - t0;
                let k0 = at[j - 1 - start].as_ref().expect("kernel before maturity");
                let k1 = at[j - start].as_ref();
                let x_prev = w.x;
                w.scratch.clear();
                let x_new = w.cursor.advance(t1, &mut w.scratch);
                let jump_total: f64 = w.scratch.iter().map(|r| r.size).sum();
                let dw_sigma = (x_new - x_prev - jump_total) - scheme.drift * dt;
                w.rhs += source.gradient(k0, x_prev) * dw_sigma;
                w.rhs -= source.compensator(k0, x_prev) * dt;
                for r in &w.scratch {
                    let v = |x: f64| -> f64 {
                        let a = source.value(k0, t_end, t0, x);
                        let b = match k1 {
                            Some(k) => source.value(k, t_end, t1, x),
                            None => f.eval(x),
                        };
                        let s = (r.time - t0) / dt;
                        (1.0 - s) * a + s * b
                    };
                    w.rhs += v(r.x_before + r.size) - v(r.x_before);
                }
                w.x = x_new;
            }
        });
        carry = at.pop();
        start = end;
    }
    Ok(walkers
        .iter()
        .map(|w| {
            let target = f.eval(w.x);
            (target - w.rhs, target)
        })
        .unzip())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config() -> ExperimentConfig {
        ExperimentConfig {
            n_values: vec![4, 8, 16, 32],
            paths_per_n: 1000,
            seed: 7,
            numerics: Numerics {
                grid_points: 1 << 13,
                repcheck_levels: vec![1 << 8, 1 << 9],
                ..Numerics::default()
            },
            ..ExperimentConfig::example()
        }
    }

    #[test]
    fn example_round_trips_through_json() {
        let c = ExperimentConfig::example();
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn linear_payoff_surface_is_one() {
        let mut c = config();
        c.payoff.kind = PayoffKind::Linear;
        c.strategy_grid.t_points = 3;
        c.strategy_grid.y_points = 4;
        let rows = strategy_surface(&c).unwrap();
        assert_eq!(rows.len(), 12);
        assert!(rows.iter().all(|r| (r.theta - 1.0).abs() < 1e-8), "{rows:?}");
    }

    #[test]
    fn rates_pipeline_runs_and_is_deterministic() {
        let c = config();
        let a = run_rates(&c).unwrap();
        assert_eq!(a.parameters.case, Some(Table1Case::C1));
        assert_eq!((a.parameters.r, a.parameters.theta, a.parameters.kappa), (1.0, 1.0, 0.0));
        assert_eq!(a.runs.len(), 4 * 1000);
        assert!(a.report.slope < 0.0);
        let b = run_rates(&c).unwrap();
        assert_eq!(serde_json::to_string(&a.report).unwrap(), serde_json::to_string(&b.report).unwrap());
    }

    #[test]
    fn repcheck_trivial_payoffs() {
        let c = config();
        let r = run_repcheck(&c, &LogPayoff::Constant(1.5)).unwrap();
        assert!(r.levels.iter().all(|l| l.residual == 0.0));
        let r = run_repcheck(&c, &LogPayoff::Identity).unwrap();
        assert!(r.levels.iter().all(|l| l.residual < 1e-12), "{:?}", r.levels);
    }
}
