//! Simulation scheme for a Lévy process: exact compound-Poisson sampling of
//! the jumps above a cutoff `δ`, and a Gaussian substitute for the jumps below
//! it (Asmussen–Rosiński).
//!
//! With `σ_δ² = ∫_{|x|≤δ} x² ν(dx)` the simulated process is
//! `X^δ_t = b t + √(σ² + σ_δ²) W_t + Σ_{s≤t, |ΔX_s|>δ} ΔX_s`, where the drift
//! `b` is chosen so that `E e^{X^δ_t} = E e^{X_t}`; the substitution therefore
//! never breaks the martingale property of the price.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal};

use crate::error::{Error, Result};
use crate::levy::{JumpLaw, LevyMeasure, LevyTriplet};
use crate::quad::QuadOptions;

/// Default budget for the intensity `ν(|x| > δ)` of simulated jumps.
pub const DEFAULT_JUMP_BUDGET: f64 = 1e3;

/// Sampler for the normalized law of the jumps with `|x| > δ`.
#[derive(Debug, Clone)]
enum JumpSampler {
    None,
    Atoms { sizes: Vec<f64>, cumulative: Vec<f64> },
    Uniform { lo: f64, hi: f64 },
    Normal(Normal<f64>),
    Kou { p: f64, up: Exp<f64>, down: Exp<f64> },
    Table(TabulatedLaw),
}

/// Piecewise-linear density on cells plus atoms, sampled by inversion.
#[derive(Debug, Clone)]
struct TabulatedLaw {
    /// Cell edges (`edges[i]..edges[i+1]`) and densities at the edges.
    cells: Vec<(f64, f64, f64, f64)>,
    atoms: Vec<f64>,
    /// Cumulative masses over atoms then cells, normalized to end at 1.
    cumulative: Vec<f64>,
}

impl TabulatedLaw {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self.cumulative.partition_point(|c| *c <= u).min(self.cumulative.len() - 1);
        if i < self.atoms.len() {
            return self.atoms[i];
        }
        let (e0, e1, d0, d1) = self.cells[i - self.atoms.len()];
        let v: f64 = rng.random();
        let s = if (d1 - d0).abs() <= 1e-9 * (d0 + d1) || !(d0 >= 0.0 && d1 >= 0.0) {
            v
        } else {
            // invert ∫_0^s (d0 + (d1-d0)r) dr = v (d0+d1)/2
            let disc = d0 * d0 + (d1 - d0) * (d0 + d1) * v;
            (disc.max(0.0).sqrt() - d0) / (d1 - d0)
        };
        e0 + s.clamp(0.0, 1.0) * (e1 - e0)
    }
}

/// Whether every custom density inside `nu` opted into tabulated sampling.
fn custom_sampler_allowed(nu: &LevyMeasure) -> bool {
    match nu {
        LevyMeasure::Custom(c) => c.tabulated_sampler,
        LevyMeasure::Reweighted { base, .. } | LevyMeasure::Image { base, .. } => {
            custom_sampler_allowed(base)
        }
        _ => true,
    }
}

fn tail_opts() -> QuadOptions {
    QuadOptions::with_tol(1e-15, 1e-10)
}

/// Edge beyond which `∫ (1 + e^x) ν` is negligible on the given side.
fn far_edge(nu: &LevyMeasure, sign: f64, support_edge: f64, total: f64) -> f64 {
    if support_edge.is_finite() {
        return support_edge;
    }
    let mut z: f64 = 0.5;
    while z < 700.0 {
        let (lo, hi) = if sign > 0.0 {
            (z, f64::INFINITY)
        } else {
            (f64::NEG_INFINITY, -z)
        };
        let tail = nu.integrate_over(&|x: f64| 1.0 + x.exp(), lo, hi, &[], &tail_opts()).value;
        if tail.abs() <= 1e-14 * total.max(1.0) {
            break;
        }
        z *= 1.25;
    }
    sign * z
}

fn build_table(nu: &LevyMeasure, delta: f64) -> Result<TabulatedLaw> {
    let (slo, shi) = nu.support();
    let atoms: Vec<(f64, f64)> = nu.atoms().into_iter().filter(|(x, _)| x.abs() > delta).collect();
    let cont_mass = nu
        .integrate_over(&|_| 1.0, f64::NEG_INFINITY, -delta.max(1e-300), &[], &tail_opts())
        .value
        + nu.integrate_over(&|_| 1.0, delta.max(1e-300), f64::INFINITY, &[], &tail_opts()).value;
    let total = cont_mass + atoms.iter().map(|(_, w)| w).sum::<f64>();
    let mut edges_pos = Vec::new();
    let mut edges_neg = Vec::new();
    for (sign, edges) in [(1.0, &mut edges_pos), (-1.0, &mut edges_neg)] {
        let support_edge = if sign > 0.0 { shi } else { slo };
        if sign * support_edge <= delta {
            continue;
        }
        let far = sign * far_edge(nu, sign, support_edge, total);
        let inner = if delta > 0.0 { delta } else { 0.0 };
        let mut e = inner;
        if delta > 0.0 {
            // geometric cells resolve the small-jump singularity
            let knee = far.min(1.0);
            while e < knee {
                edges.push(e);
                e = (e * 1.02).min(knee);
            }
        }
        let cells = 4096;
        let start = e;
        for j in 0..=cells {
            edges.push(start + (far - start) * j as f64 / cells as f64);
        }
        edges.dedup();
        for v in edges.iter_mut() {
            *v *= sign;
        }
    }
    let mut cells = Vec::new();
    let mut masses = Vec::new();
    let opts = QuadOptions::with_tol(1e-16, 1e-8);
    for edges in [&edges_neg, &edges_pos] {
        for w in edges.windows(2) {
            let (e0, e1) = if w[0] < w[1] { (w[0], w[1]) } else { (w[1], w[0]) };
            // atoms are handled separately; integrate the continuous part only
            let m = crate::quad::integrate_finite(|x: f64| nu.density(x), e0, e1, &opts).value;
            if m > 0.0 {
                cells.push((e0, e1, nu.density(e0).max(0.0), nu.density(e1).max(0.0)));
                masses.push(m);
            }
        }
    }
    let mut cumulative = Vec::with_capacity(atoms.len() + masses.len());
    let mut acc = 0.0;
    for (_, w) in &atoms {
        acc += w;
        cumulative.push(acc);
    }
    for m in &masses {
        acc += m;
        cumulative.push(acc);
    }
    if !(acc > 0.0) {
        return Err(Error::UnsupportedSampler("jump law has no mass above the cutoff".into()));
    }
    for c in cumulative.iter_mut() {
        *c /= acc;
    }
    Ok(TabulatedLaw {
        cells,
        atoms: atoms.into_iter().map(|(x, _)| x).collect(),
        cumulative,
    })
}

/// Mass `ν(|x| > δ)` (atoms included).
fn mass_above(nu: &LevyMeasure, delta: f64) -> f64 {
    let f = |x: f64| if x.abs() > delta { 1.0 } else { 0.0 };
    nu.integrate(&f, &[-delta, delta], &tail_opts()).value
}

/// Cutoff `δ` with `ν(|x| > δ) ≤ budget`; `0` for finite-activity measures.
pub fn default_cutoff(nu: &LevyMeasure, budget: f64) -> f64 {
    if nu.finite_activity() {
        return 0.0;
    }
    // ν(|x| > δ) is nonincreasing in δ: bisection in log δ
    let (mut lo, mut hi) = (-30.0f64, 0.0f64);
    if mass_above(nu, hi.exp()) > budget {
        return 1.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mass_above(nu, mid.exp()) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi.exp()
}

/// Drift, Gaussian part and jump sampler of the simulated process.
#[derive(Debug, Clone)]
pub struct SimulationScheme {
    /// Drift `b` of the simulated process.
    pub drift: f64,
    /// Brownian coefficient of the model.
    pub sigma: f64,
    /// `σ_δ`, standard deviation per unit time of the substituted small jumps.
    pub small_jump_sigma: f64,
    /// Cutoff below which jumps are replaced by a Gaussian term.
    pub delta: f64,
    /// Intensity `ν(|x| > δ)` of simulated jumps.
    pub jump_rate: f64,
    sampler: JumpSampler,
}

impl SimulationScheme {
    /// Scheme with the default cutoff (jump budget [`DEFAULT_JUMP_BUDGET`]).
    pub fn new(t: &LevyTriplet) -> Result<Self> {
        SimulationScheme::with_cutoff(t, None)
    }

    /// Scheme with an explicit cutoff `δ` (`None` for the default).
    pub fn with_cutoff(t: &LevyTriplet, delta: Option<f64>) -> Result<Self> {
        t.validate()?;
        let nu = &t.nu;
        if !custom_sampler_allowed(nu) {
            return Err(Error::UnsupportedSampler(
                "custom Lévy density without a declared sampler".into(),
            ));
        }
        let delta = match delta {
            Some(d) if d >= 0.0 && d.is_finite() => d,
            Some(_) => return Err(Error::invalid("cutoff must be finite and nonnegative")),
            None => default_cutoff(nu, DEFAULT_JUMP_BUDGET),
        };
        let opts = QuadOptions::with_tol(1e-15, 1e-12);
        // σ_δ² and the exponential correction over |x| ≤ δ
        let (small_var, exp_corr) = if delta > 0.0 {
            let v = nu
                .integrate_over(&|x: f64| x * x, -delta, delta, &[], &opts)
                .ok_or_fail("small-jump variance")?;
            let c = nu
                .integrate_over(
                    &|x: f64| crate::special::exp_remainder1_real(x) - 0.5 * x * x,
                    -delta,
                    delta,
                    &[],
                    &opts,
                )
                .ok_or_fail("small-jump exponential correction")?;
            (v, c)
        } else {
            (0.0, 0.0)
        };
        let compensated = nu
            .integrate(
                &|x: f64| if x.abs() > delta && x.abs() <= 1.0 { x } else { 0.0 },
                &[-delta, delta],
                &opts,
            )
            .ok_or_fail("compensator of the simulated jumps")?;
        let drift = t.gamma - compensated + exp_corr;

        let (sampler, rate) = if nu.is_zero() {
            (JumpSampler::None, 0.0)
        } else {
            match nu {
                LevyMeasure::CompoundPoisson { intensity, jump_law } if delta == 0.0 => match jump_law {
                    JumpLaw::Atoms { .. } => {
                        let atoms = nu.atoms();
                        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
                        let mut acc = 0.0;
                        let cumulative = atoms
                            .iter()
                            .map(|(_, w)| {
                                acc += w / total;
                                acc
                            })
                            .collect();
                        (
                            JumpSampler::Atoms {
                                sizes: atoms.iter().map(|(x, _)| *x).collect(),
                                cumulative,
                            },
                            total,
                        )
                    }
                    JumpLaw::Uniform { lo, hi } => (JumpSampler::Uniform { lo: *lo, hi: *hi }, *intensity),
                },
                LevyMeasure::Merton {
                    lambda,
                    mu_j,
                    sigma_j,
                } if delta == 0.0 => (
                    JumpSampler::Normal(
                        Normal::new(*mu_j, *sigma_j).map_err(|e| Error::invalid(e.to_string()))?,
                    ),
                    *lambda,
                ),
                LevyMeasure::Kou {
                    lambda,
                    p,
                    eta_plus,
                    eta_minus,
                } if delta == 0.0 => (
                    JumpSampler::Kou {
                        p: *p,
                        up: Exp::new(*eta_plus).map_err(|e| Error::invalid(e.to_string()))?,
                        down: Exp::new(*eta_minus).map_err(|e| Error::invalid(e.to_string()))?,
                    },
                    *lambda,
                ),
                _ => {
                    let table = build_table(nu, delta)?;
                    (JumpSampler::Table(table), mass_above(nu, delta))
                }
            }
        };
        Ok(SimulationScheme {
            drift,
            sigma: t.sigma,
            small_jump_sigma: small_var.sqrt(),
            delta,
            jump_rate: rate,
            sampler,
        })
    }

    /// Standard deviation per unit time of the Gaussian part.
    pub fn diffusion(&self) -> f64 {
        self.sigma.hypot(self.small_jump_sigma)
    }

    /// One jump of size `|x| > δ`.
    pub fn sample_jump<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.sampler {
            JumpSampler::None => 0.0,
            JumpSampler::Atoms { sizes, cumulative } => {
                let u: f64 = rng.random();
                let i = cumulative.partition_point(|c| *c <= u).min(sizes.len() - 1);
                sizes[i]
            }
            JumpSampler::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            JumpSampler::Normal(n) => n.sample(rng),
            JumpSampler::Kou { p, up, down } => {
                if rng.random::<f64>() < *p {
                    up.sample(rng)
                } else {
                    -down.sample(rng)
                }
            }
            JumpSampler::Table(t) => t.sample(rng),
        }
    }

    /// Number of jumps above the cutoff during a period of length `dt`.
    pub fn sample_count<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> u64 {
        let mean = self.jump_rate * dt;
        if !(mean > 0.0) {
            return 0;
        }
        Poisson::new(mean).map(|p| p.sample(rng) as u64).unwrap_or(0)
    }

    /// `X^δ_τ - X^δ_0`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, tau: f64, rng: &mut R) -> f64 {
        let n = self.sample_count(tau, rng);
        let mut x = 0.0;
        for _ in 0..n {
            x += self.sample_jump(rng);
        }
        let z: f64 = StandardNormal.sample(rng);
        x + self.drift * tau + self.diffusion() * tau.sqrt() * z
    }
}
