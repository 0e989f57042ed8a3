//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criterion 4 runs for hours; it is skipped unless
//! `LEVYHEDGE_ACCEPTANCE_SLOW=1` is set.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use levyhedge::experiment::{run_rates, run_repcheck, EpsilonRule, ExperimentConfig, ModelSpec, Numerics, PayoffSpec, Table1Override};
use levyhedge::levy::{
    check_mmm_assumption, classify_small_jumps, market_coefficients, minimal_martingale_measure, LevyMeasure,
    LevyTriplet,
};
use levyhedge::metrics::{
    lp_norm, reverse_holder_constant, sm_p_estimate, weighted_bmo_estimate, HolderDirection, WeightPath,
};
use levyhedge::pricing::{
    black_scholes_call, lrm_strategy, LogPayoff, PricingMethod, SemigroupEvaluator, StrategyField,
    DEFAULT_FIELD_TERMS,
};
use levyhedge::simulate::{
    adapted_time_net, fine_grid, mesh_size, path_rng, sample_weight_paths, HedgeExperiment, HedgeNet,
    SimulationScheme,
};
use levyhedge::{Payoff, PayoffKind};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

/// Outcome of one criterion: pass flag and a one-line summary.
type Outcome = (bool, String);

fn merton_nu() -> LevyMeasure {
    LevyMeasure::Merton {
        lambda: 0.3,
        mu_j: -0.1,
        sigma_j: 0.15,
    }
}

fn models() -> Vec<(&'static str, LevyTriplet)> {
    let t = |gs: f64, s: f64, nu| LevyTriplet::with_gamma_s(gs, s, nu).unwrap();
    vec![
        ("merton", t(-0.02, 0.2, merton_nu())),
        (
            "kou",
            t(
                -0.02,
                0.2,
                LevyMeasure::Kou {
                    lambda: 0.5,
                    p: 0.4,
                    eta_plus: 10.0,
                    eta_minus: 5.0,
                },
            ),
        ),
        (
            "cgmy",
            t(
                -0.02,
                0.1,
                LevyMeasure::Cgmy {
                    c: 0.1,
                    g: 5.0,
                    m: 5.0,
                    y: 0.5,
                },
            ),
        ),
        (
            "nig",
            t(
                -0.02,
                0.1,
                LevyMeasure::Nig {
                    alpha: 10.0,
                    beta: -2.0,
                    delta: 0.3,
                },
            ),
        ),
        ("bs", t(-0.02, 0.2, LevyMeasure::Zero)),
    ]
}

fn evaluator(triplet: &LevyTriplet, payoff: Payoff) -> SemigroupEvaluator {
    let mmm = minimal_martingale_measure(triplet).unwrap();
    SemigroupEvaluator::new(mmm.starred_triplet, payoff, PricingMethod::default(), 1.0).unwrap()
}

fn criterion_1() -> Outcome {
    let mut worst_theta = 0.0f64;
    let mut worst_error = 0.0f64;
    for (_, t) in models() {
        assert!(check_mmm_assumption(&t).unwrap().holds);
        let mc = market_coefficients(&t).unwrap();
        let ev = evaluator(&t, Payoff::linear());
        for i in 0..5 {
            for j in 0..5 {
                let v = lrm_strategy(&ev, &mc, &t.nu, 0.2 * i as f64, 0.6 + 0.2 * j as f64).unwrap();
                worst_theta = worst_theta.max((v.theta - 1.0).abs());
            }
        }
        let field = StrategyField::new(&ev, &mc, &t.nu, 0.05, 20.0, DEFAULT_FIELD_TERMS).unwrap();
        let nets: Vec<HedgeNet> = [4usize, 16, 64]
            .iter()
            .map(|&n| HedgeNet {
                net: adapted_time_net(n, 0.5, 1.0).unwrap(),
                epsilon: 0.05,
                kappa: 0.25,
            })
            .collect();
        let extra: Vec<f64> = nets.iter().flat_map(|n| n.net.knots.clone()).collect();
        let exp = HedgeExperiment {
            scheme: SimulationScheme::new(&t).unwrap(),
            x0: 0.0,
            grid: fine_grid(1 << 10, 1.0, &extra).unwrap().into(),
            nets,
            metric_times: vec![0.0, 1.0],
            eta_weight: None,
            oracle_tolerance: 1e-12,
            seed: 1,
        };
        for o in exp.run(&field, 0..1000).unwrap() {
            for r in &o.runs {
                worst_error = worst_error.max(r.e_rm.abs()).max(r.e_corr.abs());
            }
        }
    }
    (
        worst_theta <= 1e-8 && worst_error <= 1e-12,
        format!("max |theta - 1| = {worst_theta:.1e}, max terminal error = {worst_error:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let t = LevyTriplet::with_gamma_s(0.0, 0.2, LevyMeasure::Zero).unwrap();
    let mc = market_coefficients(&t).unwrap();
    let ev = evaluator(&t, Payoff::call(1.0));
    let mut worst = 0.0f64;
    for i in 0..10 {
        for j in 0..10 {
            let (tt, y) = (0.09 * i as f64, 0.6 + 0.09 * j as f64);
            let v = lrm_strategy(&ev, &mc, &t.nu, tt, y).unwrap();
            worst = worst.max((v.theta - black_scholes_call(y, 1.0, 0.2, 1.0 - tt).1).abs());
        }
    }
    (worst <= 1e-4, format!("max |theta - delta_BS| = {worst:.2e}"))
}

fn merton_call_config() -> ExperimentConfig {
    ExperimentConfig::example()
}

fn criterion_3() -> Outcome {
    let c = merton_call_config();
    let out = run_rates(&c).unwrap();
    let p = out.parameters;
    let ok_params = (p.r, p.theta, p.kappa) == (1.0, 1.0, 0.0);
    let s = out.report.slope;
    (
        ok_params && (-0.62..=-0.38).contains(&s),
        format!(
            "slope {s:.3}, CI [{:.3}, {:.3}], verdict {:?} (r={}, theta={}, kappa={})",
            out.report.slope_ci.0, out.report.slope_ci.1, out.report.verdict, p.r, p.theta, p.kappa
        ),
    )
}

fn criterion_4() -> Outcome {
    let c = ExperimentConfig {
        model: ModelSpec {
            gamma: None,
            gamma_s: Some(-0.01),
            sigma: 0.0,
            nu: LevyMeasure::Cgmy {
                c: 0.1,
                g: 5.0,
                m: 5.0,
                y: 1.5,
            },
        },
        payoff: PayoffSpec {
            kind: PayoffKind::Binary { strike: 1.0 },
            holder_eta: None,
            sobolev_q: None,
        },
        table1_case: Some(Table1Override {
            r: 1.6,
            theta: 0.3,
            kappa: None,
        }),
        n_values: vec![16, 32, 64, 128, 256, 512],
        paths_per_n: 4000,
        epsilon_rule: EpsilonRule::default(),
        ..ExperimentConfig::example()
    };
    let out = run_rates(&c).unwrap();
    let s = out.report.slope;
    let predicted = -1.0 / (2.0 * 1.6);
    (
        (s - predicted).abs() <= 0.12,
        format!("slope {s:.3} vs predicted {predicted:.4}, verdict {:?}", out.report.verdict),
    )
}

fn criterion_5() -> Outcome {
    let c = ExperimentConfig {
        payoff: PayoffSpec {
            kind: PayoffKind::Binary { strike: 1.0 },
            holder_eta: None,
            sobolev_q: None,
        },
        paths_per_n: 4000,
        numerics: Numerics {
            repcheck_levels: vec![1 << 12, 1 << 13, 1 << 14],
            ..Numerics::default()
        },
        ..ExperimentConfig::example()
    };
    let f = LogPayoff::Price(Payoff::binary(1.0));
    let r = run_repcheck(&c, &f).unwrap();
    let levels: Vec<String> = r.levels.iter().map(|l| format!("{:.4}", l.residual)).collect();
    (
        r.monotone && r.relative_residual < 0.05,
        format!(
            "residuals [{}], relative {:.2}% of ||f||={:.3}",
            levels.join(", "),
            100.0 * r.relative_residual,
            r.target_norm
        ),
    )
}

fn random_triplet(rng: &mut impl Rng) -> LevyTriplet {
    let nu = match rng.random_range(0..4) {
        0 => LevyMeasure::Merton {
            lambda: rng.random_range(0.05..2.0),
            mu_j: rng.random_range(-0.3..0.2),
            sigma_j: rng.random_range(0.02..0.3),
        },
        1 => LevyMeasure::Kou {
            lambda: rng.random_range(0.05..2.0),
            p: rng.random_range(0.1..0.9),
            eta_plus: rng.random_range(4.0..20.0),
            eta_minus: rng.random_range(2.0..20.0),
        },
        2 => LevyMeasure::Cgmy {
            c: rng.random_range(0.02..0.3),
            g: rng.random_range(2.0..10.0),
            m: rng.random_range(4.0..12.0),
            y: rng.random_range(0.1..1.2),
        },
        _ => LevyMeasure::Nig {
            alpha: rng.random_range(6.0..20.0),
            beta: rng.random_range(-3.0..1.0),
            delta: rng.random_range(0.05..0.5),
        },
    };
    let sigma = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.05..0.4) };
    LevyTriplet::with_gamma_s(rng.random_range(-0.15..0.05), sigma, nu).unwrap()
}

fn criterion_6() -> Outcome {
    let mut rng = path_rng(0x6d6d6d, 0);
    let mut triplets = Vec::new();
    while triplets.len() < 50 {
        let t = random_triplet(&mut rng);
        if check_mmm_assumption(&t).map(|c| c.holds).unwrap_or(false) {
            triplets.push(t);
        }
    }
    let results: Vec<(f64, usize, f64)> = triplets
        .par_iter()
        .enumerate()
        .map(|(k, t)| {
            let star = minimal_martingale_measure(t).unwrap().starred_triplet;
            let gamma_s = -star.characteristic_exponent(Complex64::new(0.0, -1.0)).unwrap().re;
            let (lo, hi) = star.nu.support();
            let (lo, hi) = (lo.max(-20.0), hi.min(20.0));
            let mut probe = path_rng(0x9e37, k as u64);
            let negative = if star.nu.is_zero() {
                0
            } else {
                // the weight dν*/dν where ν has a representable density
                let mut bad = 0;
                let mut probes = 0;
                while probes < 10_000 {
                    let x = probe.random_range(lo..hi);
                    let base = t.nu.density(x);
                    if x == 0.0 || !(base > f64::MIN_POSITIVE) {
                        continue;
                    }
                    probes += 1;
                    if !(star.nu.density(x) / base > 0.0) {
                        bad += 1;
                    }
                }
                bad
            };
            let scheme = SimulationScheme::new(&star).unwrap();
            let samples: Vec<f64> = (0..100_000u64)
                .into_par_iter()
                .map(|i| {
                    let mut r = path_rng(0xe57 + k as u64, i);
                    scheme.sample_increment(1.0, &mut r).exp()
                })
                .collect();
            let n = samples.len() as f64;
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let z = (mean - 1.0).abs() / (var / n).sqrt();
            (gamma_s.abs(), negative, z)
        })
        .collect();
    let worst_gamma = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let bad_density: usize = results.iter().map(|r| r.1).sum();
    let worst_z = results.iter().map(|r| r.2).fold(0.0, f64::max);
    (
        worst_gamma <= 1e-7 && bad_density == 0 && worst_z <= 4.0,
        format!(
            "max |gamma_S*| = {worst_gamma:.1e}, nonpositive weight probes = {bad_density}/500000, max |E*S_T - S_0| = {worst_z:.2} s.e."
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut violations = 0usize;
    for k in 1..=10 {
        let theta = k as f64 / 10.0;
        for n in 1..=1000usize {
            let net = adapted_time_net(n, theta, 1.0).unwrap();
            let m = mesh_size(&net, theta);
            let (lo, hi) = (1.0 / n as f64, 1.0 / (theta * n as f64));
            if !(m >= lo - 1e-12 && m <= hi + 1e-12) {
                violations += 1;
            }
        }
    }
    (violations == 0, format!("{violations} violations over 10^4 (n, theta) pairs"))
}

fn criterion_8() -> Outcome {
    let mut worst = 0.0f64;
    let mut found = Vec::new();
    for y in [0.5, 1.0, 1.5] {
        let nu = LevyMeasure::Cgmy {
            c: 0.1,
            g: 5.0,
            m: 5.0,
            y,
        };
        let b = classify_small_jumps(&nu).unwrap().bg_index;
        worst = worst.max((b - y).abs());
        found.push(format!("{b:.3}"));
    }
    let merton = classify_small_jumps(&merton_nu()).unwrap().bg_index;
    (
        worst <= 0.1 && merton == 0.0,
        format!("CGMY indices [{}], Merton {merton}", found.join(", ")),
    )
}

/// `∫ h ν` for the Merton measure by composite Simpson on `μ ± 14σ`.
fn merton_integral(lambda: f64, mu: f64, s: f64, h: impl Fn(f64) -> f64) -> f64 {
    let n = 20_000;
    let (a, b) = (mu - 14.0 * s, mu + 14.0 * s);
    let step = (b - a) / n as f64;
    let g = |x: f64| {
        let z = (x - mu) / s;
        h(x) * lambda * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
    };
    let mut acc = g(a) + g(b);
    for i in 1..n {
        acc += g(a + i as f64 * step) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * step / 3.0
}

fn criterion_9() -> Outcome {
    let martingale = LevyTriplet::with_gamma_s(0.0, 0.2, merton_nu()).unwrap();
    let v0 = minimal_martingale_measure(&martingale).unwrap().v_triplet;
    let trivial = [1.5, 2.0, 3.0, 5.0]
        .iter()
        .all(|&s| reverse_holder_constant(&v0, s, 1.0, HolderDirection::PstarOverP).unwrap() == 1.0);

    let (lambda, mu, sj, sigma) = (0.3, -0.1, 0.15, 0.2);
    let t = LevyTriplet::with_gamma_s(-0.02, sigma, merton_nu()).unwrap();
    let flag = market_coefficients(&t).unwrap().exp_moment_flags[&3];
    let mmm = minimal_martingale_measure(&t).unwrap();
    let c = reverse_holder_constant(&mmm.v_triplet, 3.0, 1.0, HolderDirection::PstarOverP);
    // E 𝓔(U)^3 = exp(3a²σ² + ∫((1 + a(e^x - 1))³ - 1 - 3a(e^x - 1)) ν) for the martingale U
    let a = mmm.u_coefficient;
    let jumps = merton_integral(lambda, mu, sj, |x| {
        let u = a * x.exp_m1();
        (1.0 + u).powi(3) - 1.0 - 3.0 * u
    });
    let lambda3 = 3.0 * a * a * sigma * sigma + jumps;
    let expected = (lambda3.abs() / 3.0).exp();
    let merton_ok = match &c {
        Ok(c) => flag && (c - expected).abs() <= 1e-6 * expected,
        Err(_) => !flag,
    };

    // a heavier right tail without the third exponential moment
    let kou = LevyTriplet::with_gamma_s(
        -0.02,
        0.2,
        LevyMeasure::Kou {
            lambda: 0.5,
            p: 0.4,
            eta_plus: 2.5,
            eta_minus: 5.0,
        },
    )
    .unwrap();
    let kou_flag = market_coefficients(&kou).unwrap().exp_moment_flags[&3];
    let kou_v = minimal_martingale_measure(&kou).unwrap().v_triplet;
    let kou_ok = reverse_holder_constant(&kou_v, 3.0, 1.0, HolderDirection::PstarOverP).is_ok() == kou_flag;

    let shown = c.as_ref().map_or_else(|e| e.to_string(), |v| format!("{v:.10}"));
    (
        trivial && merton_ok && kou_ok,
        format!("V=0 gives 1: {trivial}; Merton c = {shown} vs independent {expected:.10}; Kou (no 3rd moment) consistent: {kou_ok}"),
    )
}

fn criterion_10() -> Outcome {
    let t = LevyTriplet::with_gamma_s(-0.02, 0.2, merton_nu()).unwrap();
    let scheme = SimulationScheme::new(&t).unwrap();
    let paths = 10_000u64;
    let metric_32 = adapted_time_net(31, 1.0, 1.0).unwrap().knots;
    let metric_64 = adapted_time_net(63, 1.0, 1.0).unwrap().knots;
    let mut extra = metric_32.clone();
    extra.extend(&metric_64);

    // hedging errors and weights Φ(1/2) of the Merton call on 32 metric times
    let mc = market_coefficients(&t).unwrap();
    let ev = evaluator(&t, Payoff::call(1.0));
    let field = StrategyField::new(&ev, &mc, &t.nu, 0.05, 20.0, DEFAULT_FIELD_TERMS).unwrap();
    let net = HedgeNet {
        net: adapted_time_net(16, 1.0, 1.0).unwrap(),
        epsilon: 0.25,
        kappa: 0.0,
    };
    extra.extend(&net.net.knots);
    let grid: Arc<[f64]> = fine_grid(1 << 12, 1.0, &extra).unwrap().into();
    let exp = HedgeExperiment {
        scheme: scheme.clone(),
        x0: 0.0,
        grid: grid.clone(),
        nets: vec![net],
        metric_times: metric_32.clone(),
        eta_weight: Some(0.5),
        oracle_tolerance: 1e-2,
        seed: 10,
    };
    let out = exp.run(&field, 0..paths).unwrap();
    let errors: Vec<Vec<f64>> = out.iter().map(|o| o.error_paths[0].clone()).collect();
    let weights: Vec<WeightPath> = out.iter().map(|o| o.weight.clone().unwrap()).collect();
    let all: Vec<usize> = (0..metric_32.len()).collect();
    let even: Vec<usize> = all.iter().copied().filter(|i| i % 2 == 0).collect();
    let p = 2.0;
    let bmo = weighted_bmo_estimate(&errors, &weights, &all, p).unwrap();
    let doubled: Vec<Vec<f64>> = errors.iter().map(|e| e.iter().map(|v| 2.0 * v).collect()).collect();
    let homogeneous = weighted_bmo_estimate(&doubled, &weights, &all, p).unwrap() == 2.0 * bmo;
    let zero: Vec<Vec<f64>> = errors.iter().map(|e| vec![0.0; e.len()]).collect();
    let zero_ok = weighted_bmo_estimate(&zero, &weights, &all, p).unwrap() == 0.0;
    let bmo_mono = weighted_bmo_estimate(&errors, &weights, &even, p).unwrap() <= bmo;
    let sm = sm_p_estimate(&weights, 3.0, &all).unwrap();
    let sm_mono = sm_p_estimate(&weights, 3.0, &even).unwrap() <= sm && sm >= 1.0;
    let scaled: Vec<WeightPath> = weights.iter().map(|w| w.scaled(3.0)).collect();
    let sm_scale = sm_p_estimate(&scaled, 3.0, &all).unwrap();
    let sm_homogeneous = ((sm_scale - sm) / sm).abs() <= 1e-12;
    let ones: Vec<WeightPath> = (0..paths).map(|_| WeightPath::constant(0.5, 1.0, metric_32.len())).collect();
    let phi_one = sm_p_estimate(&ones, 3.0, &all).unwrap() == 1.0;
    let terminal: Vec<f64> = errors.iter().map(|e| *e.last().unwrap()).collect();
    let ordering = [1.0, 1.5, 2.0, 3.0, 4.0]
        .windows(2)
        .all(|w| lp_norm(&terminal, w[0]).unwrap().value <= lp_norm(&terminal, w[1]).unwrap().value);

    // sm_3 of Φ(0) on 32 and 64 metric times
    let w32 = sample_weight_paths(&scheme, 0.0, &grid, &metric_32, 0.0, 33, 0..2 * paths).unwrap();
    let w64 = sample_weight_paths(&scheme, 0.0, &grid, &metric_64, 0.0, 33, 0..2 * paths).unwrap();
    let s32 = sm_p_estimate(&w32, 3.0, &(0..metric_32.len()).collect::<Vec<_>>()).unwrap();
    let s64 = sm_p_estimate(&w64, 3.0, &(0..metric_64.len()).collect::<Vec<_>>()).unwrap();
    let stable = s32.is_finite() && s64.is_finite() && (s64 - s32).abs() / s32 < 0.10;

    let checks = [
        ("bmo homogeneity", homogeneous),
        ("bmo E=0", zero_ok),
        ("bmo grid monotone", bmo_mono),
        ("sm grid monotone and >= 1", sm_mono),
        ("sm scale invariance", sm_homogeneous),
        ("sm Phi=1", phi_one),
        ("lp ordering", ordering),
        ("sm_3 Phi(0) stable", stable),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    (
        failed.is_empty(),
        format!(
            "bmo_2 = {bmo:.4}, sm_3(Phi(1/2)) = {sm:.4}, sm_3(Phi(0)) 32/64 points = {s32:.4}/{s64:.4}{}",
            if failed.is_empty() { String::new() } else { format!("; failed: {}", failed.join(", ")) }
        ),
    )
}

fn main() {
    let slow = std::env::var("LEVYHEDGE_ACCEPTANCE_SLOW").is_ok_and(|v| v == "1");
    let filter: Option<BTreeMap<usize, ()>> = std::env::var("LEVYHEDGE_ACCEPTANCE_ONLY").ok().map(|v| {
        v.split(',').filter_map(|s| s.trim().parse().ok()).map(|k| (k, ())).collect()
    });
    let criteria: [(usize, &str, fn() -> Outcome); 10] = [
        (1, "replication identity", criterion_1),
        (2, "Black-Scholes limit", criterion_2),
        (3, "rate check, finite activity (Merton call)", criterion_3),
        (4, "rate check, infinite activity (CGMY binary)", criterion_4),
        (5, "martingale representation (Merton binary)", criterion_5),
        (6, "minimal martingale measure invariants", criterion_6),
        (7, "time-net mesh bounds", criterion_7),
        (8, "Blumenthal-Getoor index recovery", criterion_8),
        (9, "reverse Hölder constants", criterion_9),
        (10, "estimator sanity", criterion_10),
    ];
    let mut failures = Vec::new();
    for (k, name, f) in criteria {
        if filter.as_ref().is_some_and(|m| !m.contains_key(&k)) {
            continue;
        }
        if k == 4 && !slow {
            println!("acceptance #{k:<2} SKIP  {name}: slow, set LEVYHEDGE_ACCEPTANCE_SLOW=1 to run");
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(o) => o,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        let secs = start.elapsed().as_secs_f64();
        println!(
            "acceptance #{k:<2} {}  {name}: {detail} [{secs:.1}s]",
            if pass { "PASS" } else { "FAIL" }
        );
        if !pass {
            failures.push(k);
        }
    }
    if !failures.is_empty() {
        println!("acceptance failures: {failures:?}");
        std::process::exit(1);
    }
}
