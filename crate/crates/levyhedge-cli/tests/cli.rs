use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use levyhedge::experiment::coefficients_report;
use levyhedge::pricing::black_scholes_call;
use serde_json::Value;

const MERTON: &str = r#"
n_values = [4, 8, 16, 32]
paths_per_n = 1000
seed = 11

[model]
gamma_s = -0.02
sigma = 0.2
nu = { family = "merton", params = { lambda = 0.3, mu_j = -0.1, sigma_j = 0.15 } }

[payoff]
kind = "call"
strike = 1.0

[strategy_grid]
t_points = 3
y_points = 5

[numerics]
grid_points = 1024
repcheck_levels = [256, 512]
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_levyhedge"));
    c.env_remove("LEVYHEDGE_SEED");
    c
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).output().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

/// Data rows of a CSV output: skips the provenance comment and the header.
fn csv_rows(text: &str) -> Vec<Vec<f64>> {
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# levyhedge "));
    lines.next().unwrap();
    lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn with_payoff(kind: &str) -> String {
    MERTON.replace("kind = \"call\"\nstrike = 1.0", kind)
}

#[test]
fn print_defaults_is_a_valid_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin().arg("--print-defaults").output().unwrap();
    assert!(o.status.success());
    let p = write_config(dir.path(), "d.toml", std::str::from_utf8(&o.stdout).unwrap());
    assert!(run(&["coeffs"], &p).status.success());
}

#[test]
fn coeffs_match_library_values() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "m.toml", MERTON);
    let v = stdout_json(&run(&["coeffs"], &p));
    let config = toml::from_str(MERTON).unwrap();
    let lib = coefficients_report(&config).unwrap();
    let c = &v["coefficients"];
    assert_eq!(c["gamma_s"].as_f64().unwrap(), lib.coefficients.gamma_s);
    assert_eq!(c["norm_sigma_nu"].as_f64().unwrap(), lib.coefficients.norm_sigma_nu);
    assert_eq!(c["tradeoff_slope"].as_f64().unwrap(), lib.coefficients.tradeoff_slope);
    assert_eq!(v["triplet"]["gamma"].as_f64().unwrap(), lib.triplet.gamma);
    assert_eq!(v["mmm_assumption"]["holds"], Value::Bool(true));
    assert_eq!(v["martingale"], Value::Bool(false));
    assert_eq!(v["provenance"]["version"], Value::String(levyhedge::VERSION.into()));
}

#[test]
fn martingale_model_has_trivial_mmm() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "m.toml", &MERTON.replace("gamma_s = -0.02", "gamma_s = 0.0"));
    let v = stdout_json(&run(&["coeffs"], &p));
    assert_eq!(v["martingale"], Value::Bool(true));
    let v = stdout_json(&run(&["mmm"], &p));
    assert_eq!(v["trivial"], Value::Bool(true));
    assert_eq!(v["starred_gamma_s"].as_f64().unwrap(), 0.0);
}

#[test]
fn malformed_config_exits_one_with_field_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "bad.toml", &MERTON.replace("paths_per_n = 1000", "paths_per_n = \"many\""));
    let o = run(&["coeffs"], &p);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("paths_per_n") || err.contains("line"), "{err}");

    let p = write_config(dir.path(), "bad2.toml", &MERTON.replace("n_values = [4, 8, 16, 32]", "n_values = [8, 4]"));
    assert_eq!(run(&["coeffs"], &p).status.code(), Some(1));
    assert_eq!(bin().arg("rates").output().unwrap().status.code(), Some(1));
}

#[test]
fn strategy_trivial_payoffs() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "lin.toml", &with_payoff("kind = \"linear\""));
    let rows = csv_rows(std::str::from_utf8(&run(&["strategy"], &p).stdout).unwrap());
    assert_eq!(rows.len(), 15);
    assert!(rows.iter().all(|r| (r[2] - 1.0).abs() < 1e-8), "{rows:?}");

    let p = write_config(dir.path(), "const.toml", &with_payoff("kind = \"constant\"\nvalue = 3.0"));
    let rows = csv_rows(std::str::from_utf8(&run(&["strategy"], &p).stdout).unwrap());
    assert!(rows.iter().all(|r| r[2] == 0.0), "{rows:?}");
}

#[test]
fn strategy_without_jumps_is_black_scholes_delta() {
    let dir = tempfile::tempdir().unwrap();
    let text = MERTON
        .replace("gamma_s = -0.02", "gamma_s = 0.0")
        .replace(
            r#"nu = { family = "merton", params = { lambda = 0.3, mu_j = -0.1, sigma_j = 0.15 } }"#,
            r#"nu = { family = "zero" }"#,
        );
    let p = write_config(dir.path(), "bs.toml", &text);
    let rows = csv_rows(std::str::from_utf8(&run(&["strategy"], &p).stdout).unwrap());
    for r in rows {
        let (_, delta) = black_scholes_call(r[1], 1.0, 0.2, 1.0 - r[0]);
        assert!((r[2] - delta).abs() < 1e-4, "{r:?} vs {delta}");
    }
}

#[test]
fn outputs_are_deterministic_and_carry_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "m.toml", MERTON);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = bin().args(["simulate", "--threads", "2", "--out"]).arg(out).arg("--config").arg(&p).output().unwrap();
        assert!(o.status.success());
    }
    for f in ["paths.csv", "jumps.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f}");
        assert!(x.starts_with(b"# levyhedge "));
        assert!(!x.contains(&b'\r'));
    }
    let seeded = bin().env("LEVYHEDGE_SEED", "12").args(["simulate", "--config"]).arg(&p).output().unwrap();
    assert!(seeded.status.success());
    assert_ne!(seeded.stdout, std::fs::read(a.join("paths.csv")).unwrap());
    let bad_seed = bin().env("LEVYHEDGE_SEED", "twelve").args(["simulate", "--config"]).arg(&p).output().unwrap();
    assert_eq!(bad_seed.status.code(), Some(1));
}

#[test]
fn constant_payoff_rates_are_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let text = with_payoff("kind = \"constant\"\nvalue = 2.0") + "\n[table1_case]\nr = 1.0\ntheta = 1.0\n";
    let p = write_config(dir.path(), "c.toml", &text);
    let out = dir.path().join("out");
    let o = bin().args(["rates", "--out"]).arg(&out).arg("--config").arg(&p).output().unwrap();
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["verdict"], Value::String("Inconclusive".into()));
    for f in ["rates.json", "errors.csv", "rates.dat", "rates.gp"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let errors = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(errors.lines().count(), 2 + 4 * 1000);
}

fn replay_file(dir: &Path, exponent: f64) -> PathBuf {
    let mut s = String::from("# synthetic\nn,error\n");
    for n in [8usize, 16, 32, 64, 128, 256] {
        for i in 0..1000 {
            let z = 0.5 + ((i * 7919) % 1000) as f64 / 1000.0;
            s.push_str(&format!("{n},{}\n", z * (n as f64).powf(exponent)));
        }
    }
    let p = dir.join(format!("replay{exponent}.csv"));
    std::fs::write(&p, s).unwrap();
    p
}

#[test]
fn replay_verdicts_drive_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), "m.toml", &(MERTON.to_owned() + "\n[table1_case]\nr = 1.0\ntheta = 1.0\n"));
    let ok = bin().args(["rates", "--replay"]).arg(replay_file(dir.path(), -0.5)).arg("--config").arg(&p).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert_eq!(v["report"]["verdict"], Value::String("Consistent".into()));
    assert!((v["report"]["slope"].as_f64().unwrap() + 0.5).abs() < 1e-9);

    let bad = bin().args(["rates", "--replay"]).arg(replay_file(dir.path(), -1.0)).arg("--config").arg(&p).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(v["report"]["verdict"], Value::String("Inconsistent".into()));
}

#[test]
fn repcheck_constant_target_has_zero_residual() {
    let dir = tempfile::tempdir().unwrap();
    let text = MERTON.to_owned() + "\n[repcheck]\ntarget = \"constant\"\nvalue = 1.5\n";
    let p = write_config(dir.path(), "r.toml", &text);
    let v = stdout_json(&run(&["repcheck"], &p));
    for l in v["report"]["levels"].as_array().unwrap() {
        assert_eq!(l["residual"].as_f64().unwrap(), 0.0);
    }
}
