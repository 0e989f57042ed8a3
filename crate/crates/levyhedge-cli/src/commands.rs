//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::Path;

use levyhedge::experiment::{
    coefficients_report, rate_parameters, run_rates, run_repcheck, simulate_paths, simulation_report_times,
    strategy_surface, HedgeSetup, RateParameters,
};
use levyhedge::levy::{market_coefficients, MeasureChange};
use levyhedge::metrics::{convergence_rate, RateReport, Verdict};
use levyhedge::simulate::HedgeRun;
use serde::Serialize;

use crate::config::LoadedConfig;
use crate::error::{CliError, EXIT_INCONSISTENT, EXIT_OK};
use crate::output::{csv, json, Provenance, Sink};

pub fn coeffs(cfg: &LoadedConfig, sink: &Sink) -> Result<i32, CliError> {
    let report = coefficients_report(&cfg.config)?;
    sink.primary("coeffs.json", &json(&Provenance::new(&cfg.hash), &report))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct MmmReport {
    measure_change: MeasureChange,
    trivial: bool,
    /// `γ_S` of the starred triplet; zero up to rounding.
    starred_gamma_s: f64,
}

pub fn mmm(cfg: &LoadedConfig, sink: &Sink) -> Result<i32, CliError> {
    let setup = HedgeSetup::new(&cfg.config)?;
    let report = MmmReport {
        starred_gamma_s: market_coefficients(&setup.measure_change.starred_triplet)?.gamma_s,
        trivial: setup.measure_change.is_trivial(),
        measure_change: setup.measure_change,
    };
    sink.primary("mmm.json", &json(&Provenance::new(&cfg.hash), &report))?;
    Ok(EXIT_OK)
}

pub fn strategy(cfg: &LoadedConfig, sink: &Sink) -> Result<i32, CliError> {
    let rows = strategy_surface(&cfg.config)?;
    let text = csv(
        &Provenance::new(&cfg.hash),
        "t,y,theta,diffusion_part,jump_part",
        rows.iter()
            .map(|r| format!("{},{},{},{},{}", r.t, r.y, r.theta, r.diffusion_part, r.jump_part)),
    );
    sink.primary("strategy.csv", &text)?;
    Ok(EXIT_OK)
}

pub fn simulate(cfg: &LoadedConfig, sink: &Sink) -> Result<i32, CliError> {
    let prov = Provenance::new(&cfg.hash);
    let paths = simulate_paths(&cfg.config)?;
    let times = simulation_report_times(&cfg.config)?;
    let mut rows = Vec::with_capacity(paths.len() * times.len());
    let mut jumps = Vec::new();
    for p in &paths {
        for &t in &times {
            let x = p.log_x[p.grid_index(t)];
            rows.push(format!("{},{},{},{}", p.stream, t, x, x.exp()));
        }
        jumps.extend(
            p.jumps
                .iter()
                .map(|j| format!("{},{},{},{}", p.stream, j.time, j.size, j.x_before)),
        );
    }
    sink.primary("paths.csv", &csv(&prov, "stream,t,log_price,price", rows))?;
    sink.file("jumps.csv", &csv(&prov, "stream,time,size,x_before", jumps))?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RatesDocument<'a> {
    parameters: &'a RateParameters,
    report: &'a RateReport,
    bmo: &'a Option<Vec<(usize, f64)>>,
}

pub fn rates(cfg: &LoadedConfig, sink: &Sink, replay: Option<&Path>) -> Result<i32, CliError> {
    let prov = Provenance::new(&cfg.hash);
    let (parameters, report, bmo, errors_csv) = match replay {
        Some(path) => {
            let parameters = rate_parameters(&cfg.config)?;
            let samples = read_replay(path)?;
            let report = convergence_rate(&samples, cfg.config.numerics.error_kind, parameters.r)?;
            let rows = samples
                .iter()
                .flat_map(|(n, v)| v.iter().map(move |e| format!("{n},{e:e}")));
            (parameters, report, None, csv(&prov, "n,error", rows))
        }
        None => {
            let outcome = run_rates(&cfg.config)?;
            let rows = outcome.runs.iter().map(HedgeRun::csv_row);
            let text = csv(&prov, HedgeRun::CSV_HEADER, rows);
            (outcome.parameters, outcome.report, outcome.bmo, text)
        }
    };
    sink.file("errors.csv", &errors_csv)?;
    sink.file("rates.dat", &rates_dat(&prov, &report))?;
    sink.file("rates.gp", &gnuplot_script(&prov, &report))?;
    let doc = RatesDocument {
        parameters: &parameters,
        report: &report,
        bmo: &bmo,
    };
    sink.primary("rates.json", &json(&prov, &doc))?;
    Ok(match report.verdict {
        Verdict::Inconsistent => EXIT_INCONSISTENT,
        Verdict::Consistent | Verdict::Inconclusive => EXIT_OK,
    })
}

/// Reads per-`n` error samples from a CSV with an `n` column and an
/// `e_corr` or `error` column; `#` starts a comment line.
pub fn read_replay(path: &Path) -> Result<BTreeMap<usize, Vec<f64>>, CliError> {
    let bad = |msg: String| CliError::Config(format!("replay file {}: {msg}", path.display()));
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| bad(e.to_string()))?;
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let n_col = col("n").ok_or_else(|| bad("missing column n".into()))?;
    let e_col = col("e_corr")
        .or_else(|| col("error"))
        .ok_or_else(|| bad("missing column e_corr or error".into()))?;
    let mut out: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let n: usize = field(n_col)
            .parse()
            .map_err(|_| bad(format!("record {}: n = {:?}", i + 1, field(n_col))))?;
        let e: f64 = field(e_col)
            .parse()
            .map_err(|_| bad(format!("record {}: error = {:?}", i + 1, field(e_col))))?;
        out.entry(n).or_default().push(e);
    }
    if out.is_empty() {
        return Err(bad("no records".into()));
    }
    Ok(out)
}

/// Columns `n error std_error fitted`, the fit anchored at the first point.
fn rates_dat(prov: &Provenance, report: &RateReport) -> String {
    let mut s = format!("{}\n# n error std_error fitted\n", prov.comment_line());
    let anchor = report.points.first().copied();
    for p in &report.points {
        let fitted = match anchor {
            Some(a) if report.slope.is_finite() => a.error * (p.n as f64 / a.n as f64).powf(report.slope),
            _ => f64::NAN,
        };
        s.push_str(&format!("{} {:e} {:e} {:e}\n", p.n, p.error, p.std_error, fitted));
    }
    s
}

fn gnuplot_script(prov: &Provenance, report: &RateReport) -> String {
    format!(
        "{}\n\
         set terminal pngcairo size 800,600\n\
         set output 'rates.png'\n\
         set logscale xy\n\
         set xlabel 'n'\n\
         set ylabel 'error'\n\
         set key top right\n\
         plot 'rates.dat' using 1:2:3 with yerrorbars title 'estimate', \\\n     \
         'rates.dat' using 1:4 with lines title sprintf('slope %.3f (predicted %.3f)', {}, {})\n",
        prov.comment_line(),
        report.slope,
        report.predicted_slope
    )
}

#[derive(Serialize)]
struct RepCheckDocument<'a> {
    target: &'a levyhedge::experiment::RepTarget,
    report: &'a levyhedge::experiment::RepCheckReport,
}

pub fn repcheck(cfg: &LoadedConfig, sink: &Sink) -> Result<i32, CliError> {
    let f = cfg.config.rep_target()?;
    let report = run_repcheck(&cfg.config, &f)?;
    let doc = RepCheckDocument {
        target: &cfg.config.repcheck,
        report: &report,
    };
    sink.primary("repcheck.json", &json(&Provenance::new(&cfg.hash), &doc))?;
    Ok(EXIT_OK)
}
