//! `levyhedge`: runs hedging experiments described by a TOML configuration.
//!
//! Exit codes: 0 success (including consistent or inconclusive rate
//! verdicts), 1 usage or configuration error, 2 inconsistent rate verdict,
//! 3 numerical failure.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::SEED_ENV;
use crate::error::{CliError, EXIT_CONFIG, EXIT_OK};
use crate::output::Sink;

#[derive(Debug, Parser)]
#[command(name = "levyhedge", version, about = "Local risk-minimizing hedging experiments under exponential Lévy models")]
struct Cli {
    /// Print the default configuration as TOML and exit.
    #[arg(long)]
    print_defaults: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, value_name = "FILE")]
    config: PathBuf,

    /// Worker threads (default: all cores).
    #[arg(long, value_name = "N")]
    threads: Option<usize>,

    /// Output directory; overrides `output_dir` of the configuration.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Market coefficients, MMM feasibility and small-jump class.
    Coeffs(Common),
    /// Minimal martingale measure: starred, U and V triplets.
    Mmm(Common),
    /// Strategy surface θ(t, y) as CSV.
    Strategy(Common),
    /// Sample paths under P as CSV.
    Simulate(Common),
    /// Convergence-rate experiment of the jump-adjusted hedge.
    Rates {
        #[command(flatten)]
        common: Common,
        /// Fit the rate to errors read from a CSV (`n` and `e_corr` or `error` columns) instead of simulating.
        #[arg(long, value_name = "FILE")]
        replay: Option<PathBuf>,
    },
    /// Discretized martingale-representation check under P*.
    Repcheck(Common),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let code = match run(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if cli.print_defaults {
        print!("{}", config::defaults_toml());
        return Ok(EXIT_OK);
    }
    let Some(command) = cli.command else {
        return Err(CliError::Config("a subcommand is required (see --help)".into()));
    };
    let (common, replay) = match &command {
        Command::Coeffs(c) | Command::Mmm(c) | Command::Strategy(c) | Command::Simulate(c) | Command::Repcheck(c) => {
            (c, None)
        }
        Command::Rates { common, replay } => (common, replay.as_deref()),
    };
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let seed = std::env::var(SEED_ENV).ok();
    let cfg = config::load(&common.config, seed.as_deref())?;
    let dir = common.out.clone().or_else(|| cfg.config.output_dir.as_ref().map(PathBuf::from));
    let sink = Sink::new(dir)?;
    match command {
        Command::Coeffs(_) => commands::coeffs(&cfg, &sink),
        Command::Mmm(_) => commands::mmm(&cfg, &sink),
        Command::Strategy(_) => commands::strategy(&cfg, &sink),
        Command::Simulate(_) => commands::simulate(&cfg, &sink),
        Command::Rates { .. } => commands::rates(&cfg, &sink, replay),
        Command::Repcheck(_) => commands::repcheck(&cfg, &sink),
    }
}
