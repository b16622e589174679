//! Batch experiment driver behind the `covlearn` binary.
//!
//! Every command reads one JSON config and writes its files under the
//! output directory. Reports depend only on the config and the seed, so
//! wall-clock timings go to a separate `timings.csv`.

pub mod commands;
pub mod config;
pub mod report;
pub mod selftest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::ExperimentConfig;
pub use report::{Report, TrialRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Schema(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("{0}")]
    Io(String),
    #[error(
        "privacy gate: the dataset has {actual} rows but answering {queries} queries needs at least {required:.0}; \
         supply a dataset of at least {required:.0} rows or relax alpha_bar, epsilon or delta"
    )]
    Gate { required: f64, actual: u64, queries: u64 },
    #[error("contract not met: {0}")]
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Contract(_) => 1,
            CliError::Schema(_) | CliError::Usage(_) | CliError::Io(_) => 2,
            CliError::Gate { .. } => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "covlearn", version, about = "Learn coverage functions and release conjunction counting queries privately")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a target coverage function and/or a dataset.
    Generate(RunArgs),
    /// Run a learner over seeded trials and report its error.
    Learn(RunArgs),
    /// Run a private release over seeded trials and report its error.
    Release(RunArgs),
    /// Run the exhaustive small-cube invariant checks.
    Selftest,
}

const DEFAULT_OUT: &str = "covlearn-out";

fn prepare(args: &RunArgs) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out = args.out.clone().or_else(|| config.out.as_ref().map(|p| config.resolve(p))).unwrap_or_else(|| DEFAULT_OUT.into());
    std::fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    Ok((config, out))
}

/// Runs one command, printing its summary to stdout.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate(args) => {
            let (config, out) = prepare(&args)?;
            for path in commands::generate(&config, &out)? {
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        Command::Learn(args) => {
            let (config, out) = prepare(&args)?;
            finish(commands::learn(&config, &out)?)
        }
        Command::Release(args) => {
            let (config, out) = prepare(&args)?;
            finish(commands::release(&config, &out)?)
        }
        Command::Selftest => {
            let checks = selftest::run_selftest();
            print!("{}", selftest::render(&checks));
            match checks.iter().filter(|c| !c.passed).map(|c| c.name).collect::<Vec<_>>() {
                failed if failed.is_empty() => Ok(()),
                failed => Err(CliError::Contract(format!("failed checks: {}", failed.join(", ")))),
            }
        }
    }
}

fn finish(report: Report) -> Result<(), CliError> {
    print!("{}", report.render());
    if report.aggregate.met {
        Ok(())
    } else {
        Err(CliError::Contract(format!(
            "{} of {} trials passed, {} needed",
            report.aggregate.successes, report.trials, report.aggregate.required_successes
        )))
    }
}

/// Entry point for the binary.
pub fn main_with_args(args: impl IntoIterator<Item = std::ffi::OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
