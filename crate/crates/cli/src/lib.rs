//! Command-line front end for the `kmte` estimators.
//!
//! `kmte estimate` fits one estimand on a CSV file and writes a JSON report;
//! `kmte simulate` runs the Monte Carlo study and writes a bias table as CSV.
//! Exit codes: 0 on success, 2 for invalid flags, config or data, 3 when
//! estimation fails.

pub mod error;
pub mod estimate;
pub mod settings;
pub mod simulate;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use kmte::Execution;

pub use error::{CliError, CliResult};
use settings::{load_settings, EstimateSettings, SimulateSettings};

#[derive(Debug, Parser)]
#[command(name = "kmte", version, about = "Treatment effects with right-censored outcomes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a treatment effect on a CSV file
    Estimate {
        /// Flat TOML file with any of the flags below; flags take precedence
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: EstimateSettings,
    },
    /// Run the Monte Carlo study and write a bias table
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        settings: SimulateSettings,
    },
}

/// Runs a parsed command. Output goes to the configured path or `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> CliResult<()> {
    match cli.command {
        Command::Estimate { config, settings } => {
            let mut settings = match config {
                Some(path) => load_settings::<EstimateSettings>(&path)?.overlay(settings),
                None => settings,
            };
            settings.fill_defaults();
            settings.seed = Some(resolve_seed(settings.seed));
            let execution = configure_threads(settings.threads)?;
            let report = estimate::run(&settings, execution)?;
            let mut json = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Estimation(format!("cannot serialize report: {e}")))?;
            json.push('\n');
            emit(settings.output.as_deref(), json.as_bytes(), stdout)
        }
        Command::Simulate { config, settings } => {
            let mut settings = match config {
                Some(path) => load_settings::<SimulateSettings>(&path)?.overlay(settings),
                None => settings,
            };
            settings.fill_defaults();
            settings.seed = Some(resolve_seed(settings.seed));
            let execution = configure_threads(settings.threads)?;
            eprintln!("config hash {}", settings.fingerprint());
            let report = simulate::run(&settings, execution)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            emit(settings.output.as_deref(), &csv, stdout)
        }
    }
}

/// Uses the given seed or draws one from system entropy and prints it.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let drawn = rand::random::<u64>();
        eprintln!("seed: {drawn}");
        drawn
    })
}

fn configure_threads(threads: Option<usize>) -> CliResult<Execution> {
    match threads {
        None => Ok(Execution::Parallel),
        Some(0) => Err(CliError::Validation("threads must be at least 1".into())),
        Some(1) => Ok(Execution::Sequential),
        Some(n) => {
            // the global pool can only be built once per process
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("thread pool already initialised: {e}");
            }
            Ok(Execution::Parallel)
        }
    }
}

fn emit(path: Option<&Path>, bytes: &[u8], stdout: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Validation(format!("cannot write {}: {e}", path.display()))),
        None => Ok(stdout.write_all(bytes)?),
    }
}
