//! Batch pipeline around the `tvpsv` library: one JSON config drives data
//! ingestion, detrending, descriptive statistics, Gibbs estimation, impulse
//! responses, volatility paths and a text report.

pub mod config;
pub mod error;
pub mod manifest;
pub mod pipeline;
pub mod simulate;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::{load_config, Severity};
use error::CliError;
use pipeline::{parse_stages, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "tvpsv", version, about = "TVP-VAR-SV estimation pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run pipeline stages.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated subset of ingest,filter,describe,estimate,irf,volatility,report.
        #[arg(long)]
        stages: Option<String>,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sampler seed (overrides model.seed).
        #[arg(long)]
        seed: Option<u64>,
        /// Independent sampler chains, pooled for responses and volatility.
        #[arg(long, default_value_t = 1)]
        chains: usize,
    },
    /// Check a config without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Simulate a synthetic panel from a scenario file.
    Simulate {
        /// Scenario JSON.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the default run configuration.
    DefaultConfig,
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            stages,
            out,
            seed,
            chains,
        } => {
            let loaded = load_config(&config)?;
            for w in &loaded.warnings {
                eprintln!("{w}");
            }
            let options = RunOptions {
                stages: stages.as_deref().map(parse_stages).transpose()?.unwrap_or_default(),
                out,
                seed,
                chains,
            };
            let outcome = pipeline::run(&loaded, &options)?;
            println!(
                "wrote {} files to {}",
                outcome.manifest.files.len() + 1,
                outcome.out_dir.display()
            );
            Ok(())
        }
        Command::Validate { config } => {
            let loaded = load_config(&config)?;
            let mut diagnostics = loaded.warnings.clone();
            diagnostics.extend(loaded.config.validate());
            for d in &diagnostics {
                println!("{d}");
            }
            let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
            println!(
                "{errors} error(s), {} warning(s)",
                diagnostics.len() - errors
            );
            if errors > 0 {
                Err(CliError::Input(format!("{} is invalid", config.display())))
            } else {
                Ok(())
            }
        }
        Command::Simulate { config, out, seed } => {
            let mut scenario = simulate::load_scenario(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let manifest = simulate::simulate(&scenario, &out)?;
            println!("wrote {} files to {}", manifest.files.len() + 1, out.display());
            Ok(())
        }
        Command::DefaultConfig => {
            let text = serde_json::to_string_pretty(&config::RunConfig::default()).expect("config serializes");
            println!("{text}");
            Ok(())
        }
    }
}
