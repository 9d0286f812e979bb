//! `unipred`: batch experiments for universal sequence prediction.
//!
//! Exit status is 0 on success, 1 when a checked bound or inequality is
//! violated, 2 on a configuration error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(
    name = "unipred",
    version,
    about = "Universal sequence prediction experiments"
)]
struct Cli {
    /// Experiment configuration (TOML). A two-Bernoulli default is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads; defaults to one per core.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Exact expectations at every horizon, both theorem checks and the
    /// relative-error trends.
    VerifyBounds,
    /// Grid scans of the elementary inequalities behind the bounds.
    Inequalities,
    /// Plays the dice game with each configured predictor.
    Dicegame,
    /// Writes per-step expectation tables, exact or Monte Carlo.
    Simulate,
    /// Approximates the universal semimeasure over a toy machine.
    ApproximateM,
}

/// Outcome of a command that ran to completion.
pub enum Status {
    Ok,
    Violation,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<Status, ConfigError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(ConfigError("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| ConfigError(e.to_string()))?;
    }
    let cfg = ExperimentConfig::load(cli.config.as_deref())?;
    let ctx = commands::Context {
        cfg,
        out: cli.out.clone(),
        seed: cli.seed,
    };
    match cli.command {
        Command::VerifyBounds => commands::verify_bounds(&ctx),
        Command::Inequalities => commands::inequalities(&ctx),
        Command::Dicegame => commands::dicegame(&ctx),
        Command::Simulate => commands::simulate(&ctx),
        Command::ApproximateM => commands::approximate_m(&ctx),
    }
}
