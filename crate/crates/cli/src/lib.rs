//! Pipeline stages behind the `gvar-sv` binary. Each stage reads the
//! artifacts of the previous ones from the output directory and writes its
//! own subdirectory with a manifest.

pub mod artifacts;
pub mod config;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod ingest;
pub mod report;
pub mod synth;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "gvar-sv", version, about = "Global VAR with endogenous stochastic volatility")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Output directory; overrides `out` in the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Transform raw levels and trade flows into the model panel and weights.
    Ingest,
    /// Run the per-country samplers.
    Estimate,
    /// Stack world draws and check their stability.
    Solve,
    /// Impulse responses (total, and direct when configured).
    Irf,
    /// Total, direct and indirect responses.
    Decompose,
    /// Impact and peak tables from the response files.
    Report,
    /// Every stage from ingest to report.
    All,
    /// Write a synthetic data set with known parameters and a config for it.
    Synth {
        /// Generated quarters after burn-in.
        #[arg(long, default_value_t = 160)]
        periods: usize,
        /// Seed of the data generator (default: the built-in world's).
        #[arg(long)]
        world_seed: Option<u64>,
    },
}

pub fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::User("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    if let Command::Synth { periods, world_seed } = cli.command {
        let out = cli.out.ok_or_else(|| CliError::User("synth needs --out".into()))?;
        return synth::run(&out, periods, world_seed, cli.seed.unwrap_or(1));
    }
    let path = cli
        .config
        .ok_or_else(|| CliError::User("--config is required".into()))?;
    let cfg = config::load(&path, cli.seed, cli.out)?;
    match cli.command {
        Command::Ingest => ingest::run(&cfg),
        Command::Estimate => estimate::run(&cfg),
        Command::Solve => experiment::solve(&cfg),
        Command::Irf => experiment::irf(&cfg),
        Command::Decompose => experiment::decompose(&cfg),
        Command::Report => report::run(&cfg),
        Command::All => {
            ingest::run(&cfg)?;
            estimate::run(&cfg)?;
            experiment::solve(&cfg)?;
            experiment::irf(&cfg)?;
            experiment::decompose(&cfg)?;
            report::run(&cfg)
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}
