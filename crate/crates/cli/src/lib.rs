//! Command-line pipeline: `offline` builds the reduced model, `sample` runs
//! high-fidelity and reduced solves, `train-validate` fits and scores error
//! surrogates, and `report` merges results.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "romes", version, about = "Reduced-basis error surrogate experiments on the thermal block")]
pub struct Cli {
    /// Experiment config (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the primal and dual reduced bases.
    Offline,
    /// Solve the full and reduced models on the configured sample sets.
    Sample {
        /// Reduced model; `<out>/reduced_model.json` by default.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Train and validate every configured surrogate over the training-size sweep.
    TrainValidate {
        /// Directory holding the sample tables; `<out>` by default.
        #[arg(long)]
        samples: Option<PathBuf>,
    },
    /// Merge train-validate reports into a summary.
    Report {
        /// Report files or directories; `<out>/report.json` by default.
        paths: Vec<PathBuf>,
    },
    /// Print the resolved config as TOML.
    PrintConfig,
}

pub fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = load_config(cli)?;
    match &cli.command {
        Command::Offline => commands::offline(&config, &cli.out).map(drop),
        Command::Sample { model } => commands::sample(&config, &cli.out, model.as_deref()).map(drop),
        Command::TrainValidate { samples } => commands::train_validate(&config, &cli.out, samples.as_deref()).map(drop),
        Command::Report { paths } => commands::report(&config, &cli.out, paths).map(drop),
        Command::PrintConfig => {
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}
