//! Command-line front end for the cohort fault-forecasting pipeline.
//!
//! One declarative configuration file describes a run; the subcommands
//! execute its stages: `simulate` builds a synthetic cohort, `featurize`
//! turns telemetry into labeled feature matrices, `train` fits final
//! ensembles, `evaluate` cross-validates every (alarm, feature set) pair,
//! and `report` renders the resulting AUC summary as a matrix.
//!
//! The binary in `main.rs` is a thin shell around [`run`]; everything is
//! exercised in-process by the test suite.

pub mod commands;
pub mod config;
pub mod error;
pub mod reports;

pub use config::{load_config, EnvLookup, LoadedConfig, RunConfig};
pub use error::CliError;

use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;

/// Cohort-based fault forecasting for fleets of identical appliances.
#[derive(Debug, Parser)]
#[command(name = "faultcast", version, disable_help_subcommand = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic cohort from the [simulate] section.
    Simulate {
        /// Run configuration (TOML).
        config: PathBuf,
    },
    /// Extract labeled feature matrices from telemetry and alarms.
    Featurize {
        /// Run configuration (TOML).
        config: PathBuf,
    },
    /// Train one final model per (alarm, feature set) on the whole cohort.
    Train {
        /// Run configuration (TOML).
        config: PathBuf,
    },
    /// Cross-validate every (alarm, feature set) pair and write reports.
    Evaluate {
        /// Run configuration (TOML).
        config: PathBuf,
    },
    /// Render the AUC summary from a previous evaluate run.
    Report {
        /// Run configuration (TOML).
        config: PathBuf,
    },
}

impl Command {
    pub fn config_path(&self) -> &PathBuf {
        match self {
            Command::Simulate { config }
            | Command::Featurize { config }
            | Command::Train { config }
            | Command::Evaluate { config }
            | Command::Report { config } => config,
        }
    }
}

/// Executes a parsed invocation. `env` supplies the path overrides
/// (`FAULTCAST_TELEMETRY`, `FAULTCAST_ALARMS`, `FAULTCAST_EXCLUSIONS`,
/// `FAULTCAST_OUT_DIR`); `out` receives the progress and summary lines.
pub fn run(cli: &Cli, env: &EnvLookup, out: &mut dyn Write) -> Result<(), CliError> {
    let loaded = load_config(cli.command.config_path(), env)?;
    match &cli.command {
        Command::Simulate { .. } => commands::cmd_simulate(&loaded, out),
        Command::Featurize { .. } => commands::cmd_featurize(&loaded, out),
        Command::Train { .. } => commands::cmd_train(&loaded, out),
        Command::Evaluate { .. } => commands::cmd_evaluate(&loaded, out),
        Command::Report { .. } => commands::cmd_report(&loaded, out),
    }
}
