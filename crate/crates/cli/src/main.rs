//! `rumorlab` command-line front end.
//!
//! Exit codes: 0 on success (or an acceptance PASS), 1 on a failed check or
//! a runtime error, 2 on usage and configuration errors.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::Overrides;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{file}: invalid config at {pointer}: {message}")]
    Config {
        file: String,
        pointer: String,
        message: String,
    },
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Config { .. } => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

/// Wraps a library error as a runtime failure.
pub fn runtime<E: std::error::Error + Send + Sync + 'static>(e: E) -> CliError {
    CliError::Runtime(e.into())
}

#[derive(Debug, Parser)]
#[command(name = "rumorlab", version, about = "Rumor spreading with spontaneous stifling on quasi-transitive graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Overrides,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build or verify typed graphs.
    Graph {
        #[command(subcommand)]
        action: GraphAction,
    },
    /// Run simulator replicas and write trajectories.
    Simulate,
    /// Solve the mean-field system and write meanfield.csv.
    Meanfield,
    /// Gaussian fluctuation limit.
    Fclt {
        #[command(subcommand)]
        action: FcltAction,
    },
    /// Exact expected counts on a small graph (at most 10 vertices).
    Oracle,
    /// Run acceptance criteria by name or number, or `all`.
    Acceptance {
        #[arg(required = true, value_name = "CRITERION")]
        criteria: Vec<String>,
    },
    /// Run whatever the config file's `mode` names.
    Run,
}

#[derive(Debug, Subcommand)]
enum GraphAction {
    /// Write edges.csv, types.json, blueprint.json and meta.json.
    Build,
    /// Check that a graph realizes its blueprint; exits 1 if not.
    Verify,
}

#[derive(Debug, Subcommand)]
enum FcltAction {
    /// Write the noise covariance blocks.
    Covariance,
    /// Draw limit fluctuation paths into fclt_samples.csv.
    Sample,
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    let cfg = config::Resolved::new(&cli.flags)?;
    use config::Mode;
    match cli.command {
        Command::Graph { action } => {
            cfg.expect_mode(Mode::Graph)?;
            match action {
                GraphAction::Build => commands::graph_build(&cfg),
                GraphAction::Verify => commands::graph_verify(&cfg),
            }
        }
        Command::Simulate => {
            cfg.expect_mode(Mode::Simulate)?;
            commands::simulate(&cfg)
        }
        Command::Meanfield => {
            cfg.expect_mode(Mode::Meanfield)?;
            commands::meanfield(&cfg)
        }
        Command::Fclt { action } => {
            cfg.expect_mode(Mode::Fclt)?;
            match action {
                FcltAction::Covariance => commands::fclt_covariance(&cfg),
                FcltAction::Sample => commands::fclt_sample(&cfg),
            }
        }
        Command::Oracle => {
            cfg.expect_mode(Mode::Oracle)?;
            commands::oracle(&cfg)
        }
        Command::Acceptance { criteria } => {
            cfg.expect_mode(Mode::Acceptance)?;
            commands::acceptance(&cfg, &criteria)
        }
        Command::Run => commands::run(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        // help and version exit 0, usage errors exit 2
        Err(e) => e.exit(),
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(e.exit_code())
        }
    }
}
