//! Command-line front end for the gradescale library: logbook preparation,
//! MCMC fitting, regression estimators and synthetic-logbook generation,
//! wired into one `gradescale` binary with a shared run-manifest format.

pub mod commands;
pub mod manifest;

use clap::{Parser, Subcommand};
use gradescale::logbook::LogbookError;
use gradescale::sampler::SamplerError;
use thiserror::Error;

/// Failures split by exit status: anything wrong with arguments, files or
/// data exits [`CliError::EXIT_INPUT`]; numerical breakdown inside the
/// sampler exits [`CliError::EXIT_NUMERICAL`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub const EXIT_INPUT: i32 = 2;
    pub const EXIT_NUMERICAL: i32 = 3;

    pub fn input(message: impl std::fmt::Display) -> CliError {
        CliError::Input(message.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => CliError::EXIT_INPUT,
            CliError::Numerical(_) => CliError::EXIT_NUMERICAL,
        }
    }
}

impl From<LogbookError> for CliError {
    fn from(e: LogbookError) -> CliError {
        CliError::Input(e.to_string())
    }
}

impl From<gradescale::grades::GradeError> for CliError {
    fn from(e: gradescale::grades::GradeError) -> CliError {
        CliError::Input(e.to_string())
    }
}

impl From<SamplerError> for CliError {
    fn from(e: SamplerError) -> CliError {
        match e {
            SamplerError::NonFiniteDensity { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<gradescale::regression::RegressionError> for CliError {
    fn from(e: gradescale::regression::RegressionError) -> CliError {
        CliError::Input(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gradescale",
    version,
    about = "Infer climber grades and the grade-scale slope from ascent logbooks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a raw logbook and write the model-ready dataset
    Prepare(commands::prepare::Args),
    /// Sample the posterior over the slope and climber grades by HMC
    Fit(commands::fit::Args),
    /// Regression estimates of the slope (per-climber or community)
    Regress(commands::regress::Args),
    /// Generate a synthetic logbook with known ground truth
    Simulate(commands::simulate::Args),
    /// Print grade ladders and the sport-grade correspondence table
    Ladders(commands::ladders::Args),
}

/// Dispatch a parsed command line. Output-writing commands resolve their
/// settings into a [`manifest::RunManifest`] first (either from flags or from
/// `--manifest`), run, then save the manifest beside their outputs.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Prepare(args) => commands::prepare::run(&args.into_manifest()?),
        Command::Fit(args) => commands::fit::run(&args.into_manifest()?),
        Command::Regress(args) => commands::regress::run(&args.into_manifest()?),
        Command::Simulate(args) => commands::simulate::run(&args.into_manifest()?),
        Command::Ladders(args) => commands::ladders::run(&args, &mut std::io::stdout().lock()),
    }
}
