//! Pipeline subcommands behind the `agemort` binary.

use std::path::Path;

use thiserror::Error;

pub mod commands;
pub mod config;

pub use commands::{cmd_forecast, cmd_project, cmd_reconstruct, cmd_synth};
pub use config::{parse_pairs, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    /// A required input (bundle, earlier stage output) is missing or inconsistent.
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] agemort::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) => EXIT_INPUT,
            CliError::Core(e) if e.is_input_error() => EXIT_INPUT,
            CliError::Core(_) => EXIT_NUMERICAL,
        }
    }
}

macro_rules! core_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        }
    )*};
}

core_from!(agemort::data_io::DataError, agemort::eki::EkiError, agemort::nndmd::DmdError, agemort::pde::PdeError, agemort::interp::InterpError);

/// Reads a config file and applies it on top of the defaults.
pub fn load_config(path: Option<&Path>) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(p) = path {
        let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        cfg.apply(&parse_pairs(&text)?)?;
    }
    Ok(cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Reconstruct,
    Forecast,
    Project,
}

/// Runs one subcommand and returns its manifest.
pub fn run(command: Command, cfg: &RunConfig) -> Result<agemort::data_io::Manifest, CliError> {
    cfg.validate()?;
    match command {
        Command::Synth => cmd_synth(cfg),
        Command::Reconstruct => cmd_reconstruct(cfg),
        Command::Forecast => cmd_forecast(cfg),
        Command::Project => cmd_project(cfg),
    }
}
