//! `alertroute` command-line surface.
//!
//! Exit codes: 0 success, 1 usage, 2 data error, 3 solver non-convergence
//! (best-effort output still written), 4 plugin failure.

mod commands;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use alertroute_core::io::IoError;
use alertroute_core::RoutingBudget;
use clap::{Parser, Subcommand, ValueEnum};

pub use commands::route::SidecarEntry;

/// Environment variable naming the default content scorer plugin command.
pub const ENV_CONTENT_PLUGIN: &str = "ALERTROUTE_CONTENT_PLUGIN";
/// Environment variable naming the default prosodic scorer plugin command.
pub const ENV_PROSODIC_PLUGIN: &str = "ALERTROUTE_PROSODIC_PLUGIN";
/// Environment variable naming the default transcriber plugin command.
pub const ENV_TRANSCRIBER_PLUGIN: &str = "ALERTROUTE_TRANSCRIBER_PLUGIN";

#[derive(Debug, Parser)]
#[command(name = "alertroute", version, about = "Calibrate and route responses with a content + prosody hybrid")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the shared per-classifier budget and cutoffs for a target routing budget.
    Calibrate(commands::calibrate::Args),
    /// Apply a calibration to precomputed scores or to requests scored by plugins.
    Route(commands::route::Args),
    /// Recall of prosody-only, content-only and hybrid routing at fixed budgets.
    Evaluate(commands::evaluate::Args),
    /// Write a synthetic scored dataset from a preset or a generator spec.
    Simulate(commands::simulate::Args),
    /// Run the wire-protocol conformance suite against a plugin command.
    PluginCheck(commands::plugin_check::Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Json,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    NotConverged(String),
    Plugin(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Plugin(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::NotConverged(m) | CliError::Plugin(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Parses a routing budget given in percent units ("1" means 1%).
pub(crate) fn parse_budget(s: &str) -> Result<RoutingBudget, String> {
    let value: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    RoutingBudget::new(value).map_err(|e| e.to_string())
}

pub(crate) fn default_out(path: &std::path::Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn init_logging() {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .format_target(false)
        .try_init();
}

/// Parses `args` (including the program name), runs the command and maps the
/// outcome to the exit-code contract.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Calibrate(a) => commands::calibrate::run(a),
        Command::Route(a) => commands::route::run(a),
        Command::Evaluate(a) => commands::evaluate::run(a),
        Command::Simulate(a) => commands::simulate::run(a),
        Command::PluginCheck(a) => commands::plugin_check::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("alertroute: error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
