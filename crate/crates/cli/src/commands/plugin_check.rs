use std::time::Duration;

use alertroute_core::pipeline::conformance::run_conformance;

use crate::{CliError, OutputFormat};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Plugin command line, run through `sh -c`.
    command: String,
    /// Per-reply timeout in seconds.
    #[arg(long, default_value_t = 10.0)]
    timeout: f64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
}

pub fn run(args: Args) -> Result<(), CliError> {
    if !(args.timeout > 0.0 && args.timeout.is_finite()) {
        return Err(CliError::Usage(format!("--timeout {} must be positive", args.timeout)));
    }
    let report = run_conformance(&args.command, Duration::from_secs_f64(args.timeout));
    match args.format {
        OutputFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        OutputFormat::Text => {
            for check in &report.checks {
                let mark = if check.passed { "PASS" } else { "FAIL" };
                println!("{mark}  {:<15} {}", check.name, check.detail);
            }
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Plugin(format!("{:?} failed protocol conformance", args.command)))
    }
}
