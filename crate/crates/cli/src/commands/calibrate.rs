use std::path::PathBuf;

use alertroute_core::io::{write_config, ConfigFile};
use alertroute_core::{calibrate_hybrid, CalibrationConfig, CalibrationError, RoutingBudget};

use super::{calibration_error, load_dataset, solver_settings};
use crate::CliError;

/// Below this many responses flagged at the target, achievable union rates
/// are too coarse for the target to be met closely.
const GRANULARITY_WARNING_COUNT: f64 = 10.0;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset file (JSONL, or CSV by extension).
    dataset: PathBuf,
    /// Target routing budget in percent, 0 < p < 100.
    #[arg(long, value_parser = crate::parse_budget)]
    target: RoutingBudget,
    /// Acceptable |achieved - target| as a fraction; defaults to 0.5/n.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Maximum secant iterations.
    #[arg(long, default_value_t = 32)]
    max_iter: u32,
    /// Where to write the calibration config.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: Args) -> Result<(), CliError> {
    let dataset = load_dataset(&args.dataset)?;
    let n = dataset.len();
    let expected = n as f64 * args.target.fraction();
    if n > 0 && expected < GRANULARITY_WARNING_COUNT {
        log::warn!(
            "only {n} responses: union rates move in steps of 1/{n}, so {} (about {expected:.1} responses) can be met only coarsely",
            args.target
        );
    }
    let settings = solver_settings(args.tolerance, args.max_iter);
    let (config, converged, failure) = match calibrate_hybrid(&dataset, args.target, &settings) {
        Ok(config) => (config, true, None),
        Err(CalibrationError::SolverDidNotConverge { best, residual }) => {
            let err = CalibrationError::SolverDidNotConverge {
                best: best.clone(),
                residual,
            };
            log::warn!("{err}; writing the best iterate to {}", args.out.display());
            (*best, false, Some(err))
        }
        Err(e) => return Err(calibration_error(e)),
    };
    write_config(
        &args.out,
        &ConfigFile {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            converged,
            config: config.clone(),
        },
    )?;
    print_summary(&config, n);
    match failure {
        Some(e) => Err(calibration_error(e)),
        None => Ok(()),
    }
}

fn print_summary(config: &CalibrationConfig, n: usize) {
    println!("responses:                 {n}");
    println!("target budget:             {}", config.target_percent);
    println!("per-classifier budget p~:  {:.6}%", config.solved_percent);
    println!("content cutoff:            {}", config.content_cutoff);
    println!("prosodic cutoff:           {}", config.prosodic_cutoff);
    println!(
        "achieved union rate:       {:.6}% (residual {:+.3e})",
        100.0 * config.achieved_union_rate,
        config.residual()
    );
    println!("iterations:                {}", config.solver_iterations);
}
