use std::path::PathBuf;

use alertroute_core::evaluation::{evaluate_at, render_table, sweep, EfficacyReport, EvaluationError, SingleBudgetMode};
use alertroute_core::io::{read_config, write_atomic};
use alertroute_core::{DatasetFingerprint, RoutingBudget};
use clap::ValueEnum;

use super::{calibration_error, load_dataset, solver_settings};
use crate::{CliError, OutputFormat};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SingleAt {
    /// Each single classifier routes the full budget p.
    Full,
    /// Each single classifier routes the solved per-classifier budget p~.
    Solved,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Labeled dataset file (JSONL, or CSV by extension).
    dataset: PathBuf,
    /// Comma-separated routing budgets in percent.
    #[arg(long, value_delimiter = ',', value_parser = crate::parse_budget, default_value = "0.3,0.5,0.7,1,2,4")]
    budgets: Vec<RoutingBudget>,
    /// Evaluate this calibration config (one row) instead of calibrating per budget.
    #[arg(long, conflicts_with = "budgets")]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
    format: OutputFormat,
    /// Budget used for the single-classifier columns.
    #[arg(long, value_enum, default_value_t = SingleAt::Full)]
    single_at: SingleAt,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long, default_value_t = 32)]
    max_iter: u32,
}

fn evaluation_error(e: EvaluationError) -> CliError {
    match e {
        EvaluationError::Calibration { source, budget } => match calibration_error(source) {
            CliError::NotConverged(m) => CliError::NotConverged(format!("at {budget}%: {m}")),
            other => other,
        },
        EvaluationError::NoBudgets => CliError::Usage(e.to_string()),
        other => CliError::Data(other.to_string()),
    }
}

pub fn run(args: Args) -> Result<(), CliError> {
    let dataset = load_dataset(&args.dataset)?;
    let mode = match args.single_at {
        SingleAt::Full => SingleBudgetMode::Full,
        SingleAt::Solved => SingleBudgetMode::Solved,
    };
    let report = match &args.config {
        Some(path) => {
            let config = read_config(path)?.config;
            let single = match mode {
                SingleBudgetMode::Full => config.target_percent,
                SingleBudgetMode::Solved => RoutingBudget::new(config.solved_percent)
                    .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
            };
            let row = evaluate_at(&dataset, &config, single).map_err(evaluation_error)?;
            EfficacyReport {
                rows: vec![row],
                alert_count: dataset.iter().filter(|r| r.is_alert()).count(),
                dataset_fingerprint: DatasetFingerprint::of(&dataset),
                single_budget: mode,
                configs: vec![config],
            }
        }
        None => sweep(&dataset, &args.budgets, &solver_settings(args.tolerance, args.max_iter), mode)
            .map_err(evaluation_error)?,
    };
    let rendered = match args.format {
        OutputFormat::Text => render_table(&report),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report).expect("report serializes");
            s.push('\n');
            s
        }
    };
    match &args.out {
        Some(path) => write_atomic(path, |w| std::io::Write::write_all(w, rendered.as_bytes()))?,
        None => print!("{rendered}"),
    }
    Ok(())
}
