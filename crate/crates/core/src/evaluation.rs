//! Alert recall at fixed review budgets for prosody-only, content-only and
//! hybrid routing.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{calibrate_hybrid, single_cutoff, CalibrationError, SolverSettings};
use crate::quantile::ScoreSample;
use crate::types::{CalibrationConfig, DatasetFingerprint, RoutingBudget, ScoredResponse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvaluationError {
    #[error("dataset has no responses labeled as alerts")]
    NoAlertsLabeled,
    #[error("no budgets given")]
    NoBudgets,
    #[error(transparent)]
    Dataset(CalibrationError),
    #[error("calibration at {budget}% failed: {source}")]
    Calibration {
        budget: f64,
        #[source]
        source: CalibrationError,
    },
}

/// Which per-classifier budget the single-classifier columns use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingleBudgetMode {
    /// Each classifier alone routes the full budget `p`.
    #[default]
    Full,
    /// Each classifier at the solved hybrid budget `p̃`.
    Solved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacyRow {
    pub budget_percent: f64,
    pub prosodic_n: usize,
    pub prosodic_pct: f64,
    pub content_n: usize,
    pub content_pct: f64,
    pub hybrid_n: usize,
    pub hybrid_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacyReport {
    pub rows: Vec<EfficacyRow>,
    pub alert_count: usize,
    pub dataset_fingerprint: DatasetFingerprint,
    pub single_budget: SingleBudgetMode,
    /// Hybrid calibration behind each row, in row order.
    pub configs: Vec<CalibrationConfig>,
}

struct Evaluator<'a> {
    dataset: &'a [ScoredResponse],
    content: ScoreSample,
    prosodic: ScoreSample,
    alert_count: usize,
    fingerprint: DatasetFingerprint,
}

impl<'a> Evaluator<'a> {
    fn new(dataset: &'a [ScoredResponse]) -> Result<Self, EvaluationError> {
        let alert_count = dataset.iter().filter(|r| r.is_alert()).count();
        if alert_count == 0 {
            return Err(EvaluationError::NoAlertsLabeled);
        }
        let sample = |f: fn(&ScoredResponse) -> crate::types::Score| {
            ScoreSample::new(dataset.iter().map(f)).map_err(|e| EvaluationError::Dataset(e.into()))
        };
        Ok(Evaluator {
            dataset,
            content: sample(ScoredResponse::content_score)?,
            prosodic: sample(ScoredResponse::prosodic_score)?,
            alert_count,
            fingerprint: DatasetFingerprint::of(dataset),
        })
    }

    fn row(&self, config: &CalibrationConfig, single_budget: RoutingBudget) -> EfficacyRow {
        if config.dataset_fingerprint != self.fingerprint {
            log::warn!(
                "calibration fingerprint {} does not match dataset {}",
                config.dataset_fingerprint,
                self.fingerprint
            );
        }
        let cc = single_cutoff(&self.content, single_budget).value();
        let pc = single_cutoff(&self.prosodic, single_budget).value();
        let (hc, hp) = (config.content_cutoff.value(), config.prosodic_cutoff.value());
        let (mut content_n, mut prosodic_n, mut hybrid_n) = (0, 0, 0);
        for r in self.dataset.iter().filter(|r| r.is_alert()) {
            let (c, p) = (r.content_score().value(), r.prosodic_score().value());
            content_n += usize::from(c > cc);
            prosodic_n += usize::from(p > pc);
            hybrid_n += usize::from(c > hc || p > hp);
        }
        let pct = |k: usize| 100.0 * k as f64 / self.alert_count as f64;
        EfficacyRow {
            budget_percent: config.target_percent.percent(),
            prosodic_n,
            prosodic_pct: pct(prosodic_n),
            content_n,
            content_pct: pct(content_n),
            hybrid_n,
            hybrid_pct: pct(hybrid_n),
        }
    }
}

/// One efficacy row: single classifiers at `single_budget`, the hybrid at
/// `config`'s cutoffs. Percentages are relative to labeled alerts only.
pub fn evaluate_at(
    dataset: &[ScoredResponse],
    config: &CalibrationConfig,
    single_budget: RoutingBudget,
) -> Result<EfficacyRow, EvaluationError> {
    Ok(Evaluator::new(dataset)?.row(config, single_budget))
}

/// Calibrates at every budget and assembles the report, rows ascending by
/// budget with duplicates removed.
pub fn sweep(
    dataset: &[ScoredResponse],
    budgets: &[RoutingBudget],
    settings: &SolverSettings,
    mode: SingleBudgetMode,
) -> Result<EfficacyReport, EvaluationError> {
    if budgets.is_empty() {
        return Err(EvaluationError::NoBudgets);
    }
    let evaluator = Evaluator::new(dataset)?;
    let mut budgets = budgets.to_vec();
    budgets.sort_by(|a, b| a.percent().total_cmp(&b.percent()));
    budgets.dedup();

    let mut rows = Vec::with_capacity(budgets.len());
    let mut configs = Vec::with_capacity(budgets.len());
    for budget in budgets {
        let config = calibrate_hybrid(dataset, budget, settings).map_err(|source| EvaluationError::Calibration {
            budget: budget.percent(),
            source,
        })?;
        let single = match mode {
            SingleBudgetMode::Full => budget,
            SingleBudgetMode::Solved => RoutingBudget::new(config.solved_percent).expect("solved budget lies in (0, p]"),
        };
        rows.push(evaluator.row(&config, single));
        configs.push(config);
    }
    Ok(EfficacyReport {
        rows,
        alert_count: evaluator.alert_count,
        dataset_fingerprint: evaluator.fingerprint,
        single_budget: mode,
        configs,
    })
}

/// Plain-text table with one column pair (N, %) per classifier, with
/// percentages to one decimal place.
pub fn render_table(report: &EfficacyReport) -> String {
    const GROUP: usize = 21;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<17} | {:^GROUP$} | {:^GROUP$} | {:^GROUP$}",
        "", "Prosodic Classifier", "Content Classifier", "Hybrid Classifier"
    );
    let cols = format!("{:>6} {:>14}", "N", "%");
    let _ = writeln!(out, "{:<17} | {cols} | {cols} | {cols}", "Percentage Routed");
    let rule = "-".repeat(GROUP + 2);
    let _ = writeln!(out, "{}+{rule}+{rule}+{rule}", "-".repeat(18));
    for row in &report.rows {
        let cell = |n: usize, pct: f64| format!("{n:>6} {:>14}", format!("{pct:.1}%"));
        let _ = writeln!(
            out,
            "{:<17} | {} | {} | {}",
            row.budget_percent,
            cell(row.prosodic_n, row.prosodic_pct),
            cell(row.content_n, row.content_pct),
            cell(row.hybrid_n, row.hybrid_pct)
        );
    }
    let _ = writeln!(out, "alerts: {}", report.alert_count);
    out
}
