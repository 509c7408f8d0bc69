//! Empirical score distributions: exceedance rates and interpolated cutoffs.
//!
//! A response is flagged when its score is *strictly* greater than the
//! cutoff, so ties at the cutoff are never flagged.

use thiserror::Error;

use crate::types::{RoutingBudget, Score};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantileError {
    #[error("a score sample needs at least 2 scores, got {0}")]
    TooSmall(usize),
    #[error("budget {0}% is out of range")]
    BudgetOutOfRange(f64),
}

/// Scores from one scorer over a validation population, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSample {
    sorted: Vec<f64>,
}

impl ScoreSample {
    pub fn new(scores: impl IntoIterator<Item = Score>) -> Result<Self, QuantileError> {
        let mut sorted: Vec<f64> = scores.into_iter().map(Score::value).collect();
        if sorted.len() < 2 {
            return Err(QuantileError::TooSmall(sorted.len()));
        }
        sorted.sort_by(f64::total_cmp);
        Ok(ScoreSample { sorted })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.sorted
    }

    /// Number of scores strictly above `cutoff`.
    pub fn count_above(&self, cutoff: Score) -> usize {
        let c = cutoff.value();
        self.sorted.len() - self.sorted.partition_point(|&s| s <= c)
    }

    /// Fraction of the sample strictly above `cutoff`.
    pub fn exceedance_rate(&self, cutoff: Score) -> f64 {
        self.count_above(cutoff) as f64 / self.sorted.len() as f64
    }

    /// Linearly interpolated quantile at level `1 - budget/100`.
    ///
    /// Uses the order-statistic position `h = (n - 1) q + 1` (1-based). For
    /// samples without ties the realized exceedance rate is within `1/n` of
    /// the budget fraction.
    pub fn interpolated_cutoff(&self, budget: RoutingBudget) -> Score {
        let (lower, frac) = self.position(budget.percent());
        let lo = self.sorted[lower - 1];
        if lower == self.sorted.len() {
            return Score::new(lo).expect("sample holds valid scores");
        }
        let hi = self.sorted[lower];
        // Clamping keeps the value monotone in the budget despite rounding.
        let value = (lo + frac * (hi - lo)).clamp(lo, hi);
        Score::new(value).expect("interpolant of valid scores")
    }

    /// Same as [`interpolated_cutoff`](Self::interpolated_cutoff) taking a raw
    /// percentage, for solvers that move through non-validated budgets.
    pub fn cutoff_at_percent(&self, percent: f64) -> Result<Score, QuantileError> {
        RoutingBudget::new(percent)
            .map(|b| self.interpolated_cutoff(b))
            .map_err(|_| QuantileError::BudgetOutOfRange(percent))
    }

    /// 1-based lower order-statistic index `floor(h)` used for `percent`.
    ///
    /// Two samples of equal size share this level for any budget, so their
    /// flag counts change at the same budgets.
    pub fn level(&self, percent: f64) -> usize {
        self.position(percent).0
    }

    fn position(&self, percent: f64) -> (usize, f64) {
        let n = self.sorted.len();
        let q = 1.0 - percent / 100.0;
        let h = (n - 1) as f64 * q + 1.0;
        let floor = h.floor();
        let lower = (floor as usize).clamp(1, n);
        (lower, h - floor)
    }
}

/// Free-function form of [`ScoreSample::exceedance_rate`].
pub fn exceedance_rate(sample: &ScoreSample, cutoff: Score) -> f64 {
    sample.exceedance_rate(cutoff)
}

/// Free-function form of [`ScoreSample::interpolated_cutoff`].
pub fn interpolated_cutoff(sample: &ScoreSample, budget: RoutingBudget) -> Score {
    sample.interpolated_cutoff(budget)
}
