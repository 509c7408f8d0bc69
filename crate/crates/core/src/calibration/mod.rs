//! Cutoff calibration.
//!
//! A single classifier flags `p`% of the population at its interpolated
//! quantile cutoff. For the OR-combination of both classifiers, both are held
//! to a common per-classifier budget `p̃`, and `p̃` is found by secant root
//! finding on `g(p̃) - p/100`, where `g` is the empirical fraction of responses
//! flagged by at least one classifier.

mod secant;

use std::cell::RefCell;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use secant::{secant_solve, SecantError, SecantRoot, SecantSolver};

use crate::quantile::{QuantileError, ScoreSample};
use crate::types::{CalibrationConfig, DatasetFingerprint, RoutingBudget, Score, ScoredResponse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("calibration needs at least 2 responses, got {0}")]
    TooSmall(usize),
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Quantile(#[from] QuantileError),
    #[error("solver did not converge: best per-classifier budget {:.6}% leaves residual {residual:.3e}", best.solved_percent)]
    SolverDidNotConverge {
        /// Configuration at the best iterate, usable if the caller accepts it.
        best: Box<CalibrationConfig>,
        residual: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Acceptable `|g(p̃) - p/100|`; `None` means `0.5 / n`.
    pub tolerance: Option<f64>,
    pub max_iterations: u32,
    /// The second secant point is `p * factor`; the first is always `p / 2`.
    pub second_initial_percent_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            tolerance: None,
            max_iterations: 32,
            second_initial_percent_factor: 1.0,
        }
    }
}

impl SolverSettings {
    pub fn tolerance_for(&self, n: usize) -> f64 {
        self.tolerance.unwrap_or(0.5 / n as f64)
    }

    fn validate(&self) -> Result<(), CalibrationError> {
        if let Some(t) = self.tolerance {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CalibrationError::InvalidSettings(format!("tolerance {t} must be > 0")));
            }
        }
        if self.max_iterations < 2 {
            return Err(CalibrationError::InvalidSettings("max_iterations must be >= 2".into()));
        }
        let f = self.second_initial_percent_factor;
        if !(f > 0.5 && f <= 1.0) {
            return Err(CalibrationError::InvalidSettings(format!(
                "second_initial_percent_factor {f} must lie in (0.5, 1]"
            )));
        }
        Ok(())
    }
}

/// Single-classifier cutoff flagging `budget` of the sample.
pub fn single_cutoff(sample: &ScoreSample, budget: RoutingBudget) -> Score {
    sample.interpolated_cutoff(budget)
}

/// Number of responses flagged by at least one classifier.
pub fn union_count(dataset: &[ScoredResponse], content_cutoff: Score, prosodic_cutoff: Score) -> usize {
    let (c, p) = (content_cutoff.value(), prosodic_cutoff.value());
    dataset
        .iter()
        .filter(|r| r.content_score().value() > c || r.prosodic_score().value() > p)
        .count()
}

/// Fraction of responses flagged by at least one classifier.
pub fn union_rate(
    dataset: &[ScoredResponse],
    content_cutoff: Score,
    prosodic_cutoff: Score,
) -> Result<f64, CalibrationError> {
    if dataset.is_empty() {
        return Err(CalibrationError::EmptyDataset);
    }
    Ok(union_count(dataset, content_cutoff, prosodic_cutoff) as f64 / dataset.len() as f64)
}

/// The map `p̃ ↦ g(p̃)` over one dataset.
#[derive(Debug)]
pub struct UnionRateFunction<'a> {
    dataset: &'a [ScoredResponse],
    content: ScoreSample,
    prosodic: ScoreSample,
}

impl<'a> UnionRateFunction<'a> {
    pub fn new(dataset: &'a [ScoredResponse]) -> Result<Self, CalibrationError> {
        match dataset.len() {
            0 => return Err(CalibrationError::EmptyDataset),
            1 => return Err(CalibrationError::TooSmall(1)),
            _ => {}
        }
        Ok(UnionRateFunction {
            dataset,
            content: ScoreSample::new(dataset.iter().map(ScoredResponse::content_score))?,
            prosodic: ScoreSample::new(dataset.iter().map(ScoredResponse::prosodic_score))?,
        })
    }

    pub fn len(&self) -> usize {
        self.dataset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dataset.is_empty()
    }

    pub fn content_sample(&self) -> &ScoreSample {
        &self.content
    }

    pub fn prosodic_sample(&self) -> &ScoreSample {
        &self.prosodic
    }

    /// Both cutoffs at per-classifier budget `percent`.
    pub fn cutoffs(&self, percent: f64) -> Result<(Score, Score), CalibrationError> {
        Ok((
            self.content.cutoff_at_percent(percent)?,
            self.prosodic.cutoff_at_percent(percent)?,
        ))
    }

    pub fn count(&self, percent: f64) -> Result<usize, CalibrationError> {
        let (c, p) = self.cutoffs(percent)?;
        Ok(union_count(self.dataset, c, p))
    }

    pub fn evaluate(&self, percent: f64) -> Result<f64, CalibrationError> {
        Ok(self.count(percent)? as f64 / self.len() as f64)
    }
}

/// Solves the common per-classifier budget so the OR-combination flags
/// `target` of the dataset.
///
/// The secant starts from `p/2` and `p * second_initial_percent_factor`,
/// with every iterate clamped to `(0, p]`. The empirical `g` is a step
/// function, so the solver also stops once its sign-change bracket is one
/// order-statistic step wide. The returned budget is then snapped to the
/// largest budget that flags the same population, choosing the closer of the
/// neighbouring populations (the larger on ties).
pub fn calibrate_hybrid(
    dataset: &[ScoredResponse],
    target: RoutingBudget,
    settings: &SolverSettings,
) -> Result<CalibrationConfig, CalibrationError> {
    settings.validate()?;
    let g = UnionRateFunction::new(dataset)?;
    let n = g.len();
    let p = target.percent();
    let goal = target.fraction();

    let solver = SecantSolver {
        tolerance: settings.tolerance_for(n),
        max_iterations: settings.max_iterations,
        bounds: Some((p * 1e-9, p)),
        x_resolution: Some(100.0 / (n - 1) as f64),
        perturbation: Some(100.0 / n as f64),
        max_perturbations: 8,
    };
    let outcome = solver.solve(
        |x| g.evaluate(x).map(|rate| rate - goal).unwrap_or(f64::NAN),
        0.5 * p,
        p * settings.second_initial_percent_factor,
    );

    let fingerprint = DatasetFingerprint::of(dataset);
    match outcome {
        Ok(root) => Snapper::new(&g, target).config(root.root, root.iterations, fingerprint),
        Err(SecantError::DidNotConverge {
            best_x, iterations, ..
        }) => {
            let best = Snapper::new(&g, target).config(best_x, iterations, fingerprint)?;
            let residual = best.residual();
            Err(CalibrationError::SolverDidNotConverge {
                best: Box::new(best),
                residual,
            })
        }
        Err(e) => Err(CalibrationError::InvalidSettings(e.to_string())),
    }
}

/// Moves a solver iterate to the canonical budget of its flagged population.
struct Snapper<'g, 'a> {
    g: &'g UnionRateFunction<'a>,
    target: RoutingBudget,
    top_level: usize,
    counts: RefCell<HashMap<usize, usize>>,
}

impl<'g, 'a> Snapper<'g, 'a> {
    fn new(g: &'g UnionRateFunction<'a>, target: RoutingBudget) -> Self {
        Snapper {
            g,
            target,
            top_level: g.content.level(target.percent()),
            counts: RefCell::new(HashMap::new()),
        }
    }

    fn max_level(&self) -> usize {
        self.g.len() - 1
    }

    /// Largest budget in `(0, p]` whose interpolation level is `level`.
    fn budget_at(&self, level: usize) -> f64 {
        let p = self.target.percent();
        if level <= self.top_level {
            return p;
        }
        let n = self.g.len();
        let mut x = 100.0 * (1.0 - (level - 1) as f64 / (n - 1) as f64);
        for _ in 0..64 {
            if self.g.content.level(x) >= level {
                break;
            }
            x = x.next_down();
        }
        for _ in 0..64 {
            let up = x.next_up();
            if up > p || self.g.content.level(up) != level {
                break;
            }
            x = up;
        }
        x.min(p)
    }

    fn count(&self, level: usize) -> usize {
        if let Some(&c) = self.counts.borrow().get(&level) {
            return c;
        }
        let c = self.g.count(self.budget_at(level)).expect("budget within (0, p]");
        self.counts.borrow_mut().insert(level, c);
        c
    }

    fn residual(&self, count: usize) -> f64 {
        (count as f64 / self.g.len() as f64 - self.target.fraction()).abs()
    }

    /// Highest level (largest budget) sharing `level`'s count.
    fn plateau_top(&self, mut level: usize) -> usize {
        let c = self.count(level);
        while level > self.top_level && self.count(level - 1) == c {
            level -= 1;
        }
        level
    }

    fn snap(&self, percent: f64) -> usize {
        let mut level = self.g.content.level(percent).clamp(self.top_level, self.max_level());
        level = self.plateau_top(level);
        for _ in 0..self.g.len() {
            let c = self.count(level);
            let here = self.residual(c);
            let rate = c as f64 / self.g.len() as f64;
            if rate < self.target.fraction() {
                if level == self.top_level {
                    break;
                }
                let up = self.plateau_top(level - 1);
                if self.residual(self.count(up)) <= here {
                    level = up;
                    continue;
                }
            } else if rate > self.target.fraction() {
                let mut down = level + 1;
                while down <= self.max_level() && self.count(down) == c {
                    down += 1;
                }
                if down <= self.max_level() && self.residual(self.count(down)) < here {
                    level = down;
                    continue;
                }
            }
            break;
        }
        level
    }

    fn config(
        &self,
        percent: f64,
        iterations: u32,
        fingerprint: DatasetFingerprint,
    ) -> Result<CalibrationConfig, CalibrationError> {
        let level = self.snap(percent);
        let solved = self.budget_at(level);
        let (content_cutoff, prosodic_cutoff) = self.g.cutoffs(solved)?;
        Ok(CalibrationConfig {
            target_percent: self.target,
            solved_percent: solved,
            content_cutoff,
            prosodic_cutoff,
            achieved_union_rate: self.g.evaluate(solved)?,
            solver_iterations: iterations,
            dataset_fingerprint: fingerprint,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> Score {
        Score::new(v).unwrap()
    }

    fn budget(p: f64) -> RoutingBudget {
        RoutingBudget::new(p).unwrap()
    }

    fn dataset(pairs: &[(f64, f64)]) -> Vec<ScoredResponse> {
        pairs
            .iter()
            .enumerate()
            .map(|(i, &(c, p))| ScoredResponse::unlabeled(format!("r{i:05}"), s(c), s(p)).unwrap())
            .collect()
    }

    /// Both scores equal: the union collapses to either member.
    fn identical(n: usize) -> Vec<ScoredResponse> {
        dataset(&(0..n).map(|i| (i as f64 / n as f64, i as f64 / n as f64)).collect::<Vec<_>>())
    }

    /// Reversed rankings: the top sets of the two scorers are disjoint.
    fn disjoint(n: usize) -> Vec<ScoredResponse> {
        dataset(
            &(0..n)
                .map(|i| (i as f64 / n as f64, (n - 1 - i) as f64 / n as f64))
                .collect::<Vec<_>>(),
        )
    }

    #[test]
    fn union_rate_of_identical_scorers_is_single_rate() {
        let d = identical(100);
        let sample = ScoreSample::new(d.iter().map(|r| r.content_score())).unwrap();
        let c = s(0.895);
        assert_eq!(union_rate(&d, c, c).unwrap(), sample.exceedance_rate(c));
    }

    #[test]
    fn union_rate_of_disjoint_flags_is_sum() {
        let d = disjoint(100);
        // content flags i >= 95, prosody flags i <= 2
        let rate = union_rate(&d, s(0.945), s(0.965)).unwrap();
        assert_eq!(rate, 8.0 / 100.0);
    }

    #[test]
    fn union_rate_rejects_empty() {
        assert_eq!(union_rate(&[], s(0.5), s(0.5)), Err(CalibrationError::EmptyDataset));
    }

    #[test]
    fn single_cutoff_midpoint() {
        let sample = ScoreSample::new([s(0.0), s(1.0)]).unwrap();
        assert_eq!(single_cutoff(&sample, budget(50.0)).value(), 0.5);
    }

    #[test]
    fn identical_scorers_solve_to_full_budget() {
        let d = identical(1000);
        let cfg = calibrate_hybrid(&d, budget(2.0), &SolverSettings::default()).unwrap();
        assert_eq!(cfg.solved_percent, 2.0);
        assert_eq!(cfg.content_cutoff, cfg.prosodic_cutoff);
        assert!((cfg.achieved_union_rate - 0.02).abs() <= 0.5 / 1000.0);
    }

    #[test]
    fn disjoint_scorers_solve_to_half_budget() {
        let d = disjoint(1000);
        let cfg = calibrate_hybrid(&d, budget(2.0), &SolverSettings::default()).unwrap();
        let step = 100.0 / 999.0;
        assert!((cfg.solved_percent - 1.0).abs() <= step, "{}", cfg.solved_percent);
        assert_eq!(cfg.achieved_union_rate, 0.02);
    }

    #[test]
    fn two_response_dataset_calibrates() {
        let d = dataset(&[(0.2, 0.1), (0.8, 0.9)]);
        let cfg = calibrate_hybrid(&d, budget(50.0), &SolverSettings::default()).unwrap();
        assert!(cfg.solved_percent > 0.0 && cfg.solved_percent <= 50.0);
        assert_eq!(cfg.achieved_union_rate, 0.5);
    }

    #[test]
    fn two_response_dataset_with_crossed_ranks_cannot_hit_half() {
        // Every budget flags one response per scorer, and they differ.
        let d = dataset(&[(0.2, 0.3), (0.8, 0.1)]);
        match calibrate_hybrid(&d, budget(50.0), &SolverSettings::default()) {
            Err(CalibrationError::SolverDidNotConverge { best, .. }) => assert_eq!(best.achieved_union_rate, 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_tied_scores_do_not_converge_but_return_best() {
        let d = dataset(&[(0.5, 0.5); 500]);
        match calibrate_hybrid(&d, budget(1.0), &SolverSettings::default()) {
            Err(CalibrationError::SolverDidNotConverge { best, residual }) => {
                assert_eq!(best.achieved_union_rate, 0.0);
                assert!((residual + 0.01).abs() < 1e-12);
                assert!(best.solved_percent > 0.0 && best.solved_percent <= 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn small_datasets_are_rejected() {
        let one = dataset(&[(0.1, 0.1)]);
        assert_eq!(
            calibrate_hybrid(&one, budget(1.0), &SolverSettings::default()),
            Err(CalibrationError::TooSmall(1))
        );
        assert_eq!(
            calibrate_hybrid(&[], budget(1.0), &SolverSettings::default()),
            Err(CalibrationError::EmptyDataset)
        );
    }

    #[test]
    fn settings_are_validated() {
        let d = identical(10);
        for bad in [
            SolverSettings { tolerance: Some(0.0), ..Default::default() },
            SolverSettings { max_iterations: 1, ..Default::default() },
            SolverSettings { second_initial_percent_factor: 0.5, ..Default::default() },
        ] {
            assert!(matches!(
                calibrate_hybrid(&d, budget(10.0), &bad),
                Err(CalibrationError::InvalidSettings(_))
            ));
        }
    }

    #[test]
    fn solved_budget_stays_within_target() {
        let d = disjoint(500);
        for p in [0.3, 1.0, 4.0, 20.0] {
            let cfg = calibrate_hybrid(&d, budget(p), &SolverSettings::default()).unwrap();
            assert!(cfg.solved_percent > 0.0 && cfg.solved_percent <= p);
        }
    }
}
