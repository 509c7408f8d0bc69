//! Brute-force reference computations for tests and acceptance checks.
//!
//! Nothing here calls into the quantile or calibration modules: cutoffs and
//! counts are recomputed from scratch with straight-line loops.

use std::collections::BTreeSet;

use crate::types::{RoutingBudget, Score, ScoredResponse};

/// Ids flagged by content, by prosody, and by either.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FlagSets {
    pub content: BTreeSet<String>,
    pub prosody: BTreeSet<String>,
    pub union: BTreeSet<String>,
}

pub fn oracle_flag_sets(dataset: &[ScoredResponse], content_cutoff: Score, prosodic_cutoff: Score) -> FlagSets {
    let mut sets = FlagSets::default();
    for r in dataset {
        let mut hit = false;
        if r.content_score().value() > content_cutoff.value() {
            sets.content.insert(r.id().to_string());
            hit = true;
        }
        if r.prosodic_score().value() > prosodic_cutoff.value() {
            sets.prosody.insert(r.id().to_string());
            hit = true;
        }
        if hit {
            sets.union.insert(r.id().to_string());
        }
    }
    sets
}

/// Linear-interpolation quantile with position `h = (n-1)q + 1`, written out
/// longhand over an already sorted slice.
pub fn oracle_cutoff(sorted: &[f64], percent: f64) -> f64 {
    let n = sorted.len();
    let q = 1.0 - percent / 100.0;
    let h = (n as f64 - 1.0) * q + 1.0;
    let mut k = h.floor() as usize;
    if k < 1 {
        k = 1;
    }
    if k >= n {
        return sorted[n - 1];
    }
    let a = sorted[k - 1];
    let b = sorted[k];
    let v = a + (h - h.floor()) * (b - a);
    if v < a {
        a
    } else if v > b {
        b
    } else {
        v
    }
}

/// Scans `p̃ = step, 2·step, … ≤ p` (plus `p` itself) and returns the budget
/// whose OR-combined flag rate is closest to `p/100`, with the residual.
/// Ties go to the larger budget.
pub fn oracle_grid_calibrate(dataset: &[ScoredResponse], target: RoutingBudget, step_percent: f64) -> (f64, f64) {
    assert!(step_percent > 0.0, "step must be positive");
    let n = dataset.len();
    let mut content: Vec<f64> = dataset.iter().map(|r| r.content_score().value()).collect();
    let mut prosodic: Vec<f64> = dataset.iter().map(|r| r.prosodic_score().value()).collect();
    content.sort_by(|a, b| a.partial_cmp(b).unwrap());
    prosodic.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let p = target.percent();
    let goal = p / 100.0;
    let mut grid = Vec::new();
    let mut k = 1u64;
    loop {
        let x = k as f64 * step_percent;
        if x > p {
            break;
        }
        grid.push(x);
        k += 1;
    }
    if grid.last().is_none_or(|&last| last < p) {
        grid.push(p);
    }

    let mut best = (f64::NAN, f64::INFINITY);
    for x in grid {
        let cc = oracle_cutoff(&content, x);
        let cp = oracle_cutoff(&prosodic, x);
        let mut hits = 0usize;
        for r in dataset {
            if r.content_score().value() > cc || r.prosodic_score().value() > cp {
                hits += 1;
            }
        }
        let residual = (hits as f64 / n as f64 - goal).abs();
        if residual <= best.1 {
            best = (x, residual);
        }
    }
    best
}
