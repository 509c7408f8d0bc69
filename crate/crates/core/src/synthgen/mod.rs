//! Seeded synthetic score datasets.
//!
//! Each response draws a latent standard-normal pair correlated through a
//! shared factor, `z_c = a·w + b·e₁` and `z_p = ±a·w + b·e₂` with
//! `a = √|ρ|`, `b = √(1 - |ρ|)`. Scores are the logistic transform of
//! `location + scale·z`, so they lie in `[0, 1]` without clamping.
//!
//! Generation uses `ChaCha8Rng` seeded through `seed_from_u64`, and normals
//! come from `rand_distr::StandardNormal`; the preset manifest pins both with
//! test vectors.

pub mod oracle;
mod preset;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use preset::{manifest, preset, Manifest, PresetEntry, PresetExpectation, RngTestVector};

use crate::types::{AlertCategory, Score, ScoredResponse};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

/// Logit-normal marginal: `sigmoid(location + scale * z)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitNormal {
    pub location: f64,
    pub scale: f64,
}

impl LogitNormal {
    pub fn new(location: f64, scale: f64) -> Self {
        LogitNormal { location, scale }
    }

    fn score(&self, z: f64) -> f64 {
        1.0 / (1.0 + (-(self.location + self.scale * z)).exp())
    }

    fn validate(&self, what: &str) -> Result<(), SynthError> {
        if !self.location.is_finite() || !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(SynthError::InvalidSpec(format!(
                "{what}: location must be finite and scale positive (got {}, {})",
                self.location, self.scale
            )));
        }
        Ok(())
    }
}

/// Marginals for one population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub content: LogitNormal,
    pub prosodic: LogitNormal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub n_normal: usize,
    pub n_alert: usize,
    pub normal: PopulationSpec,
    pub alert: PopulationSpec,
    /// Latent correlation between the two scores of a normal response.
    pub correlation: f64,
    /// Latent correlation for alerts; defaults to `correlation`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alert_correlation: Option<f64>,
}

/// Reference prevalence of alerts: about one in this many responses.
pub const REFERENCE_PREVALENCE_ONE_IN: usize = 8000;

impl GeneratorSpec {
    /// Splits `total` responses so that roughly one in `one_in` is an alert.
    pub fn with_prevalence(seed: u64, total: usize, one_in: usize, normal: PopulationSpec, alert: PopulationSpec) -> Self {
        let n_alert = (total + one_in / 2).checked_div(one_in).unwrap_or(0);
        GeneratorSpec {
            seed,
            n_normal: total - n_alert,
            n_alert,
            normal,
            alert,
            correlation: 0.0,
            alert_correlation: None,
        }
    }

    pub fn total(&self) -> usize {
        self.n_normal + self.n_alert
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        for (what, rho) in [("correlation", Some(self.correlation)), ("alert_correlation", self.alert_correlation)] {
            if let Some(rho) = rho {
                if !(-1.0..=1.0).contains(&rho) {
                    return Err(SynthError::InvalidSpec(format!("{what} {rho} is outside [-1, 1]")));
                }
            }
        }
        self.normal.content.validate("normal.content")?;
        self.normal.prosodic.validate("normal.prosodic")?;
        self.alert.content.validate("alert.content")?;
        self.alert.prosodic.validate("alert.prosodic")?;
        Ok(())
    }
}

/// Deterministic for a given spec. Ids are `r0000000`, `r0000001`, …; alert
/// positions are a seeded shuffle and alert categories are drawn uniformly.
pub fn generate(spec: &GeneratorSpec) -> Result<Vec<ScoredResponse>, SynthError> {
    spec.validate()?;
    let total = spec.total();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut is_alert = vec![false; total];
    is_alert[..spec.n_alert].fill(true);
    is_alert.shuffle(&mut rng);

    let width = total.saturating_sub(1).to_string().len().max(7);
    let alert_rho = spec.alert_correlation.unwrap_or(spec.correlation);
    let mut out = Vec::with_capacity(total);
    for (i, &alert) in is_alert.iter().enumerate() {
        let (population, rho) = if alert { (&spec.alert, alert_rho) } else { (&spec.normal, spec.correlation) };
        let (zc, zp) = latent_pair(&mut rng, rho);
        let content = population.content.score(zc);
        let prosodic = population.prosodic.score(zp);
        let category = alert.then(|| AlertCategory::ALL[rng.random_range(0..AlertCategory::ALL.len())]);
        let response = ScoredResponse::new(
            format!("r{i:0width$}"),
            Score::new(content).expect("logistic output lies in [0, 1]"),
            Score::new(prosodic).expect("logistic output lies in [0, 1]"),
            Some(alert),
            category,
        )
        .expect("generated ids are non-empty");
        out.push(response);
    }
    Ok(out)
}

fn latent_pair(rng: &mut ChaCha8Rng, rho: f64) -> (f64, f64) {
    let w: f64 = rng.sample(StandardNormal);
    let e1: f64 = rng.sample(StandardNormal);
    let e2: f64 = rng.sample(StandardNormal);
    let shared = rho.abs().sqrt();
    let own = (1.0 - rho.abs()).sqrt();
    (shared * w + own * e1, rho.signum() * shared * w + own * e2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_dataset;

    fn pop(c: f64, p: f64) -> PopulationSpec {
        PopulationSpec {
            content: LogitNormal::new(c, 1.5),
            prosodic: LogitNormal::new(p, 1.5),
        }
    }

    fn spec(seed: u64, n_normal: usize, n_alert: usize, rho: f64) -> GeneratorSpec {
        GeneratorSpec {
            seed,
            n_normal,
            n_alert,
            normal: pop(-4.0, -4.0),
            alert: pop(0.0, 0.0),
            correlation: rho,
            alert_correlation: None,
        }
    }

    fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (x, y) in xs.iter().zip(ys) {
            sxy += (x - mx) * (y - my);
            sxx += (x - mx) * (x - mx);
            syy += (y - my) * (y - my);
        }
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn empty_spec_gives_empty_dataset() {
        assert!(generate(&spec(1, 0, 0, 0.0)).unwrap().is_empty());
    }

    #[test]
    fn same_seed_same_dataset() {
        let s = spec(42, 500, 5, 0.3);
        assert_eq!(generate(&s).unwrap(), generate(&s).unwrap());
        let other = GeneratorSpec { seed: 43, ..s.clone() };
        assert_ne!(generate(&s).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        assert!(generate(&spec(1, 10, 0, 2.0)).is_err());
        assert!(generate(&GeneratorSpec { alert_correlation: Some(-1.5), ..spec(1, 10, 0, 0.0) }).is_err());
        let mut bad = spec(1, 10, 0, 0.0);
        bad.alert.prosodic.scale = 0.0;
        assert!(matches!(generate(&bad), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn reference_sized_dataset_counts() {
        let d = generate(&spec(9, 86_783, 100, 0.5)).unwrap();
        let summary = validate_dataset(&d).unwrap();
        assert_eq!((summary.total, summary.alerts, summary.labeled), (86_883, 100, 86_883));
        assert_eq!(summary.by_category.values().sum::<usize>(), 100);
    }

    #[test]
    fn alerts_score_higher_on_average() {
        let d = generate(&spec(3, 20_000, 2_000, 0.2)).unwrap();
        let mean = |alert: bool, f: fn(&ScoredResponse) -> Score| {
            let v: Vec<f64> = d.iter().filter(|r| r.is_alert() == alert).map(|r| f(r).value()).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(true, ScoredResponse::content_score) > mean(false, ScoredResponse::content_score));
        assert!(mean(true, ScoredResponse::prosodic_score) > mean(false, ScoredResponse::prosodic_score));
    }

    #[test]
    fn empirical_correlation_tracks_spec() {
        for (seed, rho) in [(1, -0.5), (2, 0.0), (3, 0.5), (4, 0.9)] {
            let mut s = spec(seed, 20_000, 0, rho);
            s.normal = pop(0.0, 0.0);
            let d = generate(&s).unwrap();
            let xs: Vec<f64> = d.iter().map(|r| r.content_score().value()).collect();
            let ys: Vec<f64> = d.iter().map(|r| r.prosodic_score().value()).collect();
            let r = pearson(&xs, &ys);
            assert!((r - rho).abs() <= 0.05, "rho {rho}: empirical {r}");
        }
    }

    #[test]
    fn prevalence_helper() {
        let s = GeneratorSpec::with_prevalence(1, 80_000, REFERENCE_PREVALENCE_ONE_IN, pop(-4.0, -4.0), pop(0.0, 0.0));
        assert_eq!((s.n_alert, s.n_normal), (10, 79_990));
    }
}
