//! Domain vocabulary shared by every other module.
//!
//! All types validate on construction and are immutable afterwards, so they
//! can be shared freely between threads.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Validation failures for the core domain types.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TypeError {
    #[error("score {0} is outside [0, 1] or not finite")]
    InvalidScore(f64),
    #[error("routing budget {0}% must satisfy 0 < p < 100")]
    BudgetOutOfRange(f64),
    #[error("response id must be non-empty")]
    EmptyId,
    #[error("response {0}: a category requires the alert label")]
    CategoryWithoutAlert(String),
    #[error("duplicate response id {0:?}")]
    DuplicateId(String),
    #[error("response {id:?}: {field} is out of range")]
    ScoreOutOfRange { id: String, field: &'static str },
    #[error("unknown alert category {0:?}")]
    UnknownCategory(String),
}

/// A probability-like scorer output in `[0, 1]`.
///
/// Both endpoints are legal: saturated softmax outputs round to exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Score(f64);

impl Score {
    pub const ZERO: Score = Score(0.0);
    pub const ONE: Score = Score(1.0);

    pub fn new(value: f64) -> Result<Self, TypeError> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Score(value))
        } else {
            Err(TypeError::InvalidScore(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Score {
    type Error = TypeError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        Score::new(value)
    }
}

impl From<Score> for f64 {
    fn from(score: Score) -> f64 {
        score.0
    }
}

impl fmt::Display for Score {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

/// Percentage of the whole population routed to human review, in percent
/// units (`1.0` means 1%).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct RoutingBudget(f64);

impl RoutingBudget {
    pub fn new(percent: f64) -> Result<Self, TypeError> {
        if percent.is_finite() && percent > 0.0 && percent < 100.0 {
            Ok(RoutingBudget(percent))
        } else {
            Err(TypeError::BudgetOutOfRange(percent))
        }
    }

    #[inline]
    pub fn percent(self) -> f64 {
        self.0
    }

    /// The budget as a population fraction.
    #[inline]
    pub fn fraction(self) -> f64 {
        self.0 / 100.0
    }

    /// Routed percentages reported in the reference efficacy table.
    pub fn default_sweep() -> Vec<RoutingBudget> {
        [0.3, 0.5, 0.7, 1.0, 2.0, 4.0]
            .into_iter()
            .map(RoutingBudget)
            .collect()
    }
}

impl TryFrom<f64> for RoutingBudget {
    type Error = TypeError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        RoutingBudget::new(value)
    }
}

impl From<RoutingBudget> for f64 {
    fn from(budget: RoutingBudget) -> f64 {
        budget.0
    }
}

impl fmt::Display for RoutingBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}%", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertCategory {
    HarmToSelf,
    HarmToOthers,
    HarmFromOthers,
    SevereDepression,
    RequestForHelp,
}

impl AlertCategory {
    pub const ALL: [AlertCategory; 5] = [
        AlertCategory::HarmToSelf,
        AlertCategory::HarmToOthers,
        AlertCategory::HarmFromOthers,
        AlertCategory::SevereDepression,
        AlertCategory::RequestForHelp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlertCategory::HarmToSelf => "harm_to_self",
            AlertCategory::HarmToOthers => "harm_to_others",
            AlertCategory::HarmFromOthers => "harm_from_others",
            AlertCategory::SevereDepression => "severe_depression",
            AlertCategory::RequestForHelp => "request_for_help",
        }
    }
}

impl std::str::FromStr for AlertCategory {
    type Err = TypeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlertCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| TypeError::UnknownCategory(s.to_string()))
    }
}

/// One response with both scorer outputs attached.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredResponse {
    id: String,
    content_score: Score,
    prosodic_score: Score,
    label: Option<bool>,
    category: Option<AlertCategory>,
}

impl ScoredResponse {
    pub fn new(
        id: impl Into<String>,
        content_score: Score,
        prosodic_score: Score,
        label: Option<bool>,
        category: Option<AlertCategory>,
    ) -> Result<Self, TypeError> {
        let id = id.into();
        if id.is_empty() {
            return Err(TypeError::EmptyId);
        }
        if category.is_some() && label != Some(true) {
            return Err(TypeError::CategoryWithoutAlert(id));
        }
        Ok(ScoredResponse {
            id,
            content_score,
            prosodic_score,
            label,
            category,
        })
    }

    /// Unlabeled response, as found in a calibration-only population.
    pub fn unlabeled(id: impl Into<String>, content: Score, prosodic: Score) -> Result<Self, TypeError> {
        Self::new(id, content, prosodic, None, None)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn content_score(&self) -> Score {
        self.content_score
    }

    pub fn prosodic_score(&self) -> Score {
        self.prosodic_score
    }

    pub fn label(&self) -> Option<bool> {
        self.label
    }

    pub fn is_alert(&self) -> bool {
        self.label == Some(true)
    }

    pub fn category(&self) -> Option<AlertCategory> {
        self.category
    }
}

/// Per-response routing outcome. `flagged` is always `by_content || by_prosody`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDecision")]
pub struct RoutingDecision {
    pub(crate) id: String,
    pub(crate) by_content: bool,
    pub(crate) by_prosody: bool,
    pub(crate) flagged: bool,
    /// Set when the content path failed and the decision rests on prosody alone.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub(crate) partial: bool,
}

#[derive(Deserialize)]
struct RawDecision {
    id: String,
    by_content: bool,
    by_prosody: bool,
    flagged: bool,
    #[serde(default)]
    partial: bool,
}

impl TryFrom<RawDecision> for RoutingDecision {
    type Error = String;

    fn try_from(raw: RawDecision) -> Result<Self, Self::Error> {
        if raw.flagged != (raw.by_content || raw.by_prosody) {
            return Err(format!("decision {:?}: flagged must equal by_content OR by_prosody", raw.id));
        }
        let mut decision = RoutingDecision::new(raw.id, raw.by_content, raw.by_prosody);
        decision.partial = raw.partial;
        Ok(decision)
    }
}

impl RoutingDecision {
    pub fn new(id: impl Into<String>, by_content: bool, by_prosody: bool) -> Self {
        RoutingDecision {
            id: id.into(),
            by_content,
            by_prosody,
            flagged: by_content || by_prosody,
            partial: false,
        }
    }

    /// A decision made on prosody alone after the content path failed.
    pub fn prosody_only(id: impl Into<String>, by_prosody: bool) -> Self {
        RoutingDecision {
            partial: true,
            ..RoutingDecision::new(id, false, by_prosody)
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn by_content(&self) -> bool {
        self.by_content
    }

    pub fn by_prosody(&self) -> bool {
        self.by_prosody
    }

    pub fn flagged(&self) -> bool {
        self.flagged
    }

    pub fn partial(&self) -> bool {
        self.partial
    }
}

/// Hex-encoded SHA-256 over the canonical serialization of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DatasetFingerprint(String);

impl DatasetFingerprint {
    /// Order-independent: responses are sorted by id before hashing.
    pub fn of(responses: &[ScoredResponse]) -> Self {
        let mut sorted: Vec<&ScoredResponse> = responses.iter().collect();
        sorted.sort_by(|a, b| a.id.cmp(&b.id));
        let mut hasher = Sha256::new();
        for r in sorted {
            hasher.update((r.id.len() as u64).to_be_bytes());
            hasher.update(r.id.as_bytes());
            hasher.update(r.content_score.0.to_bits().to_be_bytes());
            hasher.update(r.prosodic_score.0.to_bits().to_be_bytes());
            let label: u8 = match r.label {
                None => 0,
                Some(false) => 1,
                Some(true) => 2,
            };
            hasher.update([label]);
        }
        DatasetFingerprint(hex::encode(hasher.finalize()))
    }

    pub fn from_hex(hex: impl Into<String>) -> Self {
        DatasetFingerprint(hex.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for DatasetFingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Solved dual-cutoff configuration for one target routing budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub target_percent: RoutingBudget,
    /// Common per-classifier budget, in percent units.
    pub solved_percent: f64,
    pub content_cutoff: Score,
    pub prosodic_cutoff: Score,
    pub achieved_union_rate: f64,
    pub solver_iterations: u32,
    pub dataset_fingerprint: DatasetFingerprint,
}

impl CalibrationConfig {
    /// Residual of the achieved union rate against the target fraction.
    pub fn residual(&self) -> f64 {
        self.achieved_union_rate - self.target_percent.fraction()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub total: usize,
    pub labeled: usize,
    pub alerts: usize,
    pub by_category: BTreeMap<AlertCategory, usize>,
}

/// Checks id uniqueness and score ranges, and counts labels.
///
/// Scores held in [`ScoredResponse`] are valid by construction; the range
/// check guards values that reached the dataset through other routes.
pub fn validate_dataset(responses: &[ScoredResponse]) -> Result<DatasetSummary, TypeError> {
    let mut seen = HashSet::with_capacity(responses.len());
    let mut summary = DatasetSummary {
        total: responses.len(),
        ..DatasetSummary::default()
    };
    for r in responses {
        if !seen.insert(r.id.as_str()) {
            return Err(TypeError::DuplicateId(r.id.clone()));
        }
        for (field, score) in [("content_score", r.content_score), ("prosodic_score", r.prosodic_score)] {
            if Score::new(score.0).is_err() {
                return Err(TypeError::ScoreOutOfRange { id: r.id.clone(), field });
            }
        }
        if r.label.is_some() {
            summary.labeled += 1;
        }
        if r.is_alert() {
            summary.alerts += 1;
            if let Some(c) = r.category {
                *summary.by_category.entry(c).or_default() += 1;
            }
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn s(v: f64) -> Score {
        Score::new(v).unwrap()
    }

    #[test]
    fn score_endpoints_are_legal() {
        assert!(Score::new(0.0).is_ok());
        assert!(Score::new(1.0).is_ok());
        for bad in [-1e-12, 1.0 + 1e-12, f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(Score::new(bad).is_err(), "{bad}");
        }
    }

    proptest! {
        #[test]
        fn score_accepts_exactly_unit_interval(v in prop::num::f64::ANY) {
            let inside = v.is_finite() && (0.0..=1.0).contains(&v);
            prop_assert_eq!(Score::new(v).is_ok(), inside);
        }
    }

    #[test]
    fn decision_flag_is_or_for_all_inputs() {
        for by_content in [false, true] {
            for by_prosody in [false, true] {
                let d = RoutingDecision::new("x", by_content, by_prosody);
                assert_eq!(d.flagged(), by_content || by_prosody);
            }
        }
    }

    #[test]
    fn decision_deserialization_rejects_inconsistent_flag() {
        let bad = r#"{"id":"a","by_content":true,"by_prosody":false,"flagged":false}"#;
        assert!(serde_json::from_str::<RoutingDecision>(bad).is_err());
        let good = r#"{"id":"a","by_content":true,"by_prosody":false,"flagged":true}"#;
        assert!(serde_json::from_str::<RoutingDecision>(good).unwrap().flagged());
    }

    #[test]
    fn budget_bounds() {
        assert!(RoutingBudget::new(0.0).is_err());
        assert!(RoutingBudget::new(100.0).is_err());
        assert!(RoutingBudget::new(f64::NAN).is_err());
        assert_eq!(RoutingBudget::new(1.0).unwrap().fraction(), 0.01);
        assert_eq!(RoutingBudget::default_sweep().len(), 6);
    }

    #[test]
    fn response_invariants() {
        assert_eq!(ScoredResponse::unlabeled("", s(0.1), s(0.2)), Err(TypeError::EmptyId));
        let err = ScoredResponse::new("a", s(0.1), s(0.2), Some(false), Some(AlertCategory::HarmToSelf));
        assert!(matches!(err, Err(TypeError::CategoryWithoutAlert(_))));
        assert!(ScoredResponse::new("a", s(0.1), s(0.2), Some(true), Some(AlertCategory::HarmToSelf)).is_ok());
    }

    #[test]
    fn category_names_round_trip() {
        for c in AlertCategory::ALL {
            assert_eq!(c.as_str().parse::<AlertCategory>().unwrap(), c);
        }
        assert!("other".parse::<AlertCategory>().is_err());
    }

    #[test]
    fn validate_empty_dataset() {
        let summary = validate_dataset(&[]).unwrap();
        assert_eq!(summary.total, 0);
        assert_eq!(summary.alerts, 0);
    }

    #[test]
    fn validate_rejects_duplicate_id() {
        let a = ScoredResponse::unlabeled("r1", s(0.1), s(0.2)).unwrap();
        let b = ScoredResponse::unlabeled("r1", s(0.3), s(0.4)).unwrap();
        assert_eq!(validate_dataset(&[a, b]), Err(TypeError::DuplicateId("r1".into())));
    }

    #[test]
    fn validate_counts_labels() {
        let rs = vec![
            ScoredResponse::new("a", s(0.9), s(0.9), Some(true), Some(AlertCategory::RequestForHelp)).unwrap(),
            ScoredResponse::new("b", s(0.1), s(0.1), Some(false), None).unwrap(),
            ScoredResponse::unlabeled("c", s(0.1), s(0.1)).unwrap(),
        ];
        let summary = validate_dataset(&rs).unwrap();
        assert_eq!((summary.total, summary.labeled, summary.alerts), (3, 2, 1));
        assert_eq!(summary.by_category[&AlertCategory::RequestForHelp], 1);
    }

    #[test]
    fn fingerprint_is_order_independent() {
        let a = ScoredResponse::unlabeled("a", s(0.1), s(0.2)).unwrap();
        let b = ScoredResponse::new("b", s(0.3), s(0.4), Some(true), None).unwrap();
        let f1 = DatasetFingerprint::of(&[a.clone(), b.clone()]);
        let f2 = DatasetFingerprint::of(&[b.clone(), a.clone()]);
        assert_eq!(f1, f2);
        assert_eq!(f1.as_str().len(), 64);
        let b2 = ScoredResponse::new("b", s(0.3), s(0.4), Some(false), None).unwrap();
        assert_ne!(f1, DatasetFingerprint::of(&[a, b2]));
    }
}
