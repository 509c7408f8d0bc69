//! Deterministic in-process adapters for tests and offline runs.

use std::collections::HashMap;
use std::time::Duration;

use super::adapter::{Modality, Payload, ScoreRequest, ScorerAdapter, ScorerError, Transcriber};
use crate::types::Score;

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Scores `mix64(fnv1a64(salt ++ ":" ++ id))`, mapped to `[0, 1)` through
/// its top 53 bits.
#[derive(Debug, Clone)]
pub struct HashScorer {
    name: String,
    modality: Modality,
    salt: String,
}

impl HashScorer {
    pub fn new(name: impl Into<String>, modality: Modality, salt: impl Into<String>) -> Self {
        HashScorer {
            name: name.into(),
            modality,
            salt: salt.into(),
        }
    }

    pub fn score_for(salt: &str, id: &str) -> Score {
        let h = mix64(fnv1a64(format!("{salt}:{id}").as_bytes()));
        Score::new((h >> 11) as f64 / (1u64 << 53) as f64).expect("53-bit fraction lies in [0, 1)")
    }
}

impl ScorerAdapter for HashScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn modality(&self) -> Modality {
        self.modality
    }

    fn score(&self, request: &ScoreRequest) -> Result<Score, ScorerError> {
        check_modality(&self.name, self.modality, request)?;
        Ok(Self::score_for(&self.salt, &request.id))
    }
}

/// Looks scores up by request id.
#[derive(Debug, Clone)]
pub struct TableScorer {
    name: String,
    modality: Modality,
    scores: HashMap<String, Score>,
}

impl TableScorer {
    pub fn new(name: impl Into<String>, modality: Modality, scores: HashMap<String, Score>) -> Self {
        TableScorer {
            name: name.into(),
            modality,
            scores,
        }
    }
}

impl ScorerAdapter for TableScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn modality(&self) -> Modality {
        self.modality
    }

    fn score(&self, request: &ScoreRequest) -> Result<Score, ScorerError> {
        check_modality(&self.name, self.modality, request)?;
        self.scores.get(&request.id).copied().ok_or_else(|| ScorerError::Reported {
            adapter: self.name.clone(),
            message: format!("no score for {:?}", request.id),
        })
    }
}

/// Maps exact text to a score; unknown text scores `default`.
#[derive(Debug, Clone)]
pub struct TextTableScorer {
    pub name: String,
    pub table: HashMap<String, Score>,
    pub default: Score,
}

impl ScorerAdapter for TextTableScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn modality(&self) -> Modality {
        Modality::Text
    }

    fn score(&self, request: &ScoreRequest) -> Result<Score, ScorerError> {
        match &request.payload {
            Payload::Text(t) => Ok(self.table.get(t).copied().unwrap_or(self.default)),
            Payload::Audio(_) => Err(mismatch(&self.name, Modality::Text, Modality::Audio)),
        }
    }
}

/// Returns the same text for every request, or fails when `text` is `None`.
#[derive(Debug, Clone)]
pub struct FixedTranscriber {
    pub name: String,
    pub text: Option<String>,
}

impl Transcriber for FixedTranscriber {
    fn name(&self) -> &str {
        &self.name
    }

    fn transcribe(&self, request: &ScoreRequest) -> Result<String, ScorerError> {
        self.text.clone().ok_or_else(|| ScorerError::Reported {
            adapter: self.name.clone(),
            message: format!("cannot transcribe {:?}", request.id),
        })
    }
}

/// Transcribes every audio request to its own id.
#[derive(Debug, Clone, Default)]
pub struct EchoTranscriber;

impl Transcriber for EchoTranscriber {
    fn name(&self) -> &str {
        "echo-transcriber"
    }

    fn transcribe(&self, request: &ScoreRequest) -> Result<String, ScorerError> {
        Ok(request.id.clone())
    }
}

/// Wraps an adapter and fails selected ids with a timeout.
pub struct TimeoutOn<A> {
    pub inner: A,
    pub ids: Vec<String>,
    pub after: Duration,
}

impl<A: ScorerAdapter> ScorerAdapter for TimeoutOn<A> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn modality(&self) -> Modality {
        self.inner.modality()
    }

    fn concurrent(&self) -> bool {
        self.inner.concurrent()
    }

    fn score(&self, request: &ScoreRequest) -> Result<Score, ScorerError> {
        if self.ids.contains(&request.id) {
            return Err(ScorerError::Timeout {
                adapter: self.name().to_string(),
                after: self.after,
            });
        }
        self.inner.score(request)
    }
}

/// Fails its health check.
#[derive(Debug, Clone)]
pub struct DownScorer {
    pub name: String,
    pub modality: Modality,
}

impl ScorerAdapter for DownScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn modality(&self) -> Modality {
        self.modality
    }

    fn health_check(&self) -> Result<(), ScorerError> {
        Err(ScorerError::Unavailable {
            adapter: self.name.clone(),
            message: "down".into(),
        })
    }

    fn score(&self, _: &ScoreRequest) -> Result<Score, ScorerError> {
        self.health_check().map(|_| Score::ZERO)
    }
}

fn mismatch(adapter: &str, expected: Modality, got: Modality) -> ScorerError {
    ScorerError::ModalityMismatch {
        adapter: adapter.to_string(),
        expected,
        got,
    }
}

fn check_modality(adapter: &str, modality: Modality, request: &ScoreRequest) -> Result<(), ScorerError> {
    if modality == request.modality() {
        Ok(())
    } else {
        Err(mismatch(adapter, modality, request.modality()))
    }
}
