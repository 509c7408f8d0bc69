use std::collections::BTreeMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::Score;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Audio,
    Transcribe,
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Modality::Text => "text",
            Modality::Audio => "audio",
            Modality::Transcribe => "transcribe",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Text(String),
    /// Path or URI of an audio object.
    Audio(String),
}

/// One item to score. Exactly one payload kind is present.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRequest", into = "RawRequest")]
pub struct ScoreRequest {
    pub id: String,
    pub payload: Payload,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct RawRequest {
    id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audio_path: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
}

impl TryFrom<RawRequest> for ScoreRequest {
    type Error = String;

    fn try_from(raw: RawRequest) -> Result<Self, Self::Error> {
        if raw.id.is_empty() {
            return Err("request id must be non-empty".into());
        }
        let payload = match (raw.text, raw.audio_path) {
            (Some(text), None) => Payload::Text(text),
            (None, Some(path)) => Payload::Audio(path),
            _ => return Err(format!("request {:?} must carry exactly one of text or audio_path", raw.id)),
        };
        Ok(ScoreRequest {
            id: raw.id,
            payload,
            metadata: raw.metadata,
        })
    }
}

impl From<ScoreRequest> for RawRequest {
    fn from(req: ScoreRequest) -> Self {
        let (text, audio_path) = match req.payload {
            Payload::Text(t) => (Some(t), None),
            Payload::Audio(a) => (None, Some(a)),
        };
        RawRequest {
            id: req.id,
            text,
            audio_path,
            metadata: req.metadata,
        }
    }
}

impl ScoreRequest {
    pub fn text(id: impl Into<String>, text: impl Into<String>) -> Self {
        ScoreRequest {
            id: id.into(),
            payload: Payload::Text(text.into()),
            metadata: BTreeMap::new(),
        }
    }

    pub fn audio(id: impl Into<String>, path: impl Into<String>) -> Self {
        ScoreRequest {
            id: id.into(),
            payload: Payload::Audio(path.into()),
            metadata: BTreeMap::new(),
        }
    }

    pub fn modality(&self) -> Modality {
        match self.payload {
            Payload::Text(_) => Modality::Text,
            Payload::Audio(_) => Modality::Audio,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScorerError {
    #[error("{adapter}: no response within {after:?}")]
    Timeout { adapter: String, after: Duration },
    #[error("{adapter}: protocol violation: {message}")]
    Protocol { adapter: String, message: String },
    #[error("{adapter}: scorer reported: {message}")]
    Reported { adapter: String, message: String },
    #[error("{adapter}: unavailable: {message}")]
    Unavailable { adapter: String, message: String },
    #[error("{adapter}: expects {expected} requests, got {got}")]
    ModalityMismatch {
        adapter: String,
        expected: Modality,
        got: Modality,
    },
}

/// An external or inline score function.
///
/// Implementations must return scores in `[0, 1]`; an out-of-range value
/// from a remote scorer is a [`ScorerError::Protocol`] failure, never clamped.
pub trait ScorerAdapter: Send + Sync {
    fn name(&self) -> &str;

    fn modality(&self) -> Modality;

    /// Whether concurrent `score` calls are allowed. Single-flight adapters
    /// are serialized by the pipeline.
    fn concurrent(&self) -> bool {
        true
    }

    fn health_check(&self) -> Result<(), ScorerError> {
        Ok(())
    }

    fn score(&self, request: &ScoreRequest) -> Result<Score, ScorerError>;
}

/// Speech-to-text stage feeding the content scorer.
pub trait Transcriber: Send + Sync {
    fn name(&self) -> &str;

    fn concurrent(&self) -> bool {
        true
    }

    fn health_check(&self) -> Result<(), ScorerError> {
        Ok(())
    }

    fn transcribe(&self, request: &ScoreRequest) -> Result<String, ScorerError>;
}
