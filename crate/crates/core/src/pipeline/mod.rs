//! Inference-time routing: score each response with a content path
//! (transcriber then text scorer) and a prosodic path (audio scorer), apply
//! the calibrated cutoffs and OR the two flags.

mod adapter;
pub mod conformance;
pub mod mock;
pub mod plugin;

use std::collections::HashSet;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{Modality, Payload, ScoreRequest, ScorerAdapter, ScorerError, Transcriber};

use crate::types::{CalibrationConfig, RoutingDecision, Score};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("adapter {adapter} is unavailable: {reason}")]
    AdapterUnavailable { adapter: String, reason: String },
    #[error("duplicate request id {0:?}")]
    DuplicateRequestId(String),
}

/// Where an item failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Transcription,
    Content,
    Prosody,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContentPathError {
    #[error("transcription of {id:?} failed: {source}")]
    Transcription {
        id: String,
        #[source]
        source: ScorerError,
    },
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

impl ContentPathError {
    pub fn stage(&self) -> Stage {
        match self {
            ContentPathError::Transcription { .. } => Stage::Transcription,
            ContentPathError::Scorer(_) => Stage::Content,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub id: String,
    pub stage: Stage,
    pub error: String,
}

/// Decision made on prosody alone; the content path failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialNote {
    pub id: String,
    pub stage: Stage,
    pub error: String,
}

/// Accumulated wall-clock time per stage across all items and workers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub content: Duration,
    pub prosody: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub config: CalibrationConfig,
    /// Sorted by id.
    pub decisions: Vec<RoutingDecision>,
    /// Sorted by id.
    pub failures: Vec<ItemFailure>,
    /// Content-path failures behind partial decisions, sorted by id.
    pub partial: Vec<PartialNote>,
    pub timings: StageTimings,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BatchOptions {
    /// Worker pool bound; `None` uses the available parallelism.
    pub workers: Option<usize>,
}


/// Strict-inequality OR rule at the configured cutoffs.
pub fn classify(id: impl Into<String>, content: Score, prosodic: Score, config: &CalibrationConfig) -> RoutingDecision {
    RoutingDecision::new(
        id,
        content.value() > config.content_cutoff.value(),
        prosodic.value() > config.prosodic_cutoff.value(),
    )
}

/// Transcribes an audio request and scores the transcript under the same id.
/// An empty transcript is still scored.
pub fn transcribe_then_score(
    request: &ScoreRequest,
    transcriber: &dyn Transcriber,
    text_scorer: &dyn ScorerAdapter,
) -> Result<Score, ContentPathError> {
    if request.modality() != Modality::Audio {
        return Err(ContentPathError::Transcription {
            id: request.id.clone(),
            source: ScorerError::ModalityMismatch {
                adapter: transcriber.name().to_string(),
                expected: Modality::Audio,
                got: request.modality(),
            },
        });
    }
    let text = transcriber
        .transcribe(request)
        .map_err(|source| ContentPathError::Transcription {
            id: request.id.clone(),
            source,
        })?;
    let text_request = ScoreRequest {
        id: request.id.clone(),
        payload: Payload::Text(text),
        metadata: request.metadata.clone(),
    };
    Ok(text_scorer.score(&text_request)?)
}

/// Serializes calls to adapters that declared single-flight.
struct Gate(Option<Mutex<()>>);

impl Gate {
    fn new(concurrent: bool) -> Self {
        Gate((!concurrent).then(|| Mutex::new(())))
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        match &self.0 {
            Some(lock) => {
                let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
                f()
            }
            None => f(),
        }
    }
}

pub struct Adapters<'a> {
    pub content: &'a dyn ScorerAdapter,
    pub prosodic: &'a dyn ScorerAdapter,
    /// Required when any request carries audio.
    pub transcriber: Option<&'a dyn Transcriber>,
}

enum ItemOutcome {
    Decision(RoutingDecision, Option<PartialNote>),
    Failure(ItemFailure),
}

struct Worker<'a> {
    adapters: &'a Adapters<'a>,
    config: &'a CalibrationConfig,
    content_gate: Gate,
    prosodic_gate: Gate,
    transcriber_gate: Gate,
}

struct GatedTranscriber<'a> {
    inner: &'a dyn Transcriber,
    gate: &'a Gate,
}

impl Transcriber for GatedTranscriber<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn transcribe(&self, request: &ScoreRequest) -> Result<String, ScorerError> {
        self.gate.run(|| self.inner.transcribe(request))
    }
}

struct GatedScorer<'a> {
    inner: &'a dyn ScorerAdapter,
    gate: &'a Gate,
}

impl ScorerAdapter for GatedScorer<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn modality(&self) -> Modality {
        self.inner.modality()
    }

    fn score(&self, request: &ScoreRequest) -> Result<Score, ScorerError> {
        self.gate.run(|| self.inner.score(request))
    }
}

impl Worker<'_> {
    fn content_score(&self, request: &ScoreRequest) -> Result<Score, ContentPathError> {
        let scorer = GatedScorer {
            inner: self.adapters.content,
            gate: &self.content_gate,
        };
        match (&request.payload, self.adapters.transcriber) {
            (Payload::Audio(_), Some(t)) => {
                let transcriber = GatedTranscriber {
                    inner: t,
                    gate: &self.transcriber_gate,
                };
                transcribe_then_score(request, &transcriber, &scorer)
            }
            (Payload::Audio(_), None) => Err(ContentPathError::Transcription {
                id: request.id.clone(),
                source: ScorerError::Unavailable {
                    adapter: "transcriber".into(),
                    message: "no transcriber configured".into(),
                },
            }),
            (Payload::Text(_), _) => Ok(scorer.score(request)?),
        }
    }

    fn process(&self, request: &ScoreRequest, timings: &mut StageTimings) -> ItemOutcome {
        let started = Instant::now();
        let content = self.content_score(request);
        let content_done = Instant::now();
        let prosodic = self.prosodic_gate.run(|| self.adapters.prosodic.score(request));
        let prosody_done = Instant::now();
        timings.content += content_done - started;
        timings.prosody += prosody_done - content_done;
        timings.total += prosody_done - started;

        let id = request.id.clone();
        match (content, prosodic) {
            (_, Err(e)) => ItemOutcome::Failure(ItemFailure {
                id,
                stage: Stage::Prosody,
                error: e.to_string(),
            }),
            (Ok(c), Ok(p)) => ItemOutcome::Decision(classify(id, c, p, self.config), None),
            (Err(e), Ok(p)) => {
                let by_prosody = p.value() > self.config.prosodic_cutoff.value();
                let note = PartialNote {
                    id: id.clone(),
                    stage: e.stage(),
                    error: e.to_string(),
                };
                ItemOutcome::Decision(RoutingDecision::prosody_only(id, by_prosody), Some(note))
            }
        }
    }
}

/// Scores and routes a batch over a bounded worker pool.
///
/// Adapters are health-checked before any item is processed. Per-item
/// adapter failures are recorded without aborting the batch: a prosodic
/// failure makes the item a failure, while a content-path failure with a
/// working prosodic path yields a partial, prosody-only decision. Outputs are
/// sorted by id, so results do not depend on scheduling.
pub fn run_batch(
    requests: &[ScoreRequest],
    adapters: &Adapters<'_>,
    config: &CalibrationConfig,
    options: &BatchOptions,
) -> Result<PipelineRun, PipelineError> {
    let mut seen = HashSet::with_capacity(requests.len());
    for r in requests {
        if !seen.insert(r.id.as_str()) {
            return Err(PipelineError::DuplicateRequestId(r.id.clone()));
        }
    }
    let unavailable = |name: &str, reason: String| PipelineError::AdapterUnavailable {
        adapter: name.to_string(),
        reason,
    };
    for adapter in [adapters.content, adapters.prosodic] {
        adapter.health_check().map_err(|e| unavailable(adapter.name(), e.to_string()))?;
    }
    if adapters.content.modality() != Modality::Text {
        return Err(unavailable(
            adapters.content.name(),
            format!("content scorer must accept text, declares {}", adapters.content.modality()),
        ));
    }
    if adapters.prosodic.modality() != Modality::Audio {
        return Err(unavailable(
            adapters.prosodic.name(),
            format!("prosodic scorer must accept audio, declares {}", adapters.prosodic.modality()),
        ));
    }
    let needs_transcriber = requests.iter().any(|r| r.modality() == Modality::Audio);
    match adapters.transcriber {
        Some(t) => t.health_check().map_err(|e| unavailable(t.name(), e.to_string()))?,
        None if needs_transcriber => {
            return Err(unavailable("transcriber", "audio requests need a transcriber".into()));
        }
        None => {}
    }

    let worker = Worker {
        adapters,
        config,
        content_gate: Gate::new(adapters.content.concurrent()),
        prosodic_gate: Gate::new(adapters.prosodic.concurrent()),
        transcriber_gate: Gate::new(adapters.transcriber.is_none_or(|t| t.concurrent())),
    };
    let bound = options
        .workers
        .unwrap_or_else(|| thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1)
        .min(requests.len().max(1));

    let next = AtomicUsize::new(0);
    let mut outcomes = Vec::with_capacity(requests.len());
    let mut timings = StageTimings::default();
    thread::scope(|scope| {
        let handles: Vec<_> = (0..bound)
            .map(|_| {
                scope.spawn(|| {
                    let mut local = Vec::new();
                    let mut t = StageTimings::default();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(request) = requests.get(i) else { break };
                        local.push(worker.process(request, &mut t));
                    }
                    (local, t)
                })
            })
            .collect();
        for h in handles {
            let (local, t) = h.join().expect("pipeline worker panicked");
            outcomes.extend(local);
            timings.content += t.content;
            timings.prosody += t.prosody;
            timings.total += t.total;
        }
    });

    let mut decisions = Vec::new();
    let mut failures = Vec::new();
    let mut partial = Vec::new();
    for outcome in outcomes {
        match outcome {
            ItemOutcome::Decision(d, note) => {
                decisions.push(d);
                partial.extend(note);
            }
            ItemOutcome::Failure(f) => failures.push(f),
        }
    }
    decisions.sort_by(|a, b| a.id().cmp(b.id()));
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    partial.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(PipelineRun {
        config: config.clone(),
        decisions,
        failures,
        partial,
        timings,
    })
}
