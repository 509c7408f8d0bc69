use std::collections::HashMap;
use std::time::Duration;

use alertroute_core::pipeline::mock::{
    DownScorer, EchoTranscriber, FixedTranscriber, HashScorer, TableScorer, TextTableScorer, TimeoutOn,
};
use alertroute_core::pipeline::{
    classify, run_batch, transcribe_then_score, Adapters, BatchOptions, ContentPathError, Modality, PipelineError,
    ScoreRequest, Stage,
};
use alertroute_core::{CalibrationConfig, DatasetFingerprint, RoutingBudget, RoutingDecision, Score};

fn s(v: f64) -> Score {
    Score::new(v).unwrap()
}

fn config(content: f64, prosodic: f64) -> CalibrationConfig {
    CalibrationConfig {
        target_percent: RoutingBudget::new(1.0).unwrap(),
        solved_percent: 0.5,
        content_cutoff: s(content),
        prosodic_cutoff: s(prosodic),
        achieved_union_rate: 0.01,
        solver_iterations: 1,
        dataset_fingerprint: DatasetFingerprint::from_hex("fixture"),
    }
}

fn audio_requests(n: usize) -> Vec<ScoreRequest> {
    (0..n)
        .map(|k| ScoreRequest::audio(format!("req-{k:03}"), format!("mock://req-{k:03}")))
        .collect()
}

#[test]
fn classify_examples() {
    let cfg = config(0.5, 0.5);
    let d = classify("a", s(0.9), s(0.1), &cfg);
    assert!(d.by_content() && !d.by_prosody() && d.flagged());
    assert!(!classify("b", s(0.5), s(0.5), &cfg).flagged());
    let d = classify("c", s(0.2), s(0.8), &cfg);
    assert!(!d.by_content() && d.by_prosody() && d.flagged());
}

#[test]
fn transcription_composition() {
    let transcriber = FixedTranscriber {
        name: "t".into(),
        text: Some("hello".into()),
    };
    let scorer = TextTableScorer {
        name: "kw".into(),
        table: HashMap::from([("hello".to_string(), s(0.0))]),
        default: s(0.7),
    };
    let req = ScoreRequest::audio("x", "/a.wav");
    assert_eq!(transcribe_then_score(&req, &transcriber, &scorer).unwrap().value(), 0.0);

    let empty = FixedTranscriber {
        name: "t".into(),
        text: Some(String::new()),
    };
    let scorer_empty = TextTableScorer {
        table: HashMap::from([(String::new(), s(0.125))]),
        ..scorer.clone()
    };
    assert_eq!(transcribe_then_score(&req, &empty, &scorer_empty).unwrap().value(), 0.125);

    let broken = FixedTranscriber {
        name: "t".into(),
        text: None,
    };
    let err = transcribe_then_score(&req, &broken, &scorer).unwrap_err();
    assert!(matches!(err, ContentPathError::Transcription { ref id, .. } if id == "x"));
    assert_eq!(err.stage(), Stage::Transcription);
}

#[test]
fn empty_batch() {
    let content = HashScorer::new("c", Modality::Text, "content");
    let prosodic = HashScorer::new("p", Modality::Audio, "prosody");
    let adapters = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: None,
    };
    let run = run_batch(&[], &adapters, &config(0.5, 0.5), &BatchOptions::default()).unwrap();
    assert!(run.decisions.is_empty() && run.failures.is_empty());
}

#[test]
fn batch_matches_golden_decisions() {
    let content = HashScorer::new("c", Modality::Text, "content");
    let prosodic = HashScorer::new("p", Modality::Audio, "prosody");
    let adapters = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: Some(&EchoTranscriber),
    };
    let run = run_batch(&audio_requests(100), &adapters, &config(0.9, 0.85), &BatchOptions::default()).unwrap();
    let golden: Vec<RoutingDecision> = include_str!("data/golden_decisions_100.jsonl")
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(run.failures.is_empty());
    assert_eq!(run.decisions, golden);
}

#[test]
fn prosodic_timeout_fails_only_that_item() {
    let content = HashScorer::new("c", Modality::Text, "content");
    let prosodic = TimeoutOn {
        inner: HashScorer::new("p", Modality::Audio, "prosody"),
        ids: vec!["req-007".into()],
        after: Duration::from_secs(30),
    };
    let adapters = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: Some(&EchoTranscriber),
    };
    let run = run_batch(&audio_requests(20), &adapters, &config(0.9, 0.85), &BatchOptions::default()).unwrap();
    assert_eq!(run.failures.len(), 1);
    assert_eq!(run.failures[0].id, "req-007");
    assert_eq!(run.failures[0].stage, Stage::Prosody);
    assert_eq!(run.decisions.len(), 19);
}

#[test]
fn transcription_failure_yields_partial_prosody_decision() {
    let content = HashScorer::new("c", Modality::Text, "content");
    let prosodic = TableScorer::new(
        "p",
        Modality::Audio,
        HashMap::from([("a".to_string(), s(0.9)), ("b".to_string(), s(0.1))]),
    );
    let transcriber = FixedTranscriber {
        name: "asr".into(),
        text: None,
    };
    let adapters = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: Some(&transcriber),
    };
    let reqs = vec![ScoreRequest::audio("a", "/a"), ScoreRequest::audio("b", "/b")];
    let run = run_batch(&reqs, &adapters, &config(0.5, 0.5), &BatchOptions::default()).unwrap();
    assert!(run.failures.is_empty());
    assert_eq!(run.decisions.len(), 2);
    assert!(run.decisions.iter().all(|d| d.partial() && !d.by_content()));
    assert!(run.decisions[0].flagged());
    assert!(!run.decisions[1].flagged());
    assert_eq!(run.partial.len(), 2);
    assert_eq!(run.partial[0].stage, Stage::Transcription);
}

#[test]
fn every_call_failing_yields_only_failures() {
    let content = TableScorer::new("c", Modality::Text, HashMap::new());
    let prosodic = TableScorer::new("p", Modality::Audio, HashMap::new());
    let adapters = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: Some(&EchoTranscriber),
    };
    let reqs = audio_requests(30);
    let run = run_batch(&reqs, &adapters, &config(0.5, 0.5), &BatchOptions { workers: Some(4) }).unwrap();
    assert!(run.decisions.is_empty());
    let ids: Vec<_> = run.failures.iter().map(|f| f.id.clone()).collect();
    let expected: Vec<_> = reqs.iter().map(|r| r.id.clone()).collect();
    assert_eq!(ids, expected);
}

#[test]
fn unavailable_adapters_fail_fast() {
    let content = HashScorer::new("c", Modality::Text, "content");
    let down = DownScorer {
        name: "p".into(),
        modality: Modality::Audio,
    };
    let adapters = Adapters {
        content: &content,
        prosodic: &down,
        transcriber: Some(&EchoTranscriber),
    };
    let err = run_batch(&audio_requests(3), &adapters, &config(0.5, 0.5), &BatchOptions::default()).unwrap_err();
    assert!(matches!(err, PipelineError::AdapterUnavailable { ref adapter, .. } if adapter == "p"));

    let prosodic = HashScorer::new("p", Modality::Audio, "prosody");
    let no_transcriber = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: None,
    };
    assert!(matches!(
        run_batch(&audio_requests(1), &no_transcriber, &config(0.5, 0.5), &BatchOptions::default()),
        Err(PipelineError::AdapterUnavailable { .. })
    ));

    let swapped = Adapters {
        content: &prosodic,
        prosodic: &content,
        transcriber: Some(&EchoTranscriber),
    };
    assert!(matches!(
        run_batch(&audio_requests(1), &swapped, &config(0.5, 0.5), &BatchOptions::default()),
        Err(PipelineError::AdapterUnavailable { .. })
    ));
}

#[test]
fn duplicate_request_ids_are_rejected() {
    let content = HashScorer::new("c", Modality::Text, "content");
    let prosodic = HashScorer::new("p", Modality::Audio, "prosody");
    let adapters = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: Some(&EchoTranscriber),
    };
    let reqs = vec![ScoreRequest::audio("a", "/1"), ScoreRequest::audio("a", "/2")];
    assert_eq!(
        run_batch(&reqs, &adapters, &config(0.5, 0.5), &BatchOptions::default()),
        Err(PipelineError::DuplicateRequestId("a".into()))
    );
}

#[test]
fn decisions_do_not_depend_on_order_or_pool_size() {
    let content = HashScorer::new("c", Modality::Text, "content");
    let prosodic = HashScorer::new("p", Modality::Audio, "prosody");
    let adapters = Adapters {
        content: &content,
        prosodic: &prosodic,
        transcriber: Some(&EchoTranscriber),
    };
    let cfg = config(0.8, 0.8);
    let reqs = audio_requests(500);
    let mut reversed = reqs.clone();
    reversed.reverse();
    let baseline = run_batch(&reqs, &adapters, &cfg, &BatchOptions { workers: Some(1) }).unwrap();
    for workers in [2, 7, 32] {
        let run = run_batch(&reversed, &adapters, &cfg, &BatchOptions { workers: Some(workers) }).unwrap();
        assert_eq!(run.decisions, baseline.decisions);
    }
}

#[test]
fn score_request_json_shapes() {
    let r: ScoreRequest = serde_json::from_str(r#"{"id":"a","text":"hi"}"#).unwrap();
    assert_eq!(r, ScoreRequest::text("a", "hi"));
    let r: ScoreRequest = serde_json::from_str(r#"{"id":"b","audio_path":"/x","metadata":{"k":"v"}}"#).unwrap();
    assert_eq!(r.metadata["k"], "v");
    assert!(serde_json::from_str::<ScoreRequest>(r#"{"id":"c"}"#).is_err());
    assert!(serde_json::from_str::<ScoreRequest>(r#"{"id":"c","text":"x","audio_path":"/y"}"#).is_err());
    assert!(serde_json::from_str::<ScoreRequest>(r#"{"id":"","text":"x"}"#).is_err());
}
