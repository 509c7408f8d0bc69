use alertroute_core::io::{
    parse_dataset_csv, parse_dataset_jsonl, read_config, read_dataset, read_decisions, write_config, write_dataset,
    write_dataset_csv, write_dataset_jsonl, write_jsonl, ConfigFile, IoError,
};
use alertroute_core::{
    AlertCategory, CalibrationConfig, DatasetFingerprint, RoutingBudget, RoutingDecision, Score, ScoredResponse,
};
use proptest::prelude::*;

fn response() -> impl Strategy<Value = ScoredResponse> {
    (
        0.0f64..=1.0,
        0.0f64..=1.0,
        prop_oneof![Just(None), Just(Some(false)), Just(Some(true))],
        0usize..6,
    )
        .prop_map(|(c, p, label, cat)| {
            let category = (label == Some(true) && cat < 5).then(|| AlertCategory::ALL[cat]);
            ScoredResponse::new("x", Score::new(c).unwrap(), Score::new(p).unwrap(), label, category).unwrap()
        })
}

fn dataset() -> impl Strategy<Value = Vec<ScoredResponse>> {
    prop::collection::vec(response(), 0..40).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(k, r)| {
                ScoredResponse::new(
                    format!("id,\"{k}\""),
                    r.content_score(),
                    r.prosodic_score(),
                    r.label(),
                    r.category(),
                )
                .unwrap()
            })
            .collect()
    })
}

fn config(target: f64, solved: f64, c: f64, p: f64) -> CalibrationConfig {
    CalibrationConfig {
        target_percent: RoutingBudget::new(target).unwrap(),
        solved_percent: solved,
        content_cutoff: Score::new(c).unwrap(),
        prosodic_cutoff: Score::new(p).unwrap(),
        achieved_union_rate: target / 100.0,
        solver_iterations: 7,
        dataset_fingerprint: DatasetFingerprint::from_hex("ab12"),
    }
}

proptest! {
    #[test]
    fn dataset_jsonl_round_trip(rows in dataset()) {
        let mut buf = Vec::new();
        write_dataset_jsonl(&mut buf, &rows).unwrap();
        prop_assert_eq!(parse_dataset_jsonl(buf.as_slice(), "mem").unwrap(), rows);
    }

    #[test]
    fn dataset_csv_round_trip(rows in dataset()) {
        let mut buf = Vec::new();
        write_dataset_csv(&mut buf, &rows).unwrap();
        prop_assert_eq!(parse_dataset_csv(buf.as_slice(), "mem").unwrap(), rows);
    }

    #[test]
    fn config_round_trip(
        target in 0.01f64..99.0,
        frac in 0.0f64..=1.0,
        c in 0.0f64..=1.0,
        p in 0.0f64..=1.0,
        converged: bool,
    ) {
        let file = ConfigFile {
            tool_version: "0.1.0".into(),
            created_at: "2026-01-01T00:00:00Z".into(),
            converged,
            config: config(target, target * frac, c, p),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        write_config(&path, &file).unwrap();
        prop_assert_eq!(read_config(&path).unwrap(), file);
    }

    #[test]
    fn decision_round_trip(flags in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 0..30)) {
        let decisions: Vec<RoutingDecision> = flags
            .iter()
            .enumerate()
            .map(|(k, &(c, p, partial))| {
                if partial {
                    RoutingDecision::prosody_only(format!("r{k}"), p)
                } else {
                    RoutingDecision::new(format!("r{k}"), c, p)
                }
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.jsonl");
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &decisions).unwrap();
        std::fs::write(&path, buf).unwrap();
        prop_assert_eq!(read_decisions(&path).unwrap(), decisions);
    }
}

#[test]
fn files_choose_format_by_extension() {
    let rows = vec![
        ScoredResponse::new("a", Score::new(0.25).unwrap(), Score::ONE, Some(true), None).unwrap(),
        ScoredResponse::unlabeled("b", Score::ZERO, Score::new(0.5).unwrap()).unwrap(),
    ];
    let dir = tempfile::tempdir().unwrap();
    for name in ["d.jsonl", "d.csv", "d.CSV"] {
        let path = dir.path().join(name);
        write_dataset(&path, &rows).unwrap();
        assert_eq!(read_dataset(&path).unwrap(), rows, "{name}");
    }
    let csv = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(csv.starts_with("id,content_score,prosodic_score,label,category"));
}

#[test]
fn config_file_is_flat_json() {
    let file = ConfigFile {
        tool_version: "0.1.0".into(),
        created_at: "2026-01-01T00:00:00Z".into(),
        converged: true,
        config: config(1.0, 0.6, 0.9, 0.8),
    };
    let value = serde_json::to_value(&file).unwrap();
    for key in ["tool_version", "converged", "target_percent", "content_cutoff", "dataset_fingerprint"] {
        assert!(value.get(key).is_some(), "missing {key}");
    }
    assert!(value.get("config").is_none());
}

#[test]
fn missing_file_reports_path() {
    let err = read_dataset(std::path::Path::new("/nonexistent/data.jsonl")).unwrap_err();
    assert!(matches!(err, IoError::Io { .. }));
    assert!(err.to_string().contains("/nonexistent/data.jsonl"));
}

#[test]
fn decisions_with_inconsistent_flag_are_rejected() {
    let line = r#"{"id":"a","by_content":true,"by_prosody":false,"flagged":false}"#;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.jsonl");
    std::fs::write(&path, format!("{line}\n")).unwrap();
    assert!(matches!(read_decisions(&path), Err(IoError::Parse { line: 1, .. })));
}
