use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::time::Duration;

use alertroute_core::io::{read_config, write_atomic, write_jsonl, DatasetRecord};
use alertroute_core::pipeline::plugin::{PluginOptions, PluginScorer, PluginTranscriber};
use alertroute_core::pipeline::{
    classify, run_batch, Adapters, BatchOptions, Modality, ScoreRequest, ScorerAdapter, Stage, Transcriber,
};
use alertroute_core::{CalibrationConfig, RoutingDecision};
use serde::{Deserialize, Serialize};

use crate::{CliError, ENV_CONTENT_PLUGIN, ENV_PROSODIC_PLUGIN, ENV_TRANSCRIBER_PLUGIN};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// JSONL input: dataset lines with precomputed scores, or score requests
    /// ({"id", "text"} or {"id", "audio_path"}).
    input: PathBuf,
    /// Calibration config written by `alertroute calibrate`.
    #[arg(long)]
    config: PathBuf,
    /// Decisions output (JSONL, one line per routed input line).
    #[arg(long)]
    out: PathBuf,
    /// Per-item failures (JSONL); defaults to `<out stem>.failures.jsonl`.
    #[arg(long)]
    failures: Option<PathBuf>,
    /// Content scorer plugin command (text modality).
    #[arg(long, env = ENV_CONTENT_PLUGIN)]
    content_plugin: Option<String>,
    /// Prosodic scorer plugin command (audio modality).
    #[arg(long, env = ENV_PROSODIC_PLUGIN)]
    prosodic_plugin: Option<String>,
    /// Transcriber plugin command, needed for audio requests.
    #[arg(long, env = ENV_TRANSCRIBER_PLUGIN)]
    transcriber_plugin: Option<String>,
    /// Worker pool bound; defaults to the available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Per-request plugin timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    plugin_timeout: f64,
}

/// One line of the failures sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    /// 1-based input line.
    pub line: usize,
    pub id: Option<String>,
    /// `input`, `transcription`, `content` or `prosody`.
    pub stage: String,
    pub error: String,
    /// True when the item still got a prosody-only decision.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub partial: bool,
}

enum Item {
    Decided(RoutingDecision),
    Pending(ScoreRequest),
}

struct Parsed {
    items: Vec<(usize, Item)>,
    sidecar: Vec<SidecarEntry>,
}

fn input_error(line: usize, id: Option<String>, error: impl ToString) -> SidecarEntry {
    SidecarEntry {
        line,
        id,
        stage: "input".into(),
        error: error.to_string(),
        partial: false,
    }
}

fn parse_line(line: usize, text: &str, config: &CalibrationConfig) -> Result<Item, SidecarEntry> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| input_error(line, None, e))?;
    let id = value.get("id").and_then(|v| v.as_str()).map(str::to_string);
    let has_scores = value.get("content_score").is_some() || value.get("prosodic_score").is_some();
    if has_scores {
        let record: DatasetRecord = serde_json::from_value(value).map_err(|e| input_error(line, id.clone(), e))?;
        let response = record.into_response().map_err(|e| input_error(line, id.clone(), e))?;
        Ok(Item::Decided(classify(
            response.id(),
            response.content_score(),
            response.prosodic_score(),
            config,
        )))
    } else {
        let request: ScoreRequest = serde_json::from_value(value).map_err(|e| input_error(line, id.clone(), e))?;
        Ok(Item::Pending(request))
    }
}

fn parse_input(path: &Path, config: &CalibrationConfig) -> Result<Parsed, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let mut parsed = Parsed {
        items: Vec::new(),
        sidecar: Vec::new(),
    };
    let mut seen = HashSet::new();
    for (k, text) in BufReader::new(file).lines().enumerate() {
        let line = k + 1;
        let text = text.map_err(|e| CliError::Data(format!("{}, line {line}: {e}", path.display())))?;
        if text.trim().is_empty() {
            continue;
        }
        match parse_line(line, &text, config) {
            Ok(item) => {
                let id = match &item {
                    Item::Decided(d) => d.id().to_string(),
                    Item::Pending(r) => r.id.clone(),
                };
                if seen.insert(id.clone()) {
                    parsed.items.push((line, item));
                } else {
                    parsed.sidecar.push(input_error(line, Some(id.clone()), format!("duplicate id {id:?}")));
                }
            }
            Err(entry) => parsed.sidecar.push(entry),
        }
    }
    Ok(parsed)
}

fn plugin_options(timeout_secs: f64) -> Result<PluginOptions, CliError> {
    if !(timeout_secs > 0.0 && timeout_secs.is_finite()) {
        return Err(CliError::Usage(format!("--plugin-timeout {timeout_secs} must be positive")));
    }
    Ok(PluginOptions {
        timeout: Duration::from_secs_f64(timeout_secs),
        ..PluginOptions::default()
    })
}

fn required<'a>(command: &'a Option<String>, flag: &str, env: &str) -> Result<&'a str, CliError> {
    command.as_deref().ok_or_else(|| {
        CliError::Plugin(format!("input contains score requests but no {flag} was given (or set {env})"))
    })
}

fn stage_name(stage: Stage) -> String {
    match stage {
        Stage::Transcription => "transcription",
        Stage::Content => "content",
        Stage::Prosody => "prosody",
    }
    .to_string()
}

/// Scores pending requests through plugins and folds the outcomes back into
/// `decided` / `sidecar`, keyed by input line.
fn score_requests(
    args: &Args,
    config: &CalibrationConfig,
    requests: Vec<(usize, ScoreRequest)>,
    decided: &mut Vec<(usize, RoutingDecision)>,
    sidecar: &mut Vec<SidecarEntry>,
) -> Result<(), CliError> {
    let options = plugin_options(args.plugin_timeout)?;
    let content_cmd = required(&args.content_plugin, "--content-plugin", ENV_CONTENT_PLUGIN)?;
    let prosodic_cmd = required(&args.prosodic_plugin, "--prosodic-plugin", ENV_PROSODIC_PLUGIN)?;
    let needs_transcriber = requests.iter().any(|(_, r)| r.modality() == Modality::Audio);
    let plugin_err = |e: alertroute_core::pipeline::plugin::PluginError| CliError::Plugin(e.to_string());

    let content = PluginScorer::spawn(content_cmd, Modality::Text, &options).map_err(plugin_err)?;
    let prosodic = PluginScorer::spawn(prosodic_cmd, Modality::Audio, &options).map_err(plugin_err)?;
    let transcriber = match (&args.transcriber_plugin, needs_transcriber) {
        (Some(cmd), _) => Some(PluginTranscriber::spawn(cmd, &options).map_err(plugin_err)?),
        (None, true) => {
            return Err(CliError::Plugin(format!(
                "input contains audio requests but no --transcriber-plugin was given (or set {ENV_TRANSCRIBER_PLUGIN})"
            )))
        }
        (None, false) => None,
    };
    let adapters = Adapters {
        content: &content as &dyn ScorerAdapter,
        prosodic: &prosodic as &dyn ScorerAdapter,
        transcriber: transcriber.as_ref().map(|t| t as &dyn Transcriber),
    };
    let lines: HashMap<String, usize> = requests.iter().map(|(line, r)| (r.id.clone(), *line)).collect();
    let requests: Vec<ScoreRequest> = requests.into_iter().map(|(_, r)| r).collect();
    let run = run_batch(&requests, &adapters, config, &BatchOptions { workers: args.workers })
        .map_err(|e| CliError::Plugin(e.to_string()))?;

    log::info!(
        "scored {} requests: content {:?}, prosody {:?}",
        requests.len(),
        run.timings.content,
        run.timings.prosody
    );
    decided.extend(run.decisions.into_iter().map(|d| (lines[d.id()], d)));
    sidecar.extend(run.failures.into_iter().map(|f| SidecarEntry {
        line: lines[&f.id],
        id: Some(f.id),
        stage: stage_name(f.stage),
        error: f.error,
        partial: false,
    }));
    sidecar.extend(run.partial.into_iter().map(|p| SidecarEntry {
        line: lines[&p.id],
        id: Some(p.id),
        stage: stage_name(p.stage),
        error: p.error,
        partial: true,
    }));
    Ok(())
}

pub fn run(args: Args) -> Result<(), CliError> {
    let config_file = read_config(&args.config)?;
    if !config_file.converged {
        log::warn!(
            "{} holds a non-converged calibration (residual {:+.3e})",
            args.config.display(),
            config_file.config.residual()
        );
    }
    let config = config_file.config;
    let Parsed { items, mut sidecar } = parse_input(&args.input, &config)?;

    let mut decided = Vec::with_capacity(items.len());
    let mut pending = Vec::new();
    for (line, item) in items {
        match item {
            Item::Decided(d) => decided.push((line, d)),
            Item::Pending(r) => pending.push((line, r)),
        }
    }
    if !pending.is_empty() {
        score_requests(&args, &config, pending, &mut decided, &mut sidecar)?;
    }
    decided.sort_by_key(|(line, _)| *line);
    sidecar.sort_by_key(|e| e.line);

    let decisions: Vec<RoutingDecision> = decided.into_iter().map(|(_, d)| d).collect();
    let failures_path = args.failures.clone().unwrap_or_else(|| crate::default_out(&args.out, "failures.jsonl"));
    write_atomic(&args.out, |w| write_jsonl(w, &decisions))?;
    write_atomic(&failures_path, |w| write_jsonl(w, &sidecar))?;

    let flagged = decisions.iter().filter(|d| d.flagged()).count();
    let failed = sidecar.iter().filter(|e| !e.partial).count();
    let partial = sidecar.len() - failed;
    println!("routed {} (flagged {flagged}, partial {partial}), failed {failed}", decisions.len());
    if !sidecar.is_empty() {
        println!("failures written to {}", failures_path.display());
    }
    Ok(())
}
