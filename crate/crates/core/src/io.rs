//! On-disk formats: datasets (JSONL or CSV), calibration configs, routing
//! decisions, score requests and efficacy reports.
//!
//! Readers report the 1-based line of the first offending record. Writers go
//! through [`write_atomic`], so a crash never leaves a half-written file.

use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pipeline::ScoreRequest;
use crate::types::{AlertCategory, CalibrationConfig, RoutingDecision, Score, ScoredResponse, TypeError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{origin}, line {line}: {message}")]
    Parse { origin: String, line: usize, message: String },
    #[error("{origin}, line {line}: {source}")]
    Invalid {
        origin: String,
        line: usize,
        #[source]
        source: TypeError,
    },
    #[error("{origin}, line {line}: duplicate id {id:?}")]
    DuplicateId { origin: String, line: usize, id: String },
    #[error("{origin}: {message}")]
    Format { origin: String, message: String },
}

impl IoError {
    fn io(path: &Path, source: io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn parse(origin: &str, line: usize, message: impl ToString) -> Self {
        IoError::Parse {
            origin: origin.to_string(),
            line,
            message: message.to_string(),
        }
    }
}

/// Ground-truth label as written in dataset files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Alert,
    Normal,
}

/// One dataset line. Unknown fields are rejected so typos surface early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub content_score: f64,
    pub prosodic_score: f64,
    #[serde(default)]
    pub label: Option<Label>,
    #[serde(default)]
    pub category: Option<String>,
}

impl DatasetRecord {
    pub fn from_response(r: &ScoredResponse) -> Self {
        DatasetRecord {
            id: r.id().to_string(),
            content_score: r.content_score().value(),
            prosodic_score: r.prosodic_score().value(),
            label: r.label().map(|a| if a { Label::Alert } else { Label::Normal }),
            category: r.category().map(|c| c.as_str().to_string()),
        }
    }

    pub fn into_response(self) -> Result<ScoredResponse, TypeError> {
        let field = |v: f64, field| {
            Score::new(v).map_err(|_| TypeError::ScoreOutOfRange {
                id: self.id.clone(),
                field,
            })
        };
        let content = field(self.content_score, "content_score")?;
        let prosodic = field(self.prosodic_score, "prosodic_score")?;
        let category = self.category.as_deref().map(str::parse::<AlertCategory>).transpose()?;
        let label = self.label.map(|l| l == Label::Alert);
        ScoredResponse::new(self.id, content, prosodic, label, category)
    }
}

/// Dataset file encodings, picked from the file extension by [`read_dataset`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

impl DatasetFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => DatasetFormat::Csv,
            _ => DatasetFormat::Jsonl,
        }
    }
}

struct IdSet {
    seen: HashSet<String>,
}

impl IdSet {
    fn new() -> Self {
        IdSet { seen: HashSet::new() }
    }

    fn insert(&mut self, origin: &str, line: usize, id: &str) -> Result<(), IoError> {
        if self.seen.insert(id.to_string()) {
            Ok(())
        } else {
            Err(IoError::DuplicateId {
                origin: origin.to_string(),
                line,
                id: id.to_string(),
            })
        }
    }
}

fn record_to_response(origin: &str, line: usize, record: DatasetRecord) -> Result<ScoredResponse, IoError> {
    record.into_response().map_err(|source| IoError::Invalid {
        origin: origin.to_string(),
        line,
        source,
    })
}

/// Yields `(line_number, text)` for every non-blank line.
fn jsonl_lines<'a, R: BufRead + 'a>(
    reader: R,
    origin: &'a str,
) -> impl Iterator<Item = Result<(usize, String), IoError>> + 'a {
    reader
        .lines()
        .enumerate()
        .map(move |(k, line)| match line {
            Ok(text) => Ok((k + 1, text)),
            Err(e) => Err(IoError::parse(origin, k + 1, e)),
        })
        .filter(|r| !matches!(r, Ok((_, text)) if text.trim().is_empty()))
}

/// Parses a JSONL dataset. `origin` names the source in error messages.
pub fn parse_dataset_jsonl<R: BufRead>(reader: R, origin: &str) -> Result<Vec<ScoredResponse>, IoError> {
    let mut ids = IdSet::new();
    let mut out = Vec::new();
    for item in jsonl_lines(reader, origin) {
        let (line, text) = item?;
        let record: DatasetRecord = serde_json::from_str(&text).map_err(|e| IoError::parse(origin, line, e))?;
        ids.insert(origin, line, &record.id)?;
        out.push(record_to_response(origin, line, record)?);
    }
    Ok(out)
}

/// Parses a CSV dataset with header `id,content_score,prosodic_score[,label[,category]]`.
/// Empty `label`/`category` cells mean absent. Line numbers count the header.
pub fn parse_dataset_csv<R: Read>(reader: R, origin: &str) -> Result<Vec<ScoredResponse>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut ids = IdSet::new();
    let mut out = Vec::new();
    for (k, row) in rdr.deserialize::<CsvRecord>().enumerate() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(k + 2, |p| p.line() as usize);
            IoError::parse(origin, line, e)
        })?;
        let line = k + 2;
        let record = row.into_record().map_err(|m| IoError::parse(origin, line, m))?;
        ids.insert(origin, line, &record.id)?;
        out.push(record_to_response(origin, line, record)?);
    }
    Ok(out)
}

#[derive(Deserialize)]
struct CsvRecord {
    id: String,
    content_score: f64,
    prosodic_score: f64,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    category: Option<String>,
}

impl CsvRecord {
    fn into_record(self) -> Result<DatasetRecord, String> {
        let label = match self.label.as_deref().unwrap_or("") {
            "" => None,
            "alert" => Some(Label::Alert),
            "normal" => Some(Label::Normal),
            other => return Err(format!("label must be \"alert\", \"normal\" or empty, got {other:?}")),
        };
        Ok(DatasetRecord {
            id: self.id,
            content_score: self.content_score,
            prosodic_score: self.prosodic_score,
            label,
            category: self.category.filter(|c| !c.is_empty()),
        })
    }
}

fn open(path: &Path) -> Result<BufReader<File>, IoError> {
    File::open(path).map(BufReader::new).map_err(|e| IoError::io(path, e))
}

/// Reads a dataset, choosing JSONL or CSV by extension.
pub fn read_dataset(path: &Path) -> Result<Vec<ScoredResponse>, IoError> {
    let origin = path.display().to_string();
    let reader = open(path)?;
    match DatasetFormat::from_path(path) {
        DatasetFormat::Jsonl => parse_dataset_jsonl(reader, &origin),
        DatasetFormat::Csv => parse_dataset_csv(reader, &origin),
    }
}

pub fn write_dataset_jsonl<W: Write>(mut w: W, responses: &[ScoredResponse]) -> io::Result<()> {
    for r in responses {
        serde_json::to_writer(&mut w, &DatasetRecord::from_response(r))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_dataset_csv<W: Write>(w: W, responses: &[ScoredResponse]) -> io::Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["id", "content_score", "prosodic_score", "label", "category"])?;
    for r in responses {
        let label = match r.label() {
            Some(true) => "alert",
            Some(false) => "normal",
            None => "",
        };
        wtr.write_record([
            r.id(),
            &r.content_score().value().to_string(),
            &r.prosodic_score().value().to_string(),
            label,
            r.category().map_or("", AlertCategory::as_str),
        ])?;
    }
    wtr.flush()
}

/// Writes a dataset in the format implied by the path's extension.
pub fn write_dataset(path: &Path, responses: &[ScoredResponse]) -> Result<(), IoError> {
    write_atomic(path, |w| match DatasetFormat::from_path(path) {
        DatasetFormat::Jsonl => write_dataset_jsonl(w, responses),
        DatasetFormat::Csv => write_dataset_csv(w, responses),
    })
}

/// Calibration config as persisted: the solved configuration plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub tool_version: String,
    /// RFC 3339 timestamp of the calibration run.
    pub created_at: String,
    /// False when the solver stopped without meeting its tolerance; the
    /// cutoffs are then the best iterate found.
    pub converged: bool,
    #[serde(flatten)]
    pub config: CalibrationConfig,
}

pub fn read_config(path: &Path) -> Result<ConfigFile, IoError> {
    let origin = path.display().to_string();
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| IoError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IoError::parse(&origin, e.line(), e))
}

pub fn write_config(path: &Path, config: &ConfigFile) -> Result<(), IoError> {
    write_json(path, config)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    write_atomic(path, |mut w| {
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")
    })
}

pub fn parse_decisions<R: BufRead>(reader: R, origin: &str) -> Result<Vec<RoutingDecision>, IoError> {
    parse_jsonl(reader, origin, |d: &RoutingDecision| d.id().to_string())
}

pub fn read_decisions(path: &Path) -> Result<Vec<RoutingDecision>, IoError> {
    parse_decisions(open(path)?, &path.display().to_string())
}

pub fn parse_requests<R: BufRead>(reader: R, origin: &str) -> Result<Vec<ScoreRequest>, IoError> {
    parse_jsonl(reader, origin, |r: &ScoreRequest| r.id.clone())
}

pub fn read_requests(path: &Path) -> Result<Vec<ScoreRequest>, IoError> {
    parse_requests(open(path)?, &path.display().to_string())
}

fn parse_jsonl<R, T, F>(reader: R, origin: &str, id: F) -> Result<Vec<T>, IoError>
where
    R: BufRead,
    T: for<'de> Deserialize<'de>,
    F: Fn(&T) -> String,
{
    let mut ids = IdSet::new();
    let mut out = Vec::new();
    for item in jsonl_lines(reader, origin) {
        let (line, text) = item?;
        let value: T = serde_json::from_str(&text).map_err(|e| IoError::parse(origin, line, e))?;
        ids.insert(origin, line, &id(&value))?;
        out.push(value);
    }
    Ok(out)
}

/// One compact JSON value per line.
pub fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T]) -> io::Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes through a temporary file in the destination directory and renames
/// it into place once `fill` succeeds.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), IoError>
where
    F: FnOnce(&mut BufWriter<&mut File>) -> io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| IoError::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        fill(&mut w).and_then(|()| w.flush()).map_err(|e| IoError::io(path, e))?;
    }
    tmp.as_file().sync_all().map_err(|e| IoError::io(path, e))?;
    tmp.persist(path).map_err(|e| IoError::io(path, e.error))?;
    Ok(())
}
