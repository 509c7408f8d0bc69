//! Host side of the newline-delimited JSON scorer protocol.
//!
//! ```text
//! plugin → host (first line)  {"protocol":"scorer/1","name":..,"modality":"text"|"audio"|"transcribe","concurrent":bool}
//! host → plugin               {"id":..,"text":..} | {"id":..,"audio_path":..}
//! plugin → host               {"id":..,"score":x} | {"id":..,"text":..} | {"id":..,"error":..}
//! ```
//!
//! Replies may arrive in any order; they are matched to requests by id.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, SyncSender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::adapter::{Modality, Payload, ScoreRequest, ScorerAdapter, ScorerError, Transcriber};
use crate::types::Score;

pub const PROTOCOL_VERSION: &str = "scorer/1";

#[derive(Debug, Error)]
pub enum PluginError {
    #[error("failed to launch plugin {command:?}: {source}")]
    Spawn {
        command: String,
        #[source]
        source: std::io::Error,
    },
    #[error("plugin {command:?} sent no handshake within {after:?}")]
    HandshakeTimeout { command: String, after: Duration },
    #[error("plugin {command:?} sent an invalid handshake: {message}")]
    BadHandshake { command: String, message: String },
    #[error("plugin {name} declares modality {got}, expected {expected}")]
    WrongModality {
        name: String,
        expected: String,
        got: Modality,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Handshake {
    pub protocol: String,
    pub name: String,
    pub modality: Modality,
    pub concurrent: bool,
}

/// Host → plugin line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireRequest {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audio_path: Option<String>,
}

impl From<&ScoreRequest> for WireRequest {
    fn from(r: &ScoreRequest) -> Self {
        match &r.payload {
            Payload::Text(t) => WireRequest {
                id: r.id.clone(),
                text: Some(t.clone()),
                audio_path: None,
            },
            Payload::Audio(a) => WireRequest {
                id: r.id.clone(),
                text: None,
                audio_path: Some(a.clone()),
            },
        }
    }
}

/// Plugin → host line after the handshake.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireReply {
    pub id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PluginOptions {
    /// Per-request deadline.
    pub timeout: Duration,
    pub handshake_timeout: Duration,
}

impl Default for PluginOptions {
    fn default() -> Self {
        PluginOptions {
            timeout: Duration::from_secs(30),
            handshake_timeout: Duration::from_secs(30),
        }
    }
}

type Pending = Arc<Mutex<HashMap<String, SyncSender<WireReply>>>>;

/// A running plugin process with replies demultiplexed by id.
pub struct PluginProcess {
    handshake: Handshake,
    command: String,
    child: Mutex<Child>,
    stdin: Mutex<Option<ChildStdin>>,
    pending: Pending,
    alive: Arc<AtomicBool>,
    timeout: Duration,
    reader: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for PluginProcess {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PluginProcess")
            .field("handshake", &self.handshake)
            .field("command", &self.command)
            .finish_non_exhaustive()
    }
}

/// Builds `sh -c <command>` with piped stdio; stderr is inherited.
pub fn shell_command(command: &str) -> Command {
    let mut cmd = Command::new("sh");
    cmd.arg("-c").arg(command);
    cmd
}

impl PluginProcess {
    pub fn spawn(command: &str, options: &PluginOptions) -> Result<Self, PluginError> {
        Self::spawn_command(shell_command(command), command, options)
    }

    pub fn spawn_command(mut cmd: Command, label: &str, options: &PluginOptions) -> Result<Self, PluginError> {
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| PluginError::Spawn {
                command: label.to_string(),
                source,
            })?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");

        let pending: Pending = Arc::default();
        let alive = Arc::new(AtomicBool::new(true));
        let (hs_tx, hs_rx) = mpsc::sync_channel::<Option<String>>(1);
        let reader = {
            let pending = Arc::clone(&pending);
            let alive = Arc::clone(&alive);
            let name = label.to_string();
            thread::spawn(move || read_replies(BufReader::new(stdout), hs_tx, pending, alive, name))
        };

        let mut process = PluginProcess {
            handshake: Handshake {
                protocol: String::new(),
                name: label.to_string(),
                modality: Modality::Text,
                concurrent: false,
            },
            command: label.to_string(),
            child: Mutex::new(child),
            stdin: Mutex::new(stdin),
            pending,
            alive,
            timeout: options.timeout,
            reader: Some(reader),
        };
        let line = match hs_rx.recv_timeout(options.handshake_timeout) {
            Ok(Some(line)) => line,
            Ok(None) | Err(RecvTimeoutError::Disconnected) => {
                return Err(PluginError::BadHandshake {
                    command: label.to_string(),
                    message: "plugin closed stdout before the handshake".into(),
                })
            }
            Err(RecvTimeoutError::Timeout) => {
                return Err(PluginError::HandshakeTimeout {
                    command: label.to_string(),
                    after: options.handshake_timeout,
                })
            }
        };
        process.handshake = parse_handshake(&line).map_err(|message| PluginError::BadHandshake {
            command: label.to_string(),
            message,
        })?;
        Ok(process)
    }

    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }

    pub fn is_alive(&self) -> bool {
        if !self.alive.load(Ordering::SeqCst) {
            return false;
        }
        let mut child = self.child.lock().unwrap_or_else(|e| e.into_inner());
        matches!(child.try_wait(), Ok(None))
    }

    fn unavailable(&self, message: impl Into<String>) -> ScorerError {
        ScorerError::Unavailable {
            adapter: self.handshake.name.clone(),
            message: message.into(),
        }
    }

    /// Sends one request and waits for the reply carrying its id.
    pub fn call(&self, request: &WireRequest) -> Result<WireReply, ScorerError> {
        let (tx, rx): (SyncSender<WireReply>, Receiver<WireReply>) = mpsc::sync_channel(1);
        {
            let mut pending = self.pending.lock().unwrap_or_else(|e| e.into_inner());
            if pending.contains_key(&request.id) {
                return Err(ScorerError::Protocol {
                    adapter: self.handshake.name.clone(),
                    message: format!("request id {:?} is already in flight", request.id),
                });
            }
            pending.insert(request.id.clone(), tx);
        }
        let line = serde_json::to_string(request).expect("wire request serializes");
        let sent = {
            let mut stdin = self.stdin.lock().unwrap_or_else(|e| e.into_inner());
            match stdin.as_mut() {
                Some(pipe) => writeln!(pipe, "{line}").and_then(|_| pipe.flush()),
                None => Err(std::io::Error::other("stdin closed")),
            }
        };
        if let Err(e) = sent {
            self.forget(&request.id);
            return Err(self.unavailable(format!("write failed: {e}")));
        }
        match rx.recv_timeout(self.timeout) {
            Ok(reply) => Ok(reply),
            Err(RecvTimeoutError::Timeout) => {
                self.forget(&request.id);
                Err(ScorerError::Timeout {
                    adapter: self.handshake.name.clone(),
                    after: self.timeout,
                })
            }
            Err(RecvTimeoutError::Disconnected) => Err(self.unavailable("plugin exited before replying")),
        }
    }

    fn forget(&self, id: &str) {
        self.pending.lock().unwrap_or_else(|e| e.into_inner()).remove(id);
    }

    fn health(&self) -> Result<(), ScorerError> {
        if self.is_alive() {
            Ok(())
        } else {
            Err(self.unavailable("plugin process is not running"))
        }
    }
}

impl Drop for PluginProcess {
    fn drop(&mut self) {
        // Closing stdin is the plugin's end-of-input signal.
        self.stdin.lock().unwrap_or_else(|e| e.into_inner()).take();
        let mut child = self.child.lock().unwrap_or_else(|e| e.into_inner());
        for _ in 0..50 {
            if matches!(child.try_wait(), Ok(Some(_))) {
                break;
            }
            thread::sleep(Duration::from_millis(10));
        }
        if matches!(child.try_wait(), Ok(None)) {
            let _ = child.kill();
            let _ = child.wait();
        }
        // The reader ends on EOF; it is not joined because grandchildren may
        // still hold the pipe open.
        self.reader.take();
    }
}

fn parse_handshake(line: &str) -> Result<Handshake, String> {
    let hs: Handshake = serde_json::from_str(line).map_err(|e| format!("{e}: {line}"))?;
    if hs.protocol != PROTOCOL_VERSION {
        return Err(format!("unsupported protocol {:?}", hs.protocol));
    }
    Ok(hs)
}

fn read_replies(
    stdout: impl BufRead,
    handshake: SyncSender<Option<String>>,
    pending: Pending,
    alive: Arc<AtomicBool>,
    name: String,
) {
    let mut lines = stdout.lines();
    let first = lines.next().and_then(Result::ok);
    let _ = handshake.send(first.clone());
    if first.is_some() {
        for line in lines {
            let Ok(line) = line else { break };
            if line.trim().is_empty() {
                continue;
            }
            let reply: WireReply = match serde_json::from_str(&line) {
                Ok(r) => r,
                Err(e) => {
                    log::warn!("{name}: unparseable reply ({e}): {line}");
                    continue;
                }
            };
            let Some(id) = reply.id.clone() else {
                log::warn!("{name}: reply without id: {line}");
                continue;
            };
            let waiter = pending.lock().unwrap_or_else(|e| e.into_inner()).remove(&id);
            match waiter {
                Some(tx) => {
                    let _ = tx.send(reply);
                }
                None => log::warn!("{name}: reply for unknown or expired id {id:?}"),
            }
        }
    }
    alive.store(false, Ordering::SeqCst);
    // Dropping the senders wakes every waiter with a disconnect.
    pending.lock().unwrap_or_else(|e| e.into_inner()).clear();
}

/// Scorer adapter backed by a `text` or `audio` plugin.
#[derive(Debug)]
pub struct PluginScorer {
    process: PluginProcess,
}

impl PluginScorer {
    pub fn spawn(command: &str, expected: Modality, options: &PluginOptions) -> Result<Self, PluginError> {
        Self::new(PluginProcess::spawn(command, options)?, expected)
    }

    pub fn new(process: PluginProcess, expected: Modality) -> Result<Self, PluginError> {
        let hs = process.handshake();
        if hs.modality != expected || expected == Modality::Transcribe {
            return Err(PluginError::WrongModality {
                name: hs.name.clone(),
                expected: expected.to_string(),
                got: hs.modality,
            });
        }
        Ok(PluginScorer { process })
    }
}

impl ScorerAdapter for PluginScorer {
    fn name(&self) -> &str {
        &self.process.handshake.name
    }

    fn modality(&self) -> Modality {
        self.process.handshake.modality
    }

    fn concurrent(&self) -> bool {
        self.process.handshake.concurrent
    }

    fn health_check(&self) -> Result<(), ScorerError> {
        self.process.health()
    }

    fn score(&self, request: &ScoreRequest) -> Result<Score, ScorerError> {
        if request.modality() != self.modality() {
            return Err(ScorerError::ModalityMismatch {
                adapter: self.name().to_string(),
                expected: self.modality(),
                got: request.modality(),
            });
        }
        let reply = self.process.call(&WireRequest::from(request))?;
        let protocol = |message: String| ScorerError::Protocol {
            adapter: self.name().to_string(),
            message,
        };
        match reply {
            WireReply { error: Some(message), .. } => Err(ScorerError::Reported {
                adapter: self.name().to_string(),
                message,
            }),
            WireReply { score: Some(v), .. } => {
                Score::new(v).map_err(|_| protocol(format!("score {v} for {:?} is outside [0, 1]", request.id)))
            }
            _ => Err(protocol(format!("reply for {:?} carries no score", request.id))),
        }
    }
}

/// Transcriber backed by a `transcribe` plugin.
#[derive(Debug)]
pub struct PluginTranscriber {
    process: PluginProcess,
}

impl PluginTranscriber {
    pub fn spawn(command: &str, options: &PluginOptions) -> Result<Self, PluginError> {
        Self::new(PluginProcess::spawn(command, options)?)
    }

    pub fn new(process: PluginProcess) -> Result<Self, PluginError> {
        let hs = process.handshake();
        if hs.modality != Modality::Transcribe {
            return Err(PluginError::WrongModality {
                name: hs.name.clone(),
                expected: Modality::Transcribe.to_string(),
                got: hs.modality,
            });
        }
        Ok(PluginTranscriber { process })
    }
}

impl Transcriber for PluginTranscriber {
    fn name(&self) -> &str {
        &self.process.handshake.name
    }

    fn concurrent(&self) -> bool {
        self.process.handshake.concurrent
    }

    fn health_check(&self) -> Result<(), ScorerError> {
        self.process.health()
    }

    fn transcribe(&self, request: &ScoreRequest) -> Result<String, ScorerError> {
        let reply = self.process.call(&WireRequest::from(request))?;
        match reply {
            WireReply { error: Some(message), .. } => Err(ScorerError::Reported {
                adapter: self.name().to_string(),
                message,
            }),
            WireReply { text: Some(text), .. } => Ok(text),
            _ => Err(ScorerError::Protocol {
                adapter: self.name().to_string(),
                message: format!("reply for {:?} carries no text", request.id),
            }),
        }
    }
}
