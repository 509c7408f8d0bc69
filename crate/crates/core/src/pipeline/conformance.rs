//! Protocol conformance checks for scorer plugins.
//!
//! Checks run against raw stdio so that misbehaviour the regular host
//! tolerates (stray lines, wrong ids) is still reported.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;

use super::adapter::Modality;
use super::plugin::{shell_command, Handshake, WireReply, PROTOCOL_VERSION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConformanceReport {
    pub command: String,
    pub handshake: Option<Handshake>,
    pub checks: Vec<CheckResult>,
}

impl ConformanceReport {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }
}

struct RawPlugin {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<String>,
}

impl RawPlugin {
    fn spawn(command: &str) -> std::io::Result<Self> {
        let mut child = shell_command(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(RawPlugin { child, stdin, lines: rx })
    }

    fn send(&mut self, line: &str) -> std::io::Result<()> {
        let pipe = self.stdin.as_mut().ok_or_else(|| std::io::Error::other("stdin closed"))?;
        writeln!(pipe, "{line}")?;
        pipe.flush()
    }

    fn recv(&self, deadline: Instant) -> Result<String, String> {
        let left = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(left) {
            Ok(line) => Ok(line),
            Err(RecvTimeoutError::Timeout) => Err("timed out waiting for a line".into()),
            Err(RecvTimeoutError::Disconnected) => Err("plugin closed stdout".into()),
        }
    }

    fn replies(&self, count: usize, timeout: Duration) -> Result<Vec<WireReply>, String> {
        let deadline = Instant::now() + timeout;
        (0..count)
            .map(|_| {
                let line = self.recv(deadline)?;
                serde_json::from_str(&line).map_err(|e| format!("unparseable reply {line:?}: {e}"))
            })
            .collect()
    }
}

impl Drop for RawPlugin {
    fn drop(&mut self) {
        self.stdin.take();
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn request_line(modality: Modality, id: &str, i: usize) -> String {
    let value = match modality {
        Modality::Text => serde_json::json!({ "id": id, "text": format!("sample text {i}") }),
        Modality::Audio | Modality::Transcribe => {
            serde_json::json!({ "id": id, "audio_path": format!("/conformance/sample_{i}.wav") })
        }
    };
    value.to_string()
}

fn check_reply(modality: Modality, reply: &WireReply) -> Result<(), String> {
    if reply.error.is_some() {
        return Ok(());
    }
    match modality {
        Modality::Text | Modality::Audio => match reply.score {
            Some(s) if s.is_finite() && (0.0..=1.0).contains(&s) => Ok(()),
            Some(s) => Err(format!("score {s} outside [0, 1]")),
            None => Err("reply carries neither score nor error".into()),
        },
        Modality::Transcribe => reply
            .text
            .as_ref()
            .map(|_| ())
            .ok_or_else(|| "transcribe reply carries neither text nor error".into()),
    }
}

/// Multiset of replies keyed by id, for determinism comparisons.
fn reply_map(replies: &[WireReply]) -> BTreeMap<String, String> {
    replies
        .iter()
        .map(|r| (r.id.clone().unwrap_or_default(), serde_json::to_string(r).unwrap_or_default()))
        .collect()
}

/// Runs handshake, id-echo, score-range, pipelined (out-of-order tolerant)
/// exchange, malformed-line resilience and determinism checks.
pub fn run_conformance(command: &str, timeout: Duration) -> ConformanceReport {
    let mut report = ConformanceReport {
        command: command.to_string(),
        handshake: None,
        checks: Vec::new(),
    };
    let mut push = |name: &'static str, result: Result<String, String>| match result {
        Ok(detail) => report.checks.push(CheckResult { name, passed: true, detail }),
        Err(detail) => report.checks.push(CheckResult { name, passed: false, detail }),
    };

    let mut plugin = match RawPlugin::spawn(command) {
        Ok(p) => p,
        Err(e) => {
            push("handshake", Err(format!("spawn failed: {e}")));
            return report;
        }
    };
    let handshake = plugin
        .recv(Instant::now() + timeout)
        .and_then(|line| serde_json::from_str::<Handshake>(&line).map_err(|e| format!("{e}: {line}")))
        .and_then(|hs| {
            if hs.protocol == PROTOCOL_VERSION {
                Ok(hs)
            } else {
                Err(format!("protocol {:?}, expected {PROTOCOL_VERSION:?}", hs.protocol))
            }
        });
    let hs = match handshake {
        Ok(hs) => hs,
        Err(e) => {
            push("handshake", Err(e));
            return report;
        }
    };
    push("handshake", Ok(format!("{} ({}, concurrent={})", hs.name, hs.modality, hs.concurrent)));
    let modality = hs.modality;

    const BATCH: usize = 16;
    let ids: Vec<String> = (0..BATCH).map(|i| format!("conf-{i:02}")).collect();
    let exchange = |plugin: &mut RawPlugin| -> Result<Vec<WireReply>, String> {
        for (i, id) in ids.iter().enumerate() {
            plugin.send(&request_line(modality, id, i)).map_err(|e| e.to_string())?;
        }
        plugin.replies(BATCH, timeout)
    };
    let first = exchange(&mut plugin);
    match &first {
        Ok(replies) => {
            let mut got: Vec<String> = replies.iter().map(|r| r.id.clone().unwrap_or_default()).collect();
            got.sort();
            if got == ids {
                push("id_echo", Ok(format!("{BATCH} pipelined requests answered exactly once")));
            } else {
                push("id_echo", Err(format!("reply ids {got:?} do not match request ids")));
            }
            let bad: Vec<String> = replies
                .iter()
                .filter_map(|r| check_reply(modality, r).err().map(|e| format!("{:?}: {e}", r.id)))
                .collect();
            push(
                "score_range",
                if bad.is_empty() { Ok("all replies well-formed".into()) } else { Err(bad.join("; ")) },
            );
        }
        Err(e) => {
            push("id_echo", Err(e.clone()));
            push("score_range", Err("no replies".into()));
        }
    }

    let malformed = plugin
        .send("{this is not json")
        .map_err(|e| e.to_string())
        .and_then(|_| plugin.replies(1, timeout))
        .and_then(|r| match &r[0] {
            WireReply { id: None, error: Some(_), .. } => Ok(()),
            other => Err(format!("expected an error reply with null id, got {other:?}")),
        })
        .and_then(|_| {
            plugin
                .send(&request_line(modality, "after-malformed", 0))
                .map_err(|e| e.to_string())?;
            let r = plugin.replies(1, timeout)?;
            if r[0].id.as_deref() == Some("after-malformed") {
                Ok("error reply, then normal service".to_string())
            } else {
                Err(format!("unexpected reply after malformed line: {:?}", r[0]))
            }
        });
    push("malformed_line", malformed);
    drop(plugin);

    let determinism = match (first, RawPlugin::spawn(command)) {
        (Ok(first), Ok(mut again)) => again
            .recv(Instant::now() + timeout)
            .and_then(|_| exchange(&mut again))
            .and_then(|second| {
                if reply_map(&first) == reply_map(&second) {
                    Ok("identical replies across runs".to_string())
                } else {
                    Err("reply multisets differ across identical runs".to_string())
                }
            }),
        (Err(_), _) => Err("no baseline replies".into()),
        (_, Err(e)) => Err(format!("respawn failed: {e}")),
    };
    push("determinism", determinism);
    report.handshake = Some(hs);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_program_fails_handshake() {
        let report = run_conformance("exit 0", Duration::from_millis(500));
        assert!(!report.passed());
        assert_eq!(report.checks[0].name, "handshake");
    }

    #[test]
    fn plugin_ignoring_malformed_lines_fails() {
        let script = r#"echo '{"protocol":"scorer/1","name":"sh","modality":"text","concurrent":false}';
            while IFS= read -r line; do
              case "$line" in
                *'"id"'*) id=$(printf '%s' "$line" | sed -E 's/.*"id":"([^"]*)".*/\1/');
                          printf '{"id":"%s","score":0.5}\n' "$id" ;;
              esac
            done"#;
        let report = run_conformance(script, Duration::from_millis(500));
        let by_name: BTreeMap<_, _> = report.checks.iter().map(|c| (c.name, c.passed)).collect();
        assert!(by_name["handshake"]);
        assert!(by_name["id_echo"]);
        assert!(by_name["score_range"]);
        assert!(!by_name["malformed_line"]);
        assert!(!report.passed());
    }
}
