//! Deterministic scorer plugin speaking the `scorer/1` wire protocol.
//!
//! Scores are `HashScorer::score_for(salt, id)`, so tests can predict them
//! without running the plugin. Transcribers echo the request id as text.
//! Fault hooks make selected ids fail, hang or return out-of-range scores.

use std::collections::HashSet;
use std::io::{self, BufRead, Write};
use std::sync::{Arc, Mutex};
use std::thread;

use alertroute_core::pipeline::mock::HashScorer;
use alertroute_core::pipeline::plugin::{Handshake, WireReply, WireRequest, PROTOCOL_VERSION};
use alertroute_core::pipeline::Modality;
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Text,
    Audio,
    Transcribe,
}

#[derive(Debug, Parser)]
#[command(name = "alertroute-mock-plugin", about = "Deterministic test plugin for the scorer/1 protocol")]
struct Args {
    #[arg(long, value_enum)]
    modality: Kind,
    /// Hash salt; defaults to the modality name.
    #[arg(long)]
    salt: Option<String>,
    #[arg(long, default_value = "mock")]
    name: String,
    /// Declare concurrency and answer each request on its own thread.
    #[arg(long)]
    concurrent: bool,
    /// Reply with an error for this id (repeatable).
    #[arg(long)]
    fail_on: Vec<String>,
    /// Never reply to this id (repeatable).
    #[arg(long)]
    hang_on: Vec<String>,
    /// Reply with an out-of-range score for this id (repeatable).
    #[arg(long)]
    bad_score_on: Vec<String>,
    /// Exit immediately after the handshake.
    #[arg(long)]
    exit_after_handshake: bool,
}

struct Behaviour {
    modality: Kind,
    salt: String,
    fail: HashSet<String>,
    hang: HashSet<String>,
    bad: HashSet<String>,
}

impl Behaviour {
    fn reply(&self, line: &str) -> Option<WireReply> {
        let request: WireRequest = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                return Some(WireReply {
                    id: None,
                    score: None,
                    text: None,
                    error: Some(format!("malformed request: {e}")),
                })
            }
        };
        let id = request.id.clone();
        let mut reply = WireReply {
            id: Some(id.clone()),
            score: None,
            text: None,
            error: None,
        };
        if self.hang.contains(&id) {
            return None;
        }
        let payload_ok = match self.modality {
            Kind::Text => request.text.is_some(),
            Kind::Audio | Kind::Transcribe => request.audio_path.is_some(),
        };
        if self.fail.contains(&id) {
            reply.error = Some(format!("injected failure for {id}"));
        } else if !payload_ok {
            reply.error = Some("request payload does not match the declared modality".into());
        } else if self.bad.contains(&id) {
            reply.score = Some(1.5);
        } else {
            match self.modality {
                Kind::Transcribe => reply.text = Some(id.clone()),
                Kind::Text | Kind::Audio => reply.score = Some(HashScorer::score_for(&self.salt, &id).value()),
            }
        }
        Some(reply)
    }
}

fn emit(out: &Mutex<io::Stdout>, value: &impl serde::Serialize) -> io::Result<()> {
    let line = serde_json::to_string(value).map_err(io::Error::other)?;
    let mut out = out.lock().expect("stdout lock");
    writeln!(out, "{line}")?;
    out.flush()
}

fn main() -> io::Result<()> {
    let args = Args::parse();
    let (modality, default_salt) = match args.modality {
        Kind::Text => (Modality::Text, "text"),
        Kind::Audio => (Modality::Audio, "audio"),
        Kind::Transcribe => (Modality::Transcribe, "transcribe"),
    };
    let behaviour = Arc::new(Behaviour {
        modality: args.modality,
        salt: args.salt.unwrap_or_else(|| default_salt.to_string()),
        fail: args.fail_on.into_iter().collect(),
        hang: args.hang_on.into_iter().collect(),
        bad: args.bad_score_on.into_iter().collect(),
    });
    let out = Arc::new(Mutex::new(io::stdout()));
    emit(
        &out,
        &Handshake {
            protocol: PROTOCOL_VERSION.to_string(),
            name: args.name,
            modality,
            concurrent: args.concurrent,
        },
    )?;
    if args.exit_after_handshake {
        return Ok(());
    }
    let mut workers = Vec::new();
    for line in io::stdin().lock().lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        if args.concurrent {
            let (behaviour, out) = (Arc::clone(&behaviour), Arc::clone(&out));
            workers.push(thread::spawn(move || match behaviour.reply(&line) {
                Some(reply) => emit(&out, &reply),
                None => Ok(()),
            }));
        } else if let Some(reply) = behaviour.reply(&line) {
            emit(&out, &reply)?;
        }
    }
    for w in workers {
        w.join().expect("reply thread panicked")?;
    }
    Ok(())
}
