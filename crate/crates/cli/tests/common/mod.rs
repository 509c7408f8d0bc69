#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub const BIN: &str = env!("CARGO_BIN_EXE_alertroute");
pub const MOCK: &str = env!("CARGO_BIN_EXE_alertroute-mock-plugin");

pub fn alertroute<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(BIN)
        .args(args)
        .env_remove("ALERTROUTE_CONTENT_PLUGIN")
        .env_remove("ALERTROUTE_PROSODIC_PLUGIN")
        .env_remove("ALERTROUTE_TRANSCRIBER_PLUGIN")
        .env_remove("RUST_LOG")
        .output()
        .expect("alertroute runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn mock(args: &str) -> String {
    format!("{MOCK} {args}")
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

/// Writes a config file with hand-picked cutoffs.
pub fn write_config(dir: &Path, content: f64, prosodic: f64) -> PathBuf {
    let path = dir.join("fixture-config.json");
    let text = format!(
        r#"{{"tool_version":"test","created_at":"2026-01-01T00:00:00Z","converged":true,
            "target_percent":1.0,"solved_percent":0.5,"content_cutoff":{content},"prosodic_cutoff":{prosodic},
            "achieved_union_rate":0.01,"solver_iterations":1,"dataset_fingerprint":"fixture"}}"#
    );
    std::fs::write(&path, text).unwrap();
    path
}

pub fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect()
}
