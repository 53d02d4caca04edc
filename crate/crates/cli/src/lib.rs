//! Command-line driver: exact tables, simulations, twirl checks, sweeps and
//! classical tests, each run leaving its outputs and a manifest in one
//! directory.

pub mod commands;
pub mod config;
pub mod format;
pub mod manifest;

use std::fmt;
use std::path::Path;

use chrono::{SecondsFormat, Utc};

use commands::{Output, Status};
use config::{resolve, Layers};
use manifest::{RunManifest, MANIFEST_FILE};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 2.
    Invalid(String),
    /// Runtime failure; exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid input: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<entbench_core::Error> for CliError {
    fn from(e: entbench_core::Error) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(e.to_string())
    }
}

pub const COMMANDS: [&str; 5] = ["exact", "simulate", "twirl-verify", "sweep", "classical"];

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Runs `command`, writes its files and the manifest, and returns the
/// manifest and status.
pub fn execute(command: &str, layers: &Layers) -> Result<(RunManifest, Output), CliError> {
    let started_at = now();
    let cfg = resolve(command, layers)?;
    let out = match command {
        "exact" => commands::exact(&cfg)?,
        "simulate" => commands::simulate(&cfg)?,
        "twirl-verify" => commands::twirl_verify(&cfg)?,
        "sweep" => commands::sweep(&cfg)?,
        "classical" => commands::classical(&cfg)?,
        other => return Err(CliError::Invalid(format!("unknown command `{other}`"))),
    };
    let dir = Path::new(&cfg.out_dir);
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &out.files {
        std::fs::write(dir.join(name), bytes)?;
    }
    let manifest = RunManifest {
        command: command.to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        started_at,
        finished_at: now(),
        outputs: out.files.iter().map(|(n, _)| n.clone()).collect(),
        notes: out.notes.clone(),
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Failed(e.to_string()))?;
    bytes.push(b'\n');
    std::fs::write(dir.join(MANIFEST_FILE), bytes)?;
    Ok((manifest, out))
}

/// Exit code for a finished run.
pub fn status_code(status: Status) -> i32 {
    match status {
        Status::Done | Status::Pass => 0,
        Status::Fail | Status::Inconclusive => 1,
    }
}
