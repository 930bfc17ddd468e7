//! Append-only prediction log with restart-safe dedup state.
//!
//! One JSON object per line, written in input order. A lock file enforces
//! a single writer; a state sidecar remembers which episodes were already
//! scored and the content hash of the last processed input, so reruns on
//! unchanged inputs append nothing. Row problems go to an errors sidecar
//! and never abort the batch.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::errors::{CliError, CliResult};

/// One scored admission, as appended to the log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionLogEntry {
    /// UTC, RFC 3339; monotone non-decreasing within one run.
    pub timestamp: String,
    pub patient_id: String,
    pub episode_id: String,
    pub score: f64,
    /// 1 iff score >= threshold.
    pub label: u8,
    pub threshold: f64,
    pub model_kind: String,
    pub model_format_version: u32,
    /// Bundle checksum prefix.
    pub model_fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorLogEntry {
    pub timestamp: String,
    pub row: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct ScoreState {
    seen_episodes: Vec<String>,
    last_input_sha256: Option<String>,
}

/// Exclusive writer over a prediction log and its sidecars.
pub struct ScoreLog {
    log_path: PathBuf,
    state_path: PathBuf,
    errors_path: PathBuf,
    lock_path: PathBuf,
    state: ScoreState,
    seen: HashSet<String>,
    last_timestamp: Option<DateTime<Utc>>,
}

impl ScoreLog {
    /// Acquire the lock and load prior state.
    pub fn open(log_path: &Path) -> CliResult<ScoreLog> {
        let lock_path = sibling(log_path, "lock");
        match OpenOptions::new().write(true).create_new(true).open(&lock_path) {
            Ok(mut lock) => {
                let _ = write!(lock, "{}", std::process::id());
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                return Err(CliError::Usage(format!(
                    "another writer holds {}; remove the lock file if it is stale",
                    lock_path.display()
                )));
            }
            Err(e) => return Err(CliError::internal("cannot create lock file", e)),
        }

        let state_path = sibling(log_path, "state.json");
        let state: ScoreState = match std::fs::read_to_string(&state_path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| CliError::internal("state sidecar is corrupt", e))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => ScoreState::default(),
            Err(e) => return Err(CliError::internal("cannot read state sidecar", e)),
        };
        let seen = state.seen_episodes.iter().cloned().collect();

        Ok(ScoreLog {
            log_path: log_path.to_path_buf(),
            state_path,
            errors_path: sibling(log_path, "errors"),
            lock_path,
            state,
            seen,
            last_timestamp: None,
        })
    }

    /// True when the given input hash matches the last fully processed one.
    pub fn input_unchanged(&self, input_sha256: &str) -> bool {
        self.state.last_input_sha256.as_deref() == Some(input_sha256)
    }

    pub fn already_scored(&self, episode_id: &str) -> bool {
        self.seen.contains(episode_id)
    }

    /// Next timestamp, clamped to be monotone within this run.
    pub fn next_timestamp(&mut self) -> String {
        let mut now = Utc::now();
        if let Some(last) = self.last_timestamp {
            if now < last {
                now = last;
            }
        }
        self.last_timestamp = Some(now);
        now.to_rfc3339_opts(SecondsFormat::Millis, true)
    }

    /// Append entries in order, then persist the dedup state.
    pub fn append(
        &mut self,
        entries: &[PredictionLogEntry],
        errors: &[ErrorLogEntry],
        input_sha256: &str,
    ) -> CliResult<()> {
        if !entries.is_empty() {
            let mut log = OpenOptions::new()
                .append(true)
                .create(true)
                .open(&self.log_path)
                .map_err(|e| CliError::internal("cannot open prediction log", e))?;
            for entry in entries {
                let line = serde_json::to_string(entry)
                    .map_err(|e| CliError::internal("cannot serialize log entry", e))?;
                writeln!(log, "{line}")
                    .map_err(|e| CliError::internal("cannot append to prediction log", e))?;
                self.seen.insert(entry.episode_id.clone());
                self.state.seen_episodes.push(entry.episode_id.clone());
            }
            log.flush()
                .map_err(|e| CliError::internal("cannot flush prediction log", e))?;
        }

        if !errors.is_empty() {
            let mut sidecar = OpenOptions::new()
                .append(true)
                .create(true)
                .open(&self.errors_path)
                .map_err(|e| CliError::internal("cannot open errors sidecar", e))?;
            for entry in errors {
                let line = serde_json::to_string(entry)
                    .map_err(|e| CliError::internal("cannot serialize error entry", e))?;
                writeln!(sidecar, "{line}")
                    .map_err(|e| CliError::internal("cannot append to errors sidecar", e))?;
            }
        }

        self.state.last_input_sha256 = Some(input_sha256.to_string());
        let text = serde_json::to_string(&self.state)
            .map_err(|e| CliError::internal("cannot serialize state", e))?;
        std::fs::write(&self.state_path, text)
            .map_err(|e| CliError::internal("cannot write state sidecar", e))?;
        Ok(())
    }
}

impl Drop for ScoreLog {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.lock_path);
    }
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}
