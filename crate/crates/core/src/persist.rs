//! Versioned serialization of trained pipelines and evaluation reports.
//!
//! Model bundles (`.arx.json`) carry a small self-describing envelope:
//! `format_version`, `kind`, `created_utc`, a SHA-256 `checksum`, and the
//! `payload`. The checksum covers the header fields and the exact payload
//! bytes, so any corruption is rejected before a partial model can
//! surface. Files are written to a temporary sibling and renamed into
//! place.
//!
//! Report files are plain JSON (config echo, per-repetition arrays,
//! summaries, importance, artifact version) with no timestamp, so a rerun
//! with the same seeds produces byte-identical files.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::EvaluationReport;
use crate::pipeline::FittedScorer;

/// Bundle format version this build reads and writes.
pub const FORMAT_VERSION: u32 = 1;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetadata {
    pub seed: u64,
    /// SHA-256 of the training CSV, when trained from a file.
    pub cohort_fingerprint: Option<String>,
}

/// A deployable model: pipeline state, frozen decision threshold, and
/// training metadata. The bundle scores records exactly like the
/// in-memory pipeline that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub scorer: FittedScorer,
    pub threshold: f64,
    pub metadata: TrainingMetadata,
}

/// Envelope metadata of a loaded bundle.
#[derive(Debug, Clone)]
pub struct BundleInfo {
    pub format_version: u32,
    pub kind: String,
    pub created_utc: String,
    /// Hex SHA-256; doubles as the model fingerprint in prediction logs.
    pub checksum: String,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    format_version: u32,
    kind: &'a str,
    created_utc: &'a str,
    checksum: String,
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn {
    format_version: u32,
    kind: String,
    created_utc: String,
    checksum: String,
    payload: Box<RawValue>,
}

/// Header fields alone; readable without touching the payload structure.
#[derive(Debug, Clone, Deserialize)]
pub struct BundleHeader {
    pub format_version: u32,
    pub kind: String,
    pub created_utc: String,
}

fn checksum_of(format_version: u32, kind: &str, created_utc: &str, payload: &str) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format_version.to_string().as_bytes());
    hasher.update(b"\n");
    hasher.update(kind.as_bytes());
    hasher.update(b"\n");
    hasher.update(created_utc.as_bytes());
    hasher.update(b"\n");
    hasher.update(payload.as_bytes());
    hex_string(&hasher.finalize())
}

fn hex_string(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// SHA-256 of a file, hex-encoded; used for cohort fingerprints.
pub fn file_sha256(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex_string(&hasher.finalize()))
}

fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut temp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(|e| Error::io(path, e))?;
    temp.write_all(contents.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    temp.persist(path)
        .map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Serialize a bundle into the enveloped `.arx.json` format.
pub fn save_model(bundle: &ModelBundle, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let payload = serde_json::to_string(bundle)
        .map_err(|e| Error::corrupt(path, format!("serialization failed: {e}")))?;
    let kind = bundle.scorer.kind().as_str();
    let created_utc = chrono::Utc::now().to_rfc3339();
    let checksum = checksum_of(FORMAT_VERSION, kind, &created_utc, &payload);
    let raw = RawValue::from_string(payload)
        .map_err(|e| Error::corrupt(path, format!("payload is not valid json: {e}")))?;
    let envelope = EnvelopeOut {
        format_version: FORMAT_VERSION,
        kind,
        created_utc: &created_utc,
        checksum,
        payload: &raw,
    };
    let text = serde_json::to_string(&envelope)
        .map_err(|e| Error::corrupt(path, format!("serialization failed: {e}")))?;
    write_atomically(path, &text)
}

/// Load and verify a bundle: envelope parse, version check, checksum over
/// the exact payload bytes, then payload parse. No partial model escapes
/// a failed check.
pub fn load_model(path: impl AsRef<Path>) -> Result<(ModelBundle, BundleInfo)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let envelope: EnvelopeIn = serde_json::from_str(&text)
        .map_err(|e| Error::corrupt(path, format!("envelope parse failed: {e}")))?;

    if envelope.format_version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: envelope.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let expected = checksum_of(
        envelope.format_version,
        &envelope.kind,
        &envelope.created_utc,
        envelope.payload.get(),
    );
    if expected != envelope.checksum {
        return Err(Error::corrupt(path, "checksum mismatch"));
    }
    let bundle: ModelBundle = serde_json::from_str(envelope.payload.get())
        .map_err(|e| Error::corrupt(path, format!("payload parse failed: {e}")))?;
    if bundle.scorer.kind().as_str() != envelope.kind {
        return Err(Error::corrupt(path, "envelope kind does not match the payload"));
    }
    Ok((
        bundle,
        BundleInfo {
            format_version: envelope.format_version,
            kind: envelope.kind,
            created_utc: envelope.created_utc,
            checksum: envelope.checksum,
        },
    ))
}

/// Read only the envelope header of a bundle file.
pub fn read_header(path: impl AsRef<Path>) -> Result<BundleHeader> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::corrupt(path, format!("envelope parse failed: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ReportFile {
    artifact_version: String,
    report: EvaluationReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SuiteFile {
    artifact_version: String,
    reports: Vec<EvaluationReport>,
}

fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::corrupt(path, format!("serialization failed: {e}")))?;
    write_atomically(path, &text)
}

fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::corrupt(path, e.to_string()))
}

/// Persist one evaluation report (deterministic bytes for fixed seeds).
pub fn save_report(report: &EvaluationReport, path: impl AsRef<Path>) -> Result<()> {
    let file = ReportFile {
        artifact_version: ARTIFACT_VERSION.to_string(),
        report: report.clone(),
    };
    save_json(&file, path.as_ref())
}

pub fn load_report(path: impl AsRef<Path>) -> Result<EvaluationReport> {
    let file: ReportFile = load_json(path.as_ref())?;
    Ok(file.report)
}

/// Persist a multi-model evaluation run as one file.
pub fn save_suite(reports: &[EvaluationReport], path: impl AsRef<Path>) -> Result<()> {
    let file = SuiteFile {
        artifact_version: ARTIFACT_VERSION.to_string(),
        reports: reports.to_vec(),
    };
    save_json(&file, path.as_ref())
}

pub fn load_suite(path: impl AsRef<Path>) -> Result<Vec<EvaluationReport>> {
    let file: SuiteFile = load_json(path.as_ref())?;
    Ok(file.reports)
}
