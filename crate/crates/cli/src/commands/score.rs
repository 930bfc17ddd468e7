use std::path::PathBuf;

use clap::Args;

use admrisk::dataset::{load_csv_lenient, Cohort};
use admrisk::persist::{file_sha256, load_model, BundleInfo, ModelBundle};

use crate::errors::CliResult;
use crate::score_log::{ErrorLogEntry, PredictionLogEntry, ScoreLog};

#[derive(Args)]
pub struct ScoreArgs {
    /// Trained bundle (.arx.json).
    #[arg(long)]
    pub model: PathBuf,

    /// CSV of admitted patients (labels optional; unseen categories fine).
    #[arg(long)]
    pub input: PathBuf,

    /// Prediction log to append to (JSON lines).
    #[arg(long)]
    pub log: PathBuf,

    /// Poll the input every N seconds, scoring only new episodes.
    #[arg(long, value_name = "SECONDS")]
    pub watch: Option<u64>,

    /// Stop watch mode after this many scan passes (testing aid).
    #[arg(long)]
    pub watch_passes: Option<usize>,
}

fn scan_once(
    bundle: &ModelBundle,
    info: &BundleInfo,
    log: &mut ScoreLog,
    args: &ScoreArgs,
    quiet: bool,
) -> CliResult<(usize, usize)> {
    let input_hash = file_sha256(&args.input)?;
    if log.input_unchanged(&input_hash) {
        if !quiet {
            println!("input unchanged; nothing to score");
        }
        return Ok((0, 0));
    }

    let (cohort, issues) = load_csv_lenient(&args.input, &bundle.scorer.schema)?;
    let fresh: Vec<usize> = (0..cohort.len())
        .filter(|&i| !log.already_scored(&cohort.records[i].episode_id))
        .collect();

    let scores = if fresh.is_empty() {
        Vec::new()
    } else {
        let sub = Cohort {
            schema: cohort.schema.clone(),
            records: fresh.iter().map(|&i| cohort.records[i].clone()).collect(),
        };
        bundle.scorer.score_cohort(&sub)?
    };

    let fingerprint: String = info.checksum.chars().take(12).collect();
    let mut entries = Vec::with_capacity(fresh.len());
    for (&row, &score) in fresh.iter().zip(&scores) {
        let record = &cohort.records[row];
        entries.push(PredictionLogEntry {
            timestamp: log.next_timestamp(),
            patient_id: record.patient_id.clone(),
            episode_id: record.episode_id.clone(),
            score,
            label: u8::from(score >= bundle.threshold),
            threshold: bundle.threshold,
            model_kind: info.kind.clone(),
            model_format_version: info.format_version,
            model_fingerprint: fingerprint.clone(),
        });
    }

    let errors: Vec<ErrorLogEntry> = issues
        .iter()
        .map(|issue| ErrorLogEntry {
            timestamp: log.next_timestamp(),
            row: issue.row,
            message: issue.message.clone(),
        })
        .collect();

    log.append(&entries, &errors, &input_hash)?;
    if !quiet {
        println!(
            "scored {} new episodes ({} invalid rows skipped)",
            entries.len(),
            errors.len()
        );
    }
    Ok((entries.len(), errors.len()))
}

pub fn run(args: ScoreArgs, quiet: bool) -> CliResult<()> {
    let (bundle, info) = load_model(&args.model)?;
    let mut log = ScoreLog::open(&args.log)?;

    match args.watch {
        None => {
            scan_once(&bundle, &info, &mut log, &args, quiet)?;
        }
        Some(interval) => {
            let mut passes = 0usize;
            loop {
                scan_once(&bundle, &info, &mut log, &args, quiet)?;
                passes += 1;
                if let Some(limit) = args.watch_passes {
                    if passes >= limit {
                        break;
                    }
                }
                std::thread::sleep(std::time::Duration::from_secs(interval));
            }
        }
    }
    Ok(())
}
