//! Repeated stratified-holdout evaluation with per-metric means and 95%
//! confidence intervals, plus the importance report.
//!
//! Each repetition derives its own seed from the master seed, splits the
//! cohort, fits encoder/imputer (and standardizer where needed) on the
//! training rows only, fits the model, and scores the held-out rows. The
//! decision threshold is frozen beforehand on a dedicated calibration
//! split by default; fixed and per-repetition modes are also available.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::{stratified_split, Cohort};
use crate::error::{Error, Result};
use crate::metrics::{auc_of, confusion_at_threshold, metric_set, optimal_threshold};
use crate::pipeline::{calibration_threshold, fit_scorer, ModelParams};
use crate::seed;

// derived-seed streams
const STREAM_REPETITION: u64 = 0x30;
const STREAM_REPETITION_FIT: u64 = 0x31;
const STREAM_CALIBRATION: u64 = 0x32;
const STREAM_FINAL_FIT: u64 = 0x33;

/// How the decision threshold is established.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdPolicy {
    Fixed { value: f64 },
    /// Search once on a dedicated calibration split, then freeze.
    CalibrationSearch,
    /// Re-run the BER search on every repetition's test scores
    /// (sensitivity analysis).
    PerRepetitionSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub repetitions: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub model: ModelParams,
    pub threshold: ThresholdPolicy,
}

impl EvalConfig {
    pub fn new(model: ModelParams, seed: u64) -> EvalConfig {
        EvalConfig {
            repetitions: 100,
            test_fraction: 0.2,
            seed,
            model,
            threshold: ThresholdPolicy::CalibrationSearch,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repetitions < 2 {
            return Err(Error::InvalidConfig("repetitions must be >= 2".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "test_fraction must lie in (0,1), got {}",
                self.test_fraction
            )));
        }
        Ok(())
    }
}

/// Mean and normal-approximation 95% CI over the repetition values, which
/// are retained for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub values: Vec<f64>,
}

/// mean +- 1.96 * sample SD / sqrt(n).
pub fn summarize_metric(name: &str, values: &[f64]) -> Result<MetricSummary> {
    if values.len() < 2 {
        return Err(Error::InvalidConfig(
            "metric summaries need at least 2 values".into(),
        ));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1.0)).sqrt();
    let half_width = 1.96 * sd / n.sqrt();
    Ok(MetricSummary {
        metric: name.to_string(),
        mean,
        ci_low: mean - half_width,
        ci_high: mean + half_width,
        values: values.to_vec(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub percent: f64,
}

/// Importance shares as descending percentages summing to 100.
pub fn importance_report(shares: &[(String, f64)]) -> Vec<ImportanceRow> {
    let mut rows: Vec<ImportanceRow> = shares
        .iter()
        .map(|(feature, share)| ImportanceRow {
            feature: feature.clone(),
            percent: share * 100.0,
        })
        .collect();
    rows.sort_by(|a, b| b.percent.total_cmp(&a.percent));
    rows
}

/// One model's evaluation: the frozen threshold, five metric summaries,
/// and (for tree ensembles) the importance table from a final full-cohort
/// fit. Wall-clock times are kept in memory for diagnostics but excluded
/// from the persisted form, which must be byte-identical across reruns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub model_kind: String,
    pub threshold: f64,
    pub threshold_policy: ThresholdPolicy,
    pub accuracy: MetricSummary,
    pub auc: MetricSummary,
    pub specificity: MetricSummary,
    pub sensitivity: MetricSummary,
    pub ber: MetricSummary,
    pub importance: Option<Vec<ImportanceRow>>,
    pub config: EvalConfig,
    #[serde(skip)]
    pub repetition_seconds: Vec<f64>,
}

impl EvaluationReport {
    pub fn summaries(&self) -> [&MetricSummary; 5] {
        [
            &self.accuracy,
            &self.auc,
            &self.specificity,
            &self.sensitivity,
            &self.ber,
        ]
    }
}

/// Run the repeated stratified holdout for one model.
pub fn run_repeated_holdout(cohort: &Cohort, config: &EvalConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let labels = cohort.labels().ok_or_else(|| {
        Error::InvalidConfig("every record needs an outcome label for evaluation".into())
    })?;

    let frozen_threshold = match config.threshold {
        ThresholdPolicy::Fixed { value } => Some(value),
        ThresholdPolicy::CalibrationSearch => Some(
            calibration_threshold(
                cohort,
                &config.model,
                config.test_fraction,
                seed::derive(config.seed, STREAM_CALIBRATION),
            )?
            .threshold,
        ),
        ThresholdPolicy::PerRepetitionSearch => None,
    };

    let mut accuracy = Vec::with_capacity(config.repetitions);
    let mut auc = Vec::with_capacity(config.repetitions);
    let mut specificity = Vec::with_capacity(config.repetitions);
    let mut sensitivity = Vec::with_capacity(config.repetitions);
    let mut ber = Vec::with_capacity(config.repetitions);
    let mut repetition_seconds = Vec::with_capacity(config.repetitions);
    let mut reported_threshold = frozen_threshold;

    for repetition in 0..config.repetitions {
        let started = Instant::now();
        let mut run = || -> Result<()> {
            let rep_seed = seed::derive(config.seed, STREAM_REPETITION + repetition as u64);
            let split = stratified_split(&labels, config.test_fraction, rep_seed)?;
            let scorer = fit_scorer(
                cohort,
                &split.train,
                &config.model,
                seed::derive(rep_seed, STREAM_REPETITION_FIT),
            )?;
            let scores = scorer.score_cohort(cohort)?;
            let test_scores: Vec<f64> = split.test.iter().map(|&r| scores[r]).collect();
            let test_labels: Vec<u8> = split.test.iter().map(|&r| labels[r]).collect();

            auc.push(auc_of(&test_scores, &test_labels)?);
            let threshold = match frozen_threshold {
                Some(value) => value,
                None => {
                    let choice = optimal_threshold(&test_scores, &test_labels)?;
                    reported_threshold = Some(choice.threshold);
                    choice.threshold
                }
            };
            let cm = confusion_at_threshold(&test_scores, &test_labels, threshold)?;
            let metrics = metric_set(&cm)?;
            accuracy.push(metrics.accuracy);
            specificity.push(metrics.specificity);
            sensitivity.push(metrics.sensitivity);
            ber.push(metrics.ber);
            Ok(())
        };
        run().map_err(|e| e.in_repetition(repetition))?;
        repetition_seconds.push(started.elapsed().as_secs_f64());
    }

    let importance = if config.model.kind().supports_importance() {
        let all_rows: Vec<usize> = (0..cohort.len()).collect();
        let final_scorer = fit_scorer(
            cohort,
            &all_rows,
            &config.model,
            seed::derive(config.seed, STREAM_FINAL_FIT),
        )?;
        Some(importance_report(&final_scorer.importance()?))
    } else {
        None
    };

    Ok(EvaluationReport {
        model_kind: config.model.kind().as_str().to_string(),
        threshold: reported_threshold.unwrap_or(f64::NAN),
        threshold_policy: config.threshold,
        accuracy: summarize_metric("accuracy", &accuracy)?,
        auc: summarize_metric("auc", &auc)?,
        specificity: summarize_metric("specificity", &specificity)?,
        sensitivity: summarize_metric("sensitivity", &sensitivity)?,
        ber: summarize_metric("ber", &ber)?,
        importance,
        config: config.clone(),
        repetition_seconds,
    })
}
