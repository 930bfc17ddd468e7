use std::path::PathBuf;

use clap::Args;

use admrisk::dataset::{load_csv, one_episode_per_patient};
use admrisk::eval::{run_repeated_holdout, EvalConfig, EvaluationReport, ThresholdPolicy};
use admrisk::persist::save_suite;
use admrisk::pipeline::{ModelKind, ModelParams};
use admrisk::seed;

use crate::commands::{format_summary, load_profund_table, resolve_schema};
use crate::errors::{CliError, CliResult};

const STREAM_DEDUPE: u64 = 0x40;

#[derive(Args)]
pub struct EvaluateArgs {
    /// Labeled cohort CSV.
    #[arg(long)]
    pub data: PathBuf,

    /// Comma-separated model kinds (gbc,rf,knn,buurman,profund), run at
    /// their default hyperparameters.
    #[arg(long, default_value = "gbc")]
    pub models: String,

    /// Full evaluation configs as a JSON array of EvalConfig; overrides
    /// --models/--repetitions/--test-fraction/--seed.
    #[arg(long)]
    pub eval_config: Option<PathBuf>,

    /// Report file to write.
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 100)]
    pub repetitions: usize,

    #[arg(long, default_value_t = 0.2)]
    pub test_fraction: f64,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Fixed decision threshold for every model (default: one calibration
    /// search per model).
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Re-run the threshold search on every repetition (sensitivity mode).
    #[arg(long)]
    pub per_repetition_thresholds: bool,

    /// Derive the CSV schema from a generator config.
    #[arg(long)]
    pub schema_from: Option<PathBuf>,

    /// Point-table config (required when evaluating profund).
    #[arg(long)]
    pub profund_table: Option<PathBuf>,
}

fn threshold_policy(args: &EvaluateArgs) -> CliResult<ThresholdPolicy> {
    match (args.threshold, args.per_repetition_thresholds) {
        (Some(_), true) => Err(CliError::Usage(
            "--threshold and --per-repetition-thresholds are mutually exclusive".into(),
        )),
        (Some(value), false) => Ok(ThresholdPolicy::Fixed { value }),
        (None, true) => Ok(ThresholdPolicy::PerRepetitionSearch),
        (None, false) => Ok(ThresholdPolicy::CalibrationSearch),
    }
}

fn configs_from_args(args: &EvaluateArgs) -> CliResult<Vec<EvalConfig>> {
    if let Some(path) = &args.eval_config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(admrisk::Error::io(path, e)))?;
        let configs: Vec<EvalConfig> = serde_json::from_str(&text).map_err(|e| {
            CliError::Data(admrisk::Error::InvalidConfig(format!(
                "{}: {e}",
                path.display()
            )))
        })?;
        return Ok(configs);
    }

    let policy = threshold_policy(args)?;
    let table = load_profund_table(args.profund_table.as_deref())?;
    args.models
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|name| {
            let kind = ModelKind::parse(name)?;
            let params = ModelParams::defaults_for(kind, table.clone())?;
            Ok(EvalConfig {
                repetitions: args.repetitions,
                test_fraction: args.test_fraction,
                seed: args.seed,
                model: params,
                threshold: policy,
            })
        })
        .collect()
}

fn print_table(reports: &[EvaluationReport]) {
    println!(
        "{:<10} {:>10} {:>22} {:>22} {:>22} {:>22} {:>22}",
        "Model", "Threshold", "Accuracy", "AUC ROC", "Specificity", "Sensitivity", "BER"
    );
    for report in reports {
        println!(
            "{:<10} {:>10.3} {:>22} {:>22} {:>22} {:>22} {:>22}",
            report.model_kind,
            report.threshold,
            format_summary(&report.accuracy),
            format_summary(&report.auc),
            format_summary(&report.specificity),
            format_summary(&report.sensitivity),
            format_summary(&report.ber),
        );
    }
}

pub fn run(args: EvaluateArgs, quiet: bool) -> CliResult<()> {
    let configs = configs_from_args(&args)?;
    if configs.is_empty() {
        return Err(CliError::Usage("no models requested".into()));
    }

    let schema = resolve_schema(args.schema_from.as_deref())?;
    let cohort = load_csv(&args.data, &schema)?;
    let cohort = one_episode_per_patient(&cohort, seed::derive(args.seed, STREAM_DEDUPE));

    let mut reports = Vec::with_capacity(configs.len());
    for config in &configs {
        let report = run_repeated_holdout(&cohort, config)?;
        if !quiet {
            let seconds: f64 = report.repetition_seconds.iter().sum();
            println!(
                "evaluated {} ({} repetitions, {:.1}s)",
                report.model_kind,
                config.repetitions,
                seconds
            );
        }
        reports.push(report);
    }

    save_suite(&reports, &args.out)?;
    if !quiet {
        print_table(&reports);
        println!("report: {}", args.out.display());
    }
    Ok(())
}
