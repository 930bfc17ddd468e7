use std::path::PathBuf;

use clap::Args;

use admrisk::dataset::{load_csv, one_episode_per_patient};
use admrisk::learners::FeatureSubset;
use admrisk::persist::{file_sha256, save_model, ModelBundle, TrainingMetadata};
use admrisk::pipeline::{calibration_threshold, fit_scorer, ModelKind, ModelParams};
use admrisk::seed;

use crate::commands::{load_profund_table, resolve_schema};
use crate::errors::{CliError, CliResult};

// derived-seed streams
const STREAM_DEDUPE: u64 = 0x40;
const STREAM_CALIBRATION: u64 = 0x41;
const STREAM_FIT: u64 = 0x42;

#[derive(Args)]
pub struct TrainArgs {
    /// Labeled cohort CSV.
    #[arg(long)]
    pub data: PathBuf,

    /// Model kind: gbc, rf, knn, buurman, profund.
    #[arg(long)]
    pub kind: String,

    /// Bundle file to write (.arx.json).
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    /// Fixed decision threshold; skips the calibration-split search.
    #[arg(long)]
    pub threshold: Option<f64>,

    /// Derive the CSV schema from a generator config instead of the
    /// standard 36-feature layout.
    #[arg(long)]
    pub schema_from: Option<PathBuf>,

    /// Point-table config (required for --kind profund).
    #[arg(long)]
    pub profund_table: Option<PathBuf>,

    /// Trees in the boosted/forest ensembles.
    #[arg(long)]
    pub trees: Option<usize>,

    /// Boosting shrinkage.
    #[arg(long)]
    pub learning_rate: Option<f64>,

    /// Tree depth limit (boosting default 3; forest unlimited).
    #[arg(long)]
    pub max_depth: Option<usize>,

    #[arg(long)]
    pub min_samples_leaf: Option<usize>,

    /// Candidate features per forest split (default: floor(sqrt(d))).
    #[arg(long)]
    pub candidate_features: Option<usize>,

    /// Grow forest trees on the full training set instead of bootstrap
    /// resamples.
    #[arg(long)]
    pub no_bootstrap: bool,

    /// Neighbors for knn.
    #[arg(long)]
    pub k: Option<usize>,
}

/// Build model parameters from the kind plus any hyperparameter flags.
pub fn model_params(args: &TrainArgs) -> CliResult<ModelParams> {
    let kind = ModelKind::parse(&args.kind)?;
    let table = load_profund_table(args.profund_table.as_deref())?;
    let mut params = ModelParams::defaults_for(kind, table)?;
    match &mut params {
        ModelParams::Gbc(p) => {
            if let Some(v) = args.trees {
                p.n_trees = v;
            }
            if let Some(v) = args.learning_rate {
                p.learning_rate = v;
            }
            if let Some(v) = args.max_depth {
                p.max_depth = v;
            }
            if let Some(v) = args.min_samples_leaf {
                p.min_samples_leaf = v;
            }
        }
        ModelParams::Rf(p) => {
            if let Some(v) = args.trees {
                p.n_trees = v;
            }
            if args.max_depth.is_some() {
                p.max_depth = args.max_depth;
            }
            if let Some(v) = args.min_samples_leaf {
                p.min_samples_leaf = v;
            }
            if let Some(v) = args.candidate_features {
                p.n_candidate_features = FeatureSubset::Count(v);
            }
            if args.no_bootstrap {
                p.bootstrap = false;
            }
        }
        ModelParams::Knn { k } => {
            if let Some(v) = args.k {
                *k = v;
            }
        }
        ModelParams::Buurman | ModelParams::Profund { .. } => {}
    }
    Ok(params)
}

pub fn run(args: TrainArgs, quiet: bool) -> CliResult<()> {
    let params = model_params(&args)?;
    let schema = resolve_schema(args.schema_from.as_deref())?;

    let cohort = load_csv(&args.data, &schema)?;
    let cohort = one_episode_per_patient(&cohort, seed::derive(args.seed, STREAM_DEDUPE));
    if cohort.is_empty() {
        return Err(CliError::Data(admrisk::Error::EmptyCohort));
    }

    let threshold = match args.threshold {
        Some(value) => value,
        None => {
            calibration_threshold(&cohort, &params, 0.2, seed::derive(args.seed, STREAM_CALIBRATION))?
                .threshold
        }
    };

    let rows: Vec<usize> = (0..cohort.len()).collect();
    let scorer = fit_scorer(&cohort, &rows, &params, seed::derive(args.seed, STREAM_FIT))?;

    let bundle = ModelBundle {
        scorer,
        threshold,
        metadata: TrainingMetadata {
            seed: args.seed,
            cohort_fingerprint: Some(file_sha256(&args.data)?),
        },
    };
    save_model(&bundle, &args.out)?;

    if !quiet {
        println!(
            "trained {} on {} records; threshold {:.6}; bundle {}",
            params.kind(),
            cohort.len(),
            threshold,
            args.out.display()
        );
    }
    Ok(())
}

#[derive(Args)]
pub struct BaselineFitArgs {
    /// Labeled cohort CSV.
    #[arg(long)]
    pub data: PathBuf,

    /// Baseline kind: buurman or profund.
    #[arg(long)]
    pub kind: String,

    /// Bundle file to write (.arx.json).
    #[arg(long)]
    pub out: PathBuf,

    #[arg(long, default_value_t = 7)]
    pub seed: u64,

    #[arg(long)]
    pub threshold: Option<f64>,

    #[arg(long)]
    pub schema_from: Option<PathBuf>,

    /// Point-table config (required for --kind profund).
    #[arg(long)]
    pub profund_table: Option<PathBuf>,
}

pub fn run_baseline(args: BaselineFitArgs, quiet: bool) -> CliResult<()> {
    let kind = ModelKind::parse(&args.kind)?;
    if !matches!(kind, ModelKind::Buurman | ModelKind::Profund) {
        return Err(CliError::Usage(format!(
            "baseline-fit handles buurman and profund; use train for {kind}"
        )));
    }
    run(
        TrainArgs {
            data: args.data,
            kind: args.kind,
            out: args.out,
            seed: args.seed,
            threshold: args.threshold,
            schema_from: args.schema_from,
            profund_table: args.profund_table,
            trees: None,
            learning_rate: None,
            max_depth: None,
            min_samples_leaf: None,
            candidate_features: None,
            no_bootstrap: false,
            k: None,
        },
        quiet,
    )
}
