//! End-to-end scoring pipelines: preprocessing state plus a fitted model,
//! trained on a row subset and able to score whole cohorts.
//!
//! Tree ensembles consume raw imputed values; the distance-based model gets
//! standardized ones; the linear baseline sees only its four design
//! columns; the point table reads records directly (missing items simply
//! score zero).

use serde::{Deserialize, Serialize};

use crate::baselines::{
    buurman_predict, fit_buurman, profund_score, BuurmanModel, ProfundTable, BUURMAN_FEATURES,
};
use crate::dataset::{encode, fit_encoder_on, stratified_split, Cohort, EncodedMatrix, Encoder};
use crate::error::{Error, Result};
use crate::learners::{
    fit_gradient_boosting, fit_knn, fit_random_forest, gb_predict_proba, gini_importance,
    knn_predict_proba, rf_predict_proba, ForestParams, GbParams, GradientBoostedEnsemble,
    KnnModel, RandomForestEnsemble,
};
use crate::metrics::{optimal_threshold, ThresholdChoice};
use crate::preprocess::{
    apply_imputer, apply_standardizer, fit_imputer, fit_standardizer, Imputer, Standardizer,
};
use crate::schema::CohortSchema;
use crate::seed;

// derived-seed streams
const STREAM_CALIBRATION_SPLIT: u64 = 0x20;
const STREAM_CALIBRATION_FIT: u64 = 0x21;

/// Features the linear baseline is defined over.
pub const BUURMAN_FEATURE_NAMES: [&str; BUURMAN_FEATURES] =
    ["Barthel Test", "Charlson Score", "Malignancy", "Urea"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gbc,
    Rf,
    Knn,
    Buurman,
    Profund,
}

pub const SUPPORTED_KINDS: &str = "gbc, rf, knn, buurman, profund";

impl ModelKind {
    pub fn parse(text: &str) -> Result<ModelKind> {
        match text {
            "gbc" => Ok(ModelKind::Gbc),
            "rf" => Ok(ModelKind::Rf),
            "knn" => Ok(ModelKind::Knn),
            "buurman" => Ok(ModelKind::Buurman),
            "profund" => Ok(ModelKind::Profund),
            other => Err(Error::UnknownModelKind {
                got: other.to_string(),
                supported: SUPPORTED_KINDS.to_string(),
            }),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gbc => "gbc",
            ModelKind::Rf => "rf",
            ModelKind::Knn => "knn",
            ModelKind::Buurman => "buurman",
            ModelKind::Profund => "profund",
        }
    }

    pub fn supports_importance(self) -> bool {
        matches!(self, ModelKind::Gbc | ModelKind::Rf)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Model choice plus hyperparameters; the fit recipe for one pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ModelParams {
    Gbc(GbParams),
    Rf(ForestParams),
    Knn { k: usize },
    Buurman,
    Profund { table: ProfundTable },
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::Gbc(_) => ModelKind::Gbc,
            ModelParams::Rf(_) => ModelKind::Rf,
            ModelParams::Knn { .. } => ModelKind::Knn,
            ModelParams::Buurman => ModelKind::Buurman,
            ModelParams::Profund { .. } => ModelKind::Profund,
        }
    }

    /// Default hyperparameters for a kind; the point table has no
    /// defaults and must come from configuration.
    pub fn defaults_for(kind: ModelKind, table: Option<ProfundTable>) -> Result<ModelParams> {
        match kind {
            ModelKind::Gbc => Ok(ModelParams::Gbc(GbParams::default())),
            ModelKind::Rf => Ok(ModelParams::Rf(ForestParams::default())),
            ModelKind::Knn => Ok(ModelParams::Knn { k: 5 }),
            ModelKind::Buurman => Ok(ModelParams::Buurman),
            ModelKind::Profund => table.map(|table| ModelParams::Profund { table }).ok_or_else(
                || Error::InvalidConfig("the profund model needs a point-table file".into()),
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "lowercase")]
pub enum FittedModel {
    Gbc(GradientBoostedEnsemble),
    Rf(RandomForestEnsemble),
    Knn(KnnModel),
    Buurman { model: BuurmanModel, columns: Vec<usize> },
    Profund { table: ProfundTable },
}

/// Preprocessing state and model fitted on one training row set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedScorer {
    pub schema: CohortSchema,
    pub encoder: Option<Encoder>,
    pub imputer: Option<Imputer>,
    pub standardizer: Option<Standardizer>,
    pub model: FittedModel,
}

impl FittedScorer {
    pub fn kind(&self) -> ModelKind {
        match &self.model {
            FittedModel::Gbc(_) => ModelKind::Gbc,
            FittedModel::Rf(_) => ModelKind::Rf,
            FittedModel::Knn(_) => ModelKind::Knn,
            FittedModel::Buurman { .. } => ModelKind::Buurman,
            FittedModel::Profund { .. } => ModelKind::Profund,
        }
    }

    fn preprocess(&self, cohort: &Cohort) -> Result<EncodedMatrix> {
        let encoder = self
            .encoder
            .as_ref()
            .expect("matrix models carry an encoder");
        let imputer = self
            .imputer
            .as_ref()
            .expect("matrix models carry an imputer");
        let matrix = encode(cohort, encoder);
        apply_imputer(&matrix, imputer)
    }

    /// Score every record of a cohort (schema must match the fit).
    pub fn score_cohort(&self, cohort: &Cohort) -> Result<Vec<f64>> {
        if cohort.schema != self.schema {
            return Err(Error::InvalidConfig(
                "cohort schema differs from the one the model was fitted on".into(),
            ));
        }
        match &self.model {
            FittedModel::Gbc(model) => gb_predict_proba(model, &self.preprocess(cohort)?),
            FittedModel::Rf(model) => rf_predict_proba(model, &self.preprocess(cohort)?),
            FittedModel::Knn(model) => {
                let imputed = self.preprocess(cohort)?;
                let standardizer = self
                    .standardizer
                    .as_ref()
                    .expect("knn pipelines carry a standardizer");
                let scaled = apply_standardizer(&imputed, standardizer)?;
                knn_predict_proba(model, &scaled)
            }
            FittedModel::Buurman { model, columns } => {
                let imputed = self.preprocess(cohort)?;
                buurman_predict(model, &imputed.select_columns(columns))
            }
            FittedModel::Profund { table } => cohort
                .records
                .iter()
                .map(|r| profund_score(r, table, &cohort.schema).map(f64::from))
                .collect(),
        }
    }

    /// Per-feature importance shares (summing to 1) for tree ensembles.
    pub fn importance(&self) -> Result<Vec<(String, f64)>> {
        let encoder = self.encoder.as_ref();
        match (&self.model, encoder) {
            (FittedModel::Gbc(model), Some(encoder)) => {
                Ok(gini_importance(&model.column_gains, encoder))
            }
            (FittedModel::Rf(model), Some(encoder)) => {
                Ok(gini_importance(&model.column_gains, encoder))
            }
            _ => Err(Error::Unsupported {
                kind: self.kind().as_str().into(),
                operation: "impurity importance".into(),
            }),
        }
    }
}

fn outcome_labels(cohort: &Cohort) -> Result<Vec<u8>> {
    cohort.labels().ok_or_else(|| {
        Error::InvalidConfig("every record needs an outcome label for fitting".into())
    })
}

/// Fit the full pipeline for `params` on the given training rows.
pub fn fit_scorer(
    cohort: &Cohort,
    train_rows: &[usize],
    params: &ModelParams,
    seed_value: u64,
) -> Result<FittedScorer> {
    if train_rows.is_empty() {
        return Err(Error::EmptyCohort);
    }

    if let ModelParams::Profund { table } = params {
        table.check_features(&cohort.schema)?;
        return Ok(FittedScorer {
            schema: cohort.schema.clone(),
            encoder: None,
            imputer: None,
            standardizer: None,
            model: FittedModel::Profund { table: table.clone() },
        });
    }

    let labels = outcome_labels(cohort)?;
    let encoder = fit_encoder_on(cohort, train_rows)?;
    let matrix = encode(cohort, &encoder);
    let imputer = fit_imputer(&matrix, train_rows)?;
    let imputed = apply_imputer(&matrix, &imputer)?;

    let (model, standardizer) = match params {
        ModelParams::Gbc(p) => {
            let model = fit_gradient_boosting(&imputed, train_rows, &labels, p, seed_value)?;
            (FittedModel::Gbc(model), None)
        }
        ModelParams::Rf(p) => {
            let model = fit_random_forest(&imputed, train_rows, &labels, p, seed_value)?;
            (FittedModel::Rf(model), None)
        }
        ModelParams::Knn { k } => {
            let standardizer = fit_standardizer(&imputed, train_rows)?;
            let scaled = apply_standardizer(&imputed, &standardizer)?;
            let model = fit_knn(&scaled, train_rows, &labels, *k)?;
            (FittedModel::Knn(model), Some(standardizer))
        }
        ModelParams::Buurman => {
            let columns = buurman_columns(&encoder)?;
            let design = imputed.select_columns(&columns);
            let train_targets: Vec<f64> =
                train_rows.iter().map(|&r| f64::from(labels[r])).collect();
            let model = fit_buurman(&design.select_rows(train_rows), &train_targets)?;
            (FittedModel::Buurman { model, columns }, None)
        }
        ModelParams::Profund { .. } => unreachable!("handled above"),
    };

    Ok(FittedScorer {
        schema: cohort.schema.clone(),
        encoder: Some(encoder),
        imputer: Some(imputer),
        standardizer,
        model,
    })
}

/// Resolve the four baseline features to single matrix columns.
fn buurman_columns(encoder: &Encoder) -> Result<Vec<usize>> {
    BUURMAN_FEATURE_NAMES
        .iter()
        .map(|name| {
            let range = encoder
                .columns_for(name)
                .ok_or_else(|| Error::UnknownFeature(name.to_string()))?;
            if range.len() != 1 {
                return Err(Error::InvalidConfig(format!(
                    "baseline feature {name:?} must encode to one column"
                )));
            }
            Ok(range.start)
        })
        .collect()
}

/// The deployment threshold protocol: one dedicated stratified split,
/// a fit on its training part, and a BER-minimizing search over its test
/// scores.
pub fn calibration_threshold(
    cohort: &Cohort,
    params: &ModelParams,
    test_fraction: f64,
    seed_value: u64,
) -> Result<ThresholdChoice> {
    let labels = outcome_labels(cohort)?;
    let split = stratified_split(
        &labels,
        test_fraction,
        seed::derive(seed_value, STREAM_CALIBRATION_SPLIT),
    )?;
    let scorer = fit_scorer(
        cohort,
        &split.train,
        params,
        seed::derive(seed_value, STREAM_CALIBRATION_FIT),
    )?;
    let scores = scorer.score_cohort(cohort)?;
    let test_scores: Vec<f64> = split.test.iter().map(|&r| scores[r]).collect();
    let test_labels: Vec<u8> = split.test.iter().map(|&r| labels[r]).collect();
    optimal_threshold(&test_scores, &test_labels)
}
