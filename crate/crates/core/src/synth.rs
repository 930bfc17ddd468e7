//! Synthetic cohort generator with a planted, known-ground-truth mortality
//! mechanism.
//!
//! Features are drawn independently per record from configured marginals
//! (truncated normals, Bernoulli flags, categorical draws). Each record's
//! true risk is a weighted sum of standardized feature values; outcomes are
//! Bernoulli(sigmoid(intercept + risk)) with the intercept calibrated so a
//! pilot sample hits the target prevalence. Missingness is applied after
//! the outcome draw and is independent of it.
//!
//! Per-record RNG streams derive from the config seed, so generation is
//! reproducible and could run in row blocks without changing the output.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Cohort;
use crate::error::{Error, Result};
use crate::learners::sigmoid;
use crate::metrics;
use crate::schema::{CohortSchema, FeatureKind, FeatureSpec, PatientRecord, Value, TARGET_NAME};
use crate::seed;

const PILOT_SIZE: usize = 50_000;
const PREVALENCE_TOLERANCE: f64 = 0.002;
const MAX_BISECTION_STEPS: usize = 100;
const MAX_TRUNCATION_ATTEMPTS: usize = 10_000;

// derived-seed streams
const STREAM_RECORDS: u64 = 0x10;
const STREAM_PILOT: u64 = 0x11;
const STREAM_EPISODES: u64 = 0x12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericSpec {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub upper: f64,
    #[serde(default)]
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BooleanSpec {
    pub positive_rate: f64,
    #[serde(default)]
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoricalSpec {
    pub categories: Vec<String>,
    pub probabilities: Vec<f64>,
    /// Raw per-category risk scores; standardized internally under the
    /// category probabilities before the feature weight applies.
    #[serde(default)]
    pub category_scores: Vec<f64>,
    #[serde(default)]
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Marginal {
    Integer(NumericSpec),
    Real(NumericSpec),
    Boolean(BooleanSpec),
    Categorical(CategoricalSpec),
}

impl Marginal {
    fn kind(&self) -> FeatureKind {
        match self {
            Marginal::Integer(_) => FeatureKind::Integer,
            Marginal::Real(_) => FeatureKind::Real,
            Marginal::Boolean(_) => FeatureKind::Boolean,
            Marginal::Categorical(_) => FeatureKind::Categorical,
        }
    }

    fn missing_rate(&self) -> f64 {
        match self {
            Marginal::Integer(s) | Marginal::Real(s) => s.missing_rate,
            Marginal::Boolean(s) => s.missing_rate,
            Marginal::Categorical(s) => s.missing_rate,
        }
    }
}

// no deny_unknown_fields here: serde does not support it alongside flatten
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureGen {
    pub name: String,
    #[serde(default)]
    pub units: Option<String>,
    #[serde(flatten)]
    pub marginal: Marginal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub n: usize,
    pub seed: u64,
    pub target_prevalence: f64,
    /// Probabilities for a patient having 1, 2, 3, ... episodes.
    #[serde(default = "default_episodes")]
    pub episodes_per_patient: Vec<f64>,
    pub features: Vec<FeatureGen>,
    /// Per-feature coefficients on standardized values.
    #[serde(default)]
    pub risk_weights: BTreeMap<String, f64>,
}

fn default_episodes() -> Vec<f64> {
    vec![1.0]
}

impl GeneratorConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<GeneratorConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: GeneratorConfig = serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be >= 1".into()));
        }
        if !(self.target_prevalence > 0.0 && self.target_prevalence < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "target_prevalence must lie in (0,1), got {}",
                self.target_prevalence
            )));
        }
        if self.episodes_per_patient.is_empty()
            || self.episodes_per_patient.iter().any(|&p| p < 0.0)
            || (self.episodes_per_patient.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidConfig(
                "episodes_per_patient must be a probability vector summing to 1".into(),
            ));
        }
        for feature in &self.features {
            let rate = feature.marginal.missing_rate();
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::InvalidConfig(format!(
                    "feature {:?}: missing_rate must lie in [0,1), got {rate}",
                    feature.name
                )));
            }
            match &feature.marginal {
                Marginal::Integer(s) | Marginal::Real(s) => {
                    if s.sd < 0.0 {
                        return Err(Error::InvalidConfig(format!(
                            "feature {:?}: sd must be non-negative",
                            feature.name
                        )));
                    }
                    if s.lower > s.upper {
                        return Err(Error::InvalidConfig(format!(
                            "feature {:?}: lower bound exceeds upper bound",
                            feature.name
                        )));
                    }
                }
                Marginal::Boolean(s) => {
                    if !(0.0..=1.0).contains(&s.positive_rate) {
                        return Err(Error::InvalidConfig(format!(
                            "feature {:?}: positive_rate must lie in [0,1]",
                            feature.name
                        )));
                    }
                }
                Marginal::Categorical(s) => {
                    if s.categories.is_empty() || s.categories.len() != s.probabilities.len() {
                        return Err(Error::InvalidConfig(format!(
                            "feature {:?}: categories and probabilities must align",
                            feature.name
                        )));
                    }
                    if !s.category_scores.is_empty()
                        && s.category_scores.len() != s.categories.len()
                    {
                        return Err(Error::InvalidConfig(format!(
                            "feature {:?}: category_scores must align with categories",
                            feature.name
                        )));
                    }
                    if s.probabilities.iter().any(|&p| p < 0.0)
                        || (s.probabilities.iter().sum::<f64>() - 1.0).abs() > 1e-9
                    {
                        return Err(Error::InvalidConfig(format!(
                            "feature {:?}: probabilities must sum to 1",
                            feature.name
                        )));
                    }
                }
            }
        }
        for name in self.risk_weights.keys() {
            if !self.features.iter().any(|f| &f.name == name) {
                return Err(Error::InvalidConfig(format!(
                    "risk weight references unknown feature {name:?}"
                )));
            }
        }
        Ok(())
    }

    /// Schema implied by the configured marginals; missing is allowed
    /// exactly where a missing rate is configured.
    pub fn schema(&self) -> Result<CohortSchema> {
        let features = self
            .features
            .iter()
            .map(|f| FeatureSpec {
                name: f.name.clone(),
                kind: f.marginal.kind(),
                units: f.units.clone(),
                missing_allowed: f.marginal.missing_rate() > 0.0,
            })
            .collect();
        CohortSchema::new(features, TARGET_NAME)
    }
}

/// The planted mechanism behind one generated record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTruth {
    pub episode_id: String,
    pub true_risk: f64,
    pub outcome: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub intercept: f64,
    pub records: Vec<RecordTruth>,
}

/// Standardization constants used by the risk mechanism for one feature.
enum RiskScale {
    /// (mean, sd) on the raw value.
    Numeric { mean: f64, sd: f64 },
    /// (rate, sd) on the 0/1 value.
    Boolean { rate: f64, sd: f64 },
    /// Standardized per-category effects.
    Categorical { effects: Vec<f64> },
    Inert,
}

fn risk_scale(feature: &FeatureGen, weight: f64) -> RiskScale {
    if weight == 0.0 {
        return RiskScale::Inert;
    }
    match &feature.marginal {
        Marginal::Integer(s) | Marginal::Real(s) => {
            if s.sd > 0.0 {
                RiskScale::Numeric { mean: s.mean, sd: s.sd }
            } else {
                RiskScale::Inert
            }
        }
        Marginal::Boolean(s) => {
            let variance = s.positive_rate * (1.0 - s.positive_rate);
            if variance > 0.0 {
                RiskScale::Boolean { rate: s.positive_rate, sd: variance.sqrt() }
            } else {
                RiskScale::Inert
            }
        }
        Marginal::Categorical(s) => {
            if s.category_scores.is_empty() {
                return RiskScale::Inert;
            }
            let mean: f64 = s
                .probabilities
                .iter()
                .zip(&s.category_scores)
                .map(|(p, v)| p * v)
                .sum();
            let variance: f64 = s
                .probabilities
                .iter()
                .zip(&s.category_scores)
                .map(|(p, v)| p * (v - mean) * (v - mean))
                .sum();
            if variance > 0.0 {
                let sd = variance.sqrt();
                RiskScale::Categorical {
                    effects: s.category_scores.iter().map(|v| (v - mean) / sd).collect(),
                }
            } else {
                RiskScale::Inert
            }
        }
    }
}

struct Sampler<'a> {
    config: &'a GeneratorConfig,
    scales: Vec<(f64, RiskScale)>,
}

impl<'a> Sampler<'a> {
    fn new(config: &'a GeneratorConfig) -> Sampler<'a> {
        let scales = config
            .features
            .iter()
            .map(|f| {
                let weight = config.risk_weights.get(&f.name).copied().unwrap_or(0.0);
                (weight, risk_scale(f, weight))
            })
            .collect();
        Sampler { config, scales }
    }

    fn truncated_normal(
        spec: &NumericSpec,
        rng: &mut ChaCha8Rng,
        feature: &str,
    ) -> Result<f64> {
        if spec.sd == 0.0 {
            return Ok(spec.mean);
        }
        let normal = Normal::new(spec.mean, spec.sd)
            .map_err(|e| Error::InvalidConfig(format!("feature {feature:?}: {e}")))?;
        for _ in 0..MAX_TRUNCATION_ATTEMPTS {
            let x = normal.sample(rng);
            if x >= spec.lower && x <= spec.upper {
                return Ok(x);
            }
        }
        Err(Error::InvalidConfig(format!(
            "feature {feature:?}: truncation bounds reject virtually all draws"
        )))
    }

    /// Draw one record's feature values (pre-missingness) and its risk.
    fn draw_values(&self, rng: &mut ChaCha8Rng) -> Result<(Vec<Option<Value>>, f64)> {
        let mut values = Vec::with_capacity(self.config.features.len());
        let mut risk = 0.0f64;
        for (feature, (weight, scale)) in self.config.features.iter().zip(&self.scales) {
            match &feature.marginal {
                Marginal::Integer(spec) => {
                    let raw = Self::truncated_normal(spec, rng, &feature.name)?;
                    let rounded = raw.round().clamp(spec.lower.ceil(), spec.upper.floor());
                    if let RiskScale::Numeric { mean, sd } = scale {
                        risk += weight * (rounded - mean) / sd;
                    }
                    values.push(Some(Value::Integer(rounded as i64)));
                }
                Marginal::Real(spec) => {
                    let x = Self::truncated_normal(spec, rng, &feature.name)?;
                    if let RiskScale::Numeric { mean, sd } = scale {
                        risk += weight * (x - mean) / sd;
                    }
                    values.push(Some(Value::Real(x)));
                }
                Marginal::Boolean(spec) => {
                    let b = rng.random_bool(spec.positive_rate);
                    if let RiskScale::Boolean { rate, sd } = scale {
                        risk += weight * (f64::from(u8::from(b)) - rate) / sd;
                    }
                    values.push(Some(Value::Boolean(b)));
                }
                Marginal::Categorical(spec) => {
                    let u: f64 = rng.random();
                    let mut cumulative = 0.0;
                    let mut index = spec.categories.len() - 1;
                    for (i, &p) in spec.probabilities.iter().enumerate() {
                        cumulative += p;
                        if u < cumulative {
                            index = i;
                            break;
                        }
                    }
                    if let RiskScale::Categorical { effects } = scale {
                        risk += weight * effects[index];
                    }
                    values.push(Some(Value::Categorical(spec.categories[index].clone())));
                }
            }
        }
        Ok((values, risk))
    }
}

/// Bisection on the outcome intercept until a pilot sample's mean
/// sigmoid(intercept + risk) hits the target prevalence within 0.002.
pub fn calibrate_intercept(config: &GeneratorConfig) -> Result<f64> {
    config.validate()?;
    let sampler = Sampler::new(config);
    let pilot_master = seed::derive(config.seed, STREAM_PILOT);
    let mut risks = Vec::with_capacity(PILOT_SIZE);
    for i in 0..PILOT_SIZE {
        let mut rng = seed::rng(pilot_master, i as u64);
        let (_, risk) = sampler.draw_values(&mut rng)?;
        risks.push(risk);
    }

    let mean_prob = |intercept: f64| -> f64 {
        risks.iter().map(|&r| sigmoid(intercept + r)).sum::<f64>() / risks.len() as f64
    };

    // bracket widely enough that the sigmoids saturate at both ends
    // whatever the risk magnitudes
    let max_abs_risk = risks.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    let (mut low, mut high) = (-40.0 - max_abs_risk, 40.0 + max_abs_risk);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = (low + high) / 2.0;
        let achieved = mean_prob(mid);
        if (achieved - config.target_prevalence).abs() <= PREVALENCE_TOLERANCE {
            return Ok(mid);
        }
        if achieved < config.target_prevalence {
            low = mid;
        } else {
            high = mid;
        }
    }
    Err(Error::InvalidConfig(
        "intercept bisection did not converge; risk configuration is degenerate".into(),
    ))
}

/// Generate a cohort and its planted ground truth. Deterministic per seed.
pub fn generate_cohort(config: &GeneratorConfig) -> Result<(Cohort, GroundTruth)> {
    config.validate()?;
    let schema = config.schema()?;
    let intercept = calibrate_intercept(config)?;
    let sampler = Sampler::new(config);

    let record_master = seed::derive(config.seed, STREAM_RECORDS);
    let mut episode_rng = seed::rng(config.seed, STREAM_EPISODES);

    let mut records = Vec::with_capacity(config.n);
    let mut truths = Vec::with_capacity(config.n);
    let mut patient = 0usize;
    while records.len() < config.n {
        let episodes = draw_episode_count(&config.episodes_per_patient, &mut episode_rng);
        let patient_id = format!("synth-p{patient:06}");
        patient += 1;
        for _ in 0..episodes {
            if records.len() == config.n {
                break;
            }
            let index = records.len();
            let mut rng = seed::rng(record_master, index as u64);
            let (mut values, risk) = sampler.draw_values(&mut rng)?;
            let outcome = u8::from(rng.random_bool(sigmoid(intercept + risk)));
            // missingness after the outcome draw, independent of it
            for (slot, feature) in values.iter_mut().zip(&config.features) {
                let rate = feature.marginal.missing_rate();
                if rate > 0.0 && rng.random_bool(rate) {
                    *slot = None;
                }
            }
            let episode_id = format!("synth-e{index:06}");
            records.push(PatientRecord {
                patient_id: patient_id.clone(),
                episode_id: episode_id.clone(),
                values,
                outcome: Some(outcome),
            });
            truths.push(RecordTruth { episode_id, true_risk: risk, outcome });
        }
    }

    let cohort = Cohort::new(schema, records)?;
    Ok((cohort, GroundTruth { intercept, records: truths }))
}

fn draw_episode_count(probabilities: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut cumulative = 0.0;
    for (i, &p) in probabilities.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return i + 1;
        }
    }
    probabilities.len()
}

/// AUC of the true risk scores against the drawn outcomes: the ceiling any
/// learner trained on this cohort can approach.
pub fn bayes_auc(truth: &GroundTruth) -> Result<f64> {
    let risks: Vec<f64> = truth.records.iter().map(|r| r.true_risk).collect();
    let outcomes: Vec<u8> = truth.records.iter().map(|r| r.outcome).collect();
    metrics::auc_of(&risks, &outcomes)
}

/// Sibling CSV with one row per generated episode.
pub fn save_ground_truth(truth: &GroundTruth, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::corrupt(path, e.to_string()))?;
    writer
        .write_record(["episode_id", "true_risk", "outcome"])
        .map_err(|e| Error::corrupt(path, e.to_string()))?;
    for record in &truth.records {
        writer
            .write_record([
                record.episode_id.clone(),
                format!("{}", record.true_risk),
                record.outcome.to_string(),
            ])
            .map_err(|e| Error::corrupt(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn numeric(
    name: &str,
    units: Option<&str>,
    integer: bool,
    mean: f64,
    sd: f64,
    lower: f64,
    upper: f64,
    missing_rate: f64,
) -> FeatureGen {
    let spec = NumericSpec { mean, sd, lower, upper, missing_rate };
    FeatureGen {
        name: name.to_string(),
        units: units.map(str::to_string),
        marginal: if integer { Marginal::Integer(spec) } else { Marginal::Real(spec) },
    }
}

fn boolean(name: &str, positive_rate: f64) -> FeatureGen {
    FeatureGen {
        name: name.to_string(),
        units: None,
        marginal: Marginal::Boolean(BooleanSpec { positive_rate, missing_rate: 0.0 }),
    }
}

fn categorical(name: &str, entries: &[(&str, f64, f64)]) -> FeatureGen {
    FeatureGen {
        name: name.to_string(),
        units: None,
        marginal: Marginal::Categorical(CategoricalSpec {
            categories: entries.iter().map(|e| e.0.to_string()).collect(),
            probabilities: entries.iter().map(|e| e.1).collect(),
            category_scores: entries.iter().map(|e| e.2).collect(),
            missing_rate: 0.0,
        }),
    }
}

/// The shipped cohort configuration: published marginals for the default
/// schema, invented categorical vocabularies, and risk weights emphasizing
/// the admitting service, urea, leucocytes, PCR, age, creatinine and
/// albumin so the importance report has a known answer.
///
/// Calibrated so n=20000 cohorts land near prevalence 0.1243 with a Bayes
/// AUC around 0.93.
pub fn default_config(n: usize, seed: u64) -> GeneratorConfig {
    let features = vec![
        categorical("Sex", &[("female", 0.4814, 0.0), ("male", 0.5186, 0.2)]),
        numeric("Age", None, true, 61.327, 18.375, 18.0, 110.0, 0.0),
        boolean("Urgent Admission", 0.5697),
        categorical(
            "Admission Destination",
            &[
                ("WARD", 0.72, 0.0),
                ("ICU", 0.07, 1.5),
                ("SURGICAL", 0.14, -0.5),
                ("OTHER", 0.07, 0.3),
            ],
        ),
        categorical(
            "Service",
            &[
                ("CAR", 0.09, 0.2),
                ("DIG", 0.08, -0.2),
                ("GER", 0.05, 1.2),
                ("HEM", 0.04, 0.9),
                ("MED", 0.24, 0.0),
                ("NEU", 0.07, 0.1),
                ("ONC", 0.08, 1.6),
                ("PNE", 0.09, 0.5),
                ("SUR", 0.20, -0.8),
                ("URO", 0.06, -0.6),
            ],
        ),
        categorical(
            "Admission Cause",
            &[
                ("ILLNESS", 0.63, 0.4),
                ("SURGERY", 0.22, -0.9),
                ("ACCIDENT", 0.09, 0.1),
                ("OTHER", 0.06, 0.0),
            ],
        ),
        numeric("Prev. Stays", None, true, 6.119, 9.502, 0.0, 120.0, 0.0),
        numeric("Barthel Test", None, true, 67.268, 37.919, 0.0, 100.0, 0.8611),
        numeric("Prev. Admissions", None, true, 0.300, 0.789, 0.0, 30.0, 0.0),
        numeric("Prev. Emergency Room", None, true, 0.935, 1.691, 0.0, 50.0, 0.0),
        numeric("Charlson Score", None, true, 4.233, 3.238, 0.0, 33.0, 0.0),
        numeric("Albumin", Some("g/dL"), false, 2.955, 0.677, 0.5, 6.5, 0.7178),
        numeric("Creatinine", Some("mg/dL"), false, 0.505, 1.063, 0.0, 20.0, 0.2592),
        numeric("Hemoglobin", Some("g/dL"), false, 11.703, 2.228, 2.0, 25.0, 0.2211),
        numeric("Leucocytes", Some("Cel/mL"), false, 9.457, 7.389, 0.0, 200.0, 0.2211),
        numeric("PCR", Some("mg/L"), false, 63.083, 84.481, 0.0, 600.0, 0.4639),
        numeric("Sodium", Some("mEq/L"), false, 139.672, 4.354, 100.0, 180.0, 0.2632),
        numeric("Urea", Some("mg/dL"), false, 46.255, 34.628, 0.0, 400.0, 0.2828),
        boolean("Acute Myocardial Infarction", 0.0309),
        boolean("Congestive Heart Failure", 0.0614),
        boolean("Peripheral Vascular Disease", 0.0488),
        boolean("Cerebrovascular Disease", 0.0676),
        boolean("Dementia", 0.015),
        boolean("Chronic Pulmonary Disease", 0.1003),
        boolean("Rheumatic Disease", 0.016),
        boolean("Peptic Ulcer Disease", 0.0157),
        boolean("Mild Liver Disease", 0.0577),
        boolean("Diabetes Without Complications", 0.1319),
        boolean("Diabetes With Complications", 0.0127),
        boolean("Hemiplegia Paraplegia", 0.0128),
        boolean("Renal Disease", 0.0746),
        boolean("Malignancy", 0.182),
        boolean("Moderate Severe Liver Disease", 0.0149),
        boolean("Metastasis", 0.0327),
        boolean("AIDS", 0.0057),
        boolean("Delirium", 0.0012),
    ];

    let weights = [
        ("Urea", 1.61),
        ("Age", 0.98),
        ("Service", 1.12),
        ("Leucocytes", 0.77),
        ("PCR", 0.70),
        ("Creatinine", 0.63),
        ("Albumin", -0.63),
        ("Charlson Score", 0.56),
        ("Hemoglobin", -0.35),
        ("Barthel Test", -0.28),
        ("Prev. Stays", 0.21),
        ("Prev. Admissions", 0.28),
        ("Prev. Emergency Room", 0.14),
        ("Urgent Admission", 0.35),
        ("Admission Destination", 0.42),
        ("Admission Cause", 0.42),
        ("Sex", 0.21),
        ("Malignancy", 0.49),
        ("Metastasis", 0.42),
        ("Dementia", 0.28),
        ("Congestive Heart Failure", 0.25),
        ("Renal Disease", 0.21),
        ("Chronic Pulmonary Disease", 0.14),
        ("Moderate Severe Liver Disease", 0.17),
        ("Mild Liver Disease", 0.08),
        ("Cerebrovascular Disease", 0.11),
        ("Acute Myocardial Infarction", 0.11),
        ("Delirium", 0.07),
        ("AIDS", 0.04),
        ("Peripheral Vascular Disease", 0.07),
        ("Rheumatic Disease", 0.03),
        ("Peptic Ulcer Disease", 0.03),
        ("Diabetes Without Complications", 0.07),
        ("Diabetes With Complications", 0.06),
        ("Hemiplegia Paraplegia", 0.08),
    ];
    let risk_weights = weights
        .iter()
        .map(|(name, w)| (name.to_string(), *w))
        .collect();

    GeneratorConfig {
        n,
        seed,
        target_prevalence: 0.1243,
        episodes_per_patient: vec![1.0],
        features,
        risk_weights,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config(n: usize, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n,
            seed,
            target_prevalence: 0.1243,
            episodes_per_patient: vec![1.0],
            features: vec![
                numeric("x", None, false, 10.0, 2.0, -1e18, 1e18, 0.0),
                boolean("flag", 0.3),
            ],
            risk_weights: BTreeMap::new(),
        }
    }

    #[test]
    fn zero_weights_give_logit_intercept() {
        // oracle: with no risk signal the intercept is exactly the logit
        let oracle = (0.1243f64 / 0.8757).ln();
        let intercept = calibrate_intercept(&tiny_config(10, 5)).unwrap();
        assert!((intercept - oracle).abs() < 0.02, "intercept {intercept} vs {oracle}");
    }

    #[test]
    fn symmetric_prevalence_gives_zero_intercept() {
        let mut config = tiny_config(10, 5);
        config.target_prevalence = 0.5;
        let intercept = calibrate_intercept(&config).unwrap();
        assert!(intercept.abs() < 0.01, "intercept {intercept}");
    }

    #[test]
    fn pilot_prevalence_within_tolerance_for_weighted_config() {
        let mut config = tiny_config(10, 5);
        config.risk_weights.insert("x".into(), 1.5);
        config.risk_weights.insert("flag".into(), 0.7);
        let intercept = calibrate_intercept(&config).unwrap();

        // recompute the pilot mean independently
        let sampler = Sampler::new(&config);
        let pilot_master = seed::derive(config.seed, STREAM_PILOT);
        let mut total = 0.0;
        for i in 0..PILOT_SIZE {
            let mut rng = seed::rng(pilot_master, i as u64);
            let (_, risk) = sampler.draw_values(&mut rng).unwrap();
            total += sigmoid(intercept + risk);
        }
        let achieved = total / PILOT_SIZE as f64;
        assert!((achieved - 0.1243).abs() <= PREVALENCE_TOLERANCE);
    }

    #[test]
    fn empirical_prevalence_tracks_target_with_zero_weights() {
        let (cohort, _) = generate_cohort(&tiny_config(10_000, 7)).unwrap();
        let positives = cohort
            .records
            .iter()
            .filter(|r| r.outcome == Some(1))
            .count();
        let prevalence = positives as f64 / cohort.len() as f64;
        assert!((prevalence - 0.1243).abs() <= 0.01, "prevalence {prevalence}");
    }

    #[test]
    fn zero_sd_features_are_constant() {
        let mut config = tiny_config(50, 3);
        config.features[0] = numeric("x", None, false, 42.5, 0.0, 0.0, 100.0, 0.0);
        let (cohort, _) = generate_cohort(&config).unwrap();
        for record in &cohort.records {
            assert_eq!(record.value(0), Some(&Value::Real(42.5)));
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let (a, ta) = generate_cohort(&tiny_config(200, 11)).unwrap();
        let (b, tb) = generate_cohort(&tiny_config(200, 11)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(ta, tb);
        let (c, _) = generate_cohort(&tiny_config(200, 12)).unwrap();
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn barthel_missing_count_matches_its_rate() {
        let mut config = tiny_config(1000, 21);
        config
            .features
            .push(numeric("Barthel Test", None, true, 67.268, 37.919, 0.0, 100.0, 0.861));
        let (cohort, _) = generate_cohort(&config).unwrap();
        let missing = cohort
            .records
            .iter()
            .filter(|r| r.value(2).is_none())
            .count();
        assert!((820..=900).contains(&missing), "missing {missing}");
    }

    #[test]
    fn missingness_is_independent_of_outcome() {
        let (cohort, _) = generate_cohort(&default_config(20_000, 33)).unwrap();
        let barthel = cohort.schema.position("Barthel Test").unwrap();
        let (mut miss_pos, mut miss_n) = (0usize, 0usize);
        let (mut all_pos, mut all_n) = (0usize, 0usize);
        for record in &cohort.records {
            let positive = record.outcome == Some(1);
            all_n += 1;
            all_pos += usize::from(positive);
            if record.value(barthel).is_none() {
                miss_n += 1;
                miss_pos += usize::from(positive);
            }
        }
        let overall = all_pos as f64 / all_n as f64;
        let among_missing = miss_pos as f64 / miss_n as f64;
        assert!(
            (among_missing - overall).abs() <= 0.02,
            "outcome rate among missing {among_missing} vs overall {overall}"
        );
    }

    #[test]
    fn episodes_per_patient_distribution_is_honored() {
        let mut config = tiny_config(3000, 17);
        config.episodes_per_patient = vec![0.5, 0.25, 0.25];
        let (cohort, _) = generate_cohort(&config).unwrap();
        assert_eq!(cohort.len(), 3000);
        let mut per_patient: std::collections::HashMap<&str, usize> =
            std::collections::HashMap::new();
        for r in &cohort.records {
            *per_patient.entry(r.patient_id.as_str()).or_default() += 1;
        }
        let multi = per_patient.values().filter(|&&c| c > 1).count();
        assert!(multi > 0, "expected some multi-episode patients");
        assert!(per_patient.values().all(|&c| c <= 3));
    }

    #[test]
    fn invalid_probability_sum_names_the_feature() {
        let mut config = tiny_config(10, 1);
        config
            .features
            .push(categorical("Service", &[("A", 0.5, 0.0), ("B", 0.4, 0.0)]));
        match config.validate() {
            Err(Error::InvalidConfig(message)) => assert!(message.contains("Service")),
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn doubling_weights_increases_bayes_auc() {
        let mut weak = tiny_config(4000, 9);
        weak.risk_weights.insert("x".into(), 0.8);
        let (_, truth_weak) = generate_cohort(&weak).unwrap();

        let mut strong = weak.clone();
        strong.risk_weights.insert("x".into(), 1.6);
        let (_, truth_strong) = generate_cohort(&strong).unwrap();

        let weak_auc = bayes_auc(&truth_weak).unwrap();
        let strong_auc = bayes_auc(&truth_strong).unwrap();
        assert!(
            strong_auc > weak_auc,
            "strong {strong_auc} should beat weak {weak_auc}"
        );
    }

    #[test]
    fn zero_weights_give_chance_level_bayes_auc() {
        let (_, truth) = generate_cohort(&tiny_config(8000, 13)).unwrap();
        let auc = bayes_auc(&truth).unwrap();
        assert!((auc - 0.5).abs() <= 0.02, "auc {auc}");
    }

    #[test]
    fn default_config_is_valid_and_matches_default_schema() {
        let config = default_config(100, 1);
        config.validate().unwrap();
        let schema = config.schema().unwrap();
        assert_eq!(schema, crate::schema::default_schema());
    }

    #[test]
    fn default_config_round_trips_through_json() {
        let config = default_config(500, 9);
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back: GeneratorConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn shipped_config_hits_prevalence_and_bayes_window() {
        let (cohort, truth) = generate_cohort(&default_config(20_000, 42)).unwrap();
        let positives = cohort
            .records
            .iter()
            .filter(|r| r.outcome == Some(1))
            .count();
        let prevalence = positives as f64 / cohort.len() as f64;
        assert!((prevalence - 0.1243).abs() <= 0.01, "prevalence {prevalence}");
        let auc = bayes_auc(&truth).unwrap();
        assert!((0.90..=0.96).contains(&auc), "bayes auc {auc}");
    }

    #[test]
    fn marginal_fidelity_against_truncation_adjusted_means() {
        use statrs::distribution::{Continuous, ContinuousCDF, Normal as StatNormal};

        let config = default_config(10_000, 55);
        let (cohort, _) = generate_cohort(&config).unwrap();

        for (index, feature) in config.features.iter().enumerate() {
            let (Marginal::Integer(spec) | Marginal::Real(spec)) = &feature.marginal else {
                continue;
            };
            if spec.sd == 0.0 {
                continue;
            }
            // analytic mean of the truncated normal
            let standard = StatNormal::new(0.0, 1.0).unwrap();
            let a = (spec.lower - spec.mean) / spec.sd;
            let b = (spec.upper - spec.mean) / spec.sd;
            let mass = standard.cdf(b) - standard.cdf(a);
            let expected = spec.mean + spec.sd * (standard.pdf(a) - standard.pdf(b)) / mass;

            let observed: Vec<f64> = cohort
                .records
                .iter()
                .filter_map(|r| r.value(index).and_then(|v| v.as_f64()))
                .collect();
            let sample_mean = observed.iter().sum::<f64>() / observed.len() as f64;
            // 3 sigma of the sample mean, plus slack for integer rounding
            let tolerance = 3.0 * spec.sd / (observed.len() as f64).sqrt() + 0.5;
            assert!(
                (sample_mean - expected).abs() <= tolerance,
                "{}: sample {sample_mean} vs truncated-normal {expected}",
                feature.name
            );
        }
    }

    #[test]
    fn boolean_rates_match_configuration() {
        let config = default_config(10_000, 56);
        let (cohort, _) = generate_cohort(&config).unwrap();
        for (index, feature) in config.features.iter().enumerate() {
            let Marginal::Boolean(spec) = &feature.marginal else {
                continue;
            };
            let positives = cohort
                .records
                .iter()
                .filter(|r| r.value(index) == Some(&Value::Boolean(true)))
                .count();
            let rate = positives as f64 / cohort.len() as f64;
            let sd = (spec.positive_rate * (1.0 - spec.positive_rate) / 10_000.0).sqrt();
            assert!(
                (rate - spec.positive_rate).abs() <= 3.0 * sd + 1e-9,
                "{}: rate {rate} vs {}",
                feature.name,
                spec.positive_rate
            );
        }
    }

    #[test]
    fn age_mean_is_close_to_the_published_value() {
        let (cohort, _) = generate_cohort(&default_config(5000, 77)).unwrap();
        let schema = cohort.schema.clone();
        let summary = crate::schema::summarize(&cohort.records, &schema).unwrap();
        let age = schema.position("Age").unwrap();
        let mean = summary[age].mean.unwrap();
        assert!((mean - 61.327).abs() <= 1.0, "age mean {mean}");
    }
}
