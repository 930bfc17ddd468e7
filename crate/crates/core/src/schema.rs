//! Cohort schema, record representation, and validation.
//!
//! The default schema describes the 36 admission-time features used by the
//! mortality models: demographic and administrative fields, laboratory
//! results, and a list of disease flags. Records hold one value (or an
//! explicit missing) per feature plus an optional binary outcome.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the binary target column: death within 365 days of admission.
pub const TARGET_NAME: &str = "exitus_1y";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Categorical,
    Boolean,
    Integer,
    Real,
}

impl FeatureKind {
    pub fn is_numeric(self) -> bool {
        matches!(self, FeatureKind::Integer | FeatureKind::Real)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub units: Option<String>,
    pub missing_allowed: bool,
}

impl FeatureSpec {
    fn new(name: &str, kind: FeatureKind, units: Option<&str>, missing_allowed: bool) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind,
            units: units.map(str::to_string),
            missing_allowed,
        }
    }
}

/// Ordered feature list plus the target name. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortSchema {
    features: Vec<FeatureSpec>,
    target_name: String,
}

impl CohortSchema {
    /// Build a schema from an explicit feature list. Feature names must be
    /// unique and must not collide with the reserved column names.
    pub fn new(features: Vec<FeatureSpec>, target_name: impl Into<String>) -> Result<Self> {
        let target_name = target_name.into();
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.clone()) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate feature name {:?}",
                    f.name
                )));
            }
            if f.name == target_name || f.name == "patient_id" || f.name == "episode_id" {
                return Err(Error::InvalidConfig(format!(
                    "feature name {:?} collides with a reserved column",
                    f.name
                )));
            }
        }
        Ok(CohortSchema { features, target_name })
    }

    pub fn features(&self) -> &[FeatureSpec] {
        &self.features
    }

    pub fn target_name(&self) -> &str {
        &self.target_name
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<&FeatureSpec> {
        self.features.iter().find(|f| f.name == name)
    }
}

/// A single typed feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Value {
    Categorical(String),
    Boolean(bool),
    Integer(i64),
    Real(f64),
}

impl Value {
    pub fn kind(&self) -> FeatureKind {
        match self {
            Value::Categorical(_) => FeatureKind::Categorical,
            Value::Boolean(_) => FeatureKind::Boolean,
            Value::Integer(_) => FeatureKind::Integer,
            Value::Real(_) => FeatureKind::Real,
        }
    }

    /// Numeric view used by encoders and summaries: booleans map to 0/1,
    /// categoricals have no numeric view.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Categorical(_) => None,
            Value::Boolean(b) => Some(if *b { 1.0 } else { 0.0 }),
            Value::Integer(i) => Some(*i as f64),
            Value::Real(r) => Some(*r),
        }
    }

    pub fn as_category(&self) -> Option<&str> {
        match self {
            Value::Categorical(c) => Some(c),
            _ => None,
        }
    }
}

/// One admission episode: identifiers, per-feature values aligned with a
/// schema's feature order, and an optional binary outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub episode_id: String,
    pub values: Vec<Option<Value>>,
    /// Exitus within 365 days of admission, when known.
    pub outcome: Option<u8>,
}

impl PatientRecord {
    pub fn value(&self, index: usize) -> Option<&Value> {
        self.values.get(index).and_then(|v| v.as_ref())
    }
}

/// A single rule breach found by [`validate_record`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature: String,
    pub message: String,
}

/// Outcome of validating one record against a schema. Violations are data,
/// not faults: an invalid record is a normal result.
#[derive(Debug, Clone, PartialEq)]
pub enum Validation {
    Ok,
    Violations(Vec<Violation>),
}

impl Validation {
    pub fn is_ok(&self) -> bool {
        matches!(self, Validation::Ok)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Validation::Ok => &[],
            Validation::Violations(v) => v,
        }
    }
}

/// The default 36-feature schema. Deterministic: identical across calls.
pub fn default_schema() -> CohortSchema {
    use FeatureKind::{Boolean, Categorical, Integer, Real};

    let mut features = vec![
        FeatureSpec::new("Sex", Categorical, None, false),
        FeatureSpec::new("Age", Integer, None, false),
        FeatureSpec::new("Urgent Admission", Boolean, None, false),
        FeatureSpec::new("Admission Destination", Categorical, None, false),
        FeatureSpec::new("Service", Categorical, None, false),
        FeatureSpec::new("Admission Cause", Categorical, None, false),
        FeatureSpec::new("Prev. Stays", Integer, None, false),
        FeatureSpec::new("Barthel Test", Integer, None, true),
        FeatureSpec::new("Prev. Admissions", Integer, None, false),
        FeatureSpec::new("Prev. Emergency Room", Integer, None, false),
        FeatureSpec::new("Charlson Score", Integer, None, false),
        FeatureSpec::new("Albumin", Real, Some("g/dL"), true),
        FeatureSpec::new("Creatinine", Real, Some("mg/dL"), true),
        FeatureSpec::new("Hemoglobin", Real, Some("g/dL"), true),
        FeatureSpec::new("Leucocytes", Real, Some("Cel/mL"), true),
        FeatureSpec::new("PCR", Real, Some("mg/L"), true),
        FeatureSpec::new("Sodium", Real, Some("mEq/L"), true),
        FeatureSpec::new("Urea", Real, Some("mg/dL"), true),
    ];
    for flag in DISEASE_FLAGS {
        features.push(FeatureSpec::new(flag, Boolean, None, false));
    }

    CohortSchema::new(features, TARGET_NAME).expect("default schema is well-formed")
}

/// The 18 disease flags, in schema order.
pub const DISEASE_FLAGS: [&str; 18] = [
    "Acute Myocardial Infarction",
    "Congestive Heart Failure",
    "Peripheral Vascular Disease",
    "Cerebrovascular Disease",
    "Dementia",
    "Chronic Pulmonary Disease",
    "Rheumatic Disease",
    "Peptic Ulcer Disease",
    "Mild Liver Disease",
    "Diabetes Without Complications",
    "Diabetes With Complications",
    "Hemiplegia Paraplegia",
    "Renal Disease",
    "Malignancy",
    "Moderate Severe Liver Disease",
    "Metastasis",
    "AIDS",
    "Delirium",
];

/// Check one record against a schema. Ok iff every present value matches its
/// feature's kind, every missing value is allowed to be missing, and the
/// outcome (when present) is 0 or 1.
pub fn validate_record(record: &PatientRecord, schema: &CohortSchema) -> Validation {
    let mut violations = Vec::new();

    if record.values.len() != schema.len() {
        violations.push(Violation {
            feature: String::new(),
            message: format!(
                "record has {} values, schema expects {}",
                record.values.len(),
                schema.len()
            ),
        });
        return Validation::Violations(violations);
    }

    for (spec, slot) in schema.features().iter().zip(&record.values) {
        match slot {
            None => {
                if !spec.missing_allowed {
                    violations.push(Violation {
                        feature: spec.name.clone(),
                        message: "value is missing but the feature does not allow missing".into(),
                    });
                }
            }
            Some(value) => {
                if value.kind() != spec.kind {
                    violations.push(Violation {
                        feature: spec.name.clone(),
                        message: format!(
                            "expected {:?} value, got {:?}",
                            spec.kind,
                            value.kind()
                        ),
                    });
                } else if let Value::Real(r) = value {
                    if !r.is_finite() {
                        violations.push(Violation {
                            feature: spec.name.clone(),
                            message: format!("non-finite value {r}"),
                        });
                    }
                }
            }
        }
    }

    if let Some(outcome) = record.outcome {
        if outcome > 1 {
            violations.push(Violation {
                feature: TARGET_NAME.into(),
                message: format!("outcome must be 0 or 1, got {outcome}"),
            });
        }
    }

    if violations.is_empty() {
        Validation::Ok
    } else {
        Validation::Violations(violations)
    }
}

/// Distribution summary for one feature across a cohort.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub name: String,
    pub kind: FeatureKind,
    pub missing: usize,
    /// Mean over non-missing values; numeric features only.
    pub mean: Option<f64>,
    /// Sample standard deviation (n-1 denominator); numeric features with
    /// at least two observed values.
    pub sd: Option<f64>,
    /// Observed level frequencies; boolean and categorical features.
    pub levels: Vec<(String, usize)>,
}

/// Per-feature summary over a cohort: mean and sample SD for numeric
/// features, level frequencies for boolean/categorical, missing counts exact.
pub fn summarize(records: &[PatientRecord], schema: &CohortSchema) -> Result<Vec<FeatureSummary>> {
    if records.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let mut out = Vec::with_capacity(schema.len());
    for (index, spec) in schema.features().iter().enumerate() {
        let mut missing = 0usize;
        let mut numeric = Vec::new();
        let mut levels: Vec<(String, usize)> = Vec::new();

        for record in records {
            match record.value(index) {
                None => missing += 1,
                Some(value) => {
                    if spec.kind.is_numeric() {
                        if let Some(x) = value.as_f64() {
                            numeric.push(x);
                        }
                    } else {
                        let level = match value {
                            Value::Boolean(b) => if *b { "1" } else { "0" }.to_string(),
                            Value::Categorical(c) => c.clone(),
                            other => format!("{other:?}"),
                        };
                        match levels.iter_mut().find(|(l, _)| *l == level) {
                            Some((_, n)) => *n += 1,
                            None => levels.push((level, 1)),
                        }
                    }
                }
            }
        }
        levels.sort_by(|a, b| a.0.cmp(&b.0));

        let (mean, sd) = if spec.kind.is_numeric() && !numeric.is_empty() {
            let n = numeric.len() as f64;
            let mean = numeric.iter().sum::<f64>() / n;
            let sd = if numeric.len() >= 2 {
                let ss = numeric.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
                Some((ss / (n - 1.0)).sqrt())
            } else {
                None
            };
            (Some(mean), sd)
        } else {
            (None, None)
        };

        out.push(FeatureSummary {
            name: spec.name.clone(),
            kind: spec.kind,
            missing,
            mean,
            sd,
            levels,
        });
    }
    Ok(out)
}
