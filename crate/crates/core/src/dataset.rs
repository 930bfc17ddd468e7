//! CSV ingestion, one-episode-per-patient subsampling, categorical encoding,
//! and stratified splitting.
//!
//! CSV contract: UTF-8, comma-separated, first row is the header; empty
//! string means missing; booleans are 0/1; decimal point (no locale).
//! Reserved columns: `patient_id`, `episode_id`, `exitus_1y`.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{validate_record, CohortSchema, FeatureKind, PatientRecord, Value};
use crate::seed;

/// A validated set of records sharing one schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub schema: CohortSchema,
    pub records: Vec<PatientRecord>,
}

impl Cohort {
    /// Build a cohort, checking every record against the schema.
    pub fn new(schema: CohortSchema, records: Vec<PatientRecord>) -> Result<Self> {
        for (index, record) in records.iter().enumerate() {
            let validation = validate_record(record, &schema);
            if !validation.is_ok() {
                let details = validation
                    .violations()
                    .iter()
                    .map(|v| format!("{}: {}", v.feature, v.message))
                    .collect::<Vec<_>>()
                    .join("; ");
                return Err(Error::InvalidRecord { index, details });
            }
        }
        Ok(Cohort { schema, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Outcome vector, present only when every record carries an outcome.
    pub fn labels(&self) -> Option<Vec<u8>> {
        self.records.iter().map(|r| r.outcome).collect()
    }
}

/// Issue raised by one CSV row in lenient mode.
#[derive(Debug, Clone, Serialize)]
pub struct RowIssue {
    /// 1-based data row (header excluded).
    pub row: usize,
    pub message: String,
}

enum ColumnRole {
    PatientId,
    EpisodeId,
    Target,
    Feature(usize),
}

fn header_roles(headers: &csv::StringRecord, schema: &CohortSchema) -> Result<Vec<ColumnRole>> {
    let mut roles = Vec::with_capacity(headers.len());
    let mut seen: HashMap<&str, ()> = HashMap::new();
    let mut feature_seen = vec![false; schema.len()];

    for name in headers {
        if seen.insert(name, ()).is_some() {
            return Err(Error::DuplicateColumn(name.to_string()));
        }
        let role = if name == "patient_id" {
            ColumnRole::PatientId
        } else if name == "episode_id" {
            ColumnRole::EpisodeId
        } else if name == schema.target_name() {
            ColumnRole::Target
        } else if let Some(idx) = schema.position(name) {
            feature_seen[idx] = true;
            ColumnRole::Feature(idx)
        } else {
            return Err(Error::UnknownColumn(name.to_string()));
        };
        roles.push(role);
    }

    if let Some(idx) = feature_seen.iter().position(|seen| !seen) {
        return Err(Error::MissingColumn(schema.features()[idx].name.clone()));
    }
    Ok(roles)
}

fn parse_cell(text: &str, kind: FeatureKind) -> std::result::Result<Option<Value>, String> {
    if text.is_empty() {
        return Ok(None);
    }
    let value = match kind {
        FeatureKind::Integer => Value::Integer(
            text.parse::<i64>()
                .map_err(|_| format!("expected an integer, got {text:?}"))?,
        ),
        FeatureKind::Real => {
            let x = text
                .parse::<f64>()
                .map_err(|_| format!("expected a real number, got {text:?}"))?;
            if !x.is_finite() {
                return Err(format!("expected a finite real number, got {text:?}"));
            }
            Value::Real(x)
        }
        FeatureKind::Boolean => match text {
            "0" => Value::Boolean(false),
            "1" => Value::Boolean(true),
            other => return Err(format!("expected 0 or 1, got {other:?}")),
        },
        FeatureKind::Categorical => Value::Categorical(text.to_string()),
    };
    Ok(Some(value))
}

fn record_from_row(
    row: &csv::StringRecord,
    row_number: usize,
    roles: &[ColumnRole],
    schema: &CohortSchema,
) -> std::result::Result<PatientRecord, (String, String)> {
    let mut record = PatientRecord {
        patient_id: String::new(),
        episode_id: String::new(),
        values: vec![None; schema.len()],
        outcome: None,
    };

    for (role, cell) in roles.iter().zip(row.iter()) {
        match role {
            ColumnRole::PatientId => record.patient_id = cell.to_string(),
            ColumnRole::EpisodeId => record.episode_id = cell.to_string(),
            ColumnRole::Target => {
                record.outcome = match cell {
                    "" => None,
                    "0" => Some(0),
                    "1" => Some(1),
                    other => {
                        return Err((
                            schema.target_name().to_string(),
                            format!("expected 0, 1 or empty, got {other:?}"),
                        ))
                    }
                };
            }
            ColumnRole::Feature(idx) => {
                let spec = &schema.features()[*idx];
                record.values[*idx] =
                    parse_cell(cell, spec.kind).map_err(|msg| (spec.name.clone(), msg))?;
            }
        }
    }

    if record.patient_id.is_empty() {
        record.patient_id = format!("row-{row_number}");
    }
    if record.episode_id.is_empty() {
        record.episode_id = format!("row-{row_number}");
    }

    let validation = validate_record(&record, schema);
    if let Some(v) = validation.violations().first() {
        return Err((v.feature.clone(), v.message.clone()));
    }
    Ok(record)
}

/// Load a cohort from CSV. The header must contain every schema feature
/// (any order) and may contain the reserved id/target columns. The first
/// offending cell aborts the load with its row and column.
pub fn load_csv(path: impl AsRef<Path>, schema: &CohortSchema) -> Result<Cohort> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::corrupt(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::corrupt(path, e.to_string()))?
        .clone();
    let roles = header_roles(&headers, schema)?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let row = row.map_err(|e| Error::corrupt(path, e.to_string()))?;
        let record = record_from_row(&row, row_number, &roles, schema).map_err(
            |(column, message)| Error::Cell { row: row_number, column, message },
        )?;
        records.push(record);
    }
    Ok(Cohort { schema: schema.clone(), records })
}

/// Lenient load for the batch scorer: rows that fail to parse or validate
/// are reported as issues instead of aborting.
pub fn load_csv_lenient(
    path: impl AsRef<Path>,
    schema: &CohortSchema,
) -> Result<(Cohort, Vec<RowIssue>)> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::corrupt(path, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::corrupt(path, e.to_string()))?
        .clone();
    let roles = header_roles(&headers, schema)?;

    let mut records = Vec::new();
    let mut issues = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_number = i + 1;
        let row = match row {
            Ok(row) => row,
            Err(e) => {
                issues.push(RowIssue { row: row_number, message: e.to_string() });
                continue;
            }
        };
        if row.len() != roles.len() {
            issues.push(RowIssue {
                row: row_number,
                message: format!("expected {} fields, got {}", roles.len(), row.len()),
            });
            continue;
        }
        match record_from_row(&row, row_number, &roles, schema) {
            Ok(record) => records.push(record),
            Err((column, message)) => {
                issues.push(RowIssue { row: row_number, message: format!("{column}: {message}") });
            }
        }
    }
    Ok((Cohort { schema: schema.clone(), records }, issues))
}

fn format_value(value: &Value) -> String {
    match value {
        Value::Categorical(c) => c.clone(),
        Value::Boolean(b) => if *b { "1" } else { "0" }.to_string(),
        Value::Integer(i) => i.to_string(),
        Value::Real(r) => format!("{r}"),
    }
}

/// Write a cohort in the module's CSV format (ids first, features in schema
/// order, target last).
pub fn write_csv(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::corrupt(path, e.to_string()))?;

    let mut header = vec!["patient_id".to_string(), "episode_id".to_string()];
    header.extend(cohort.schema.features().iter().map(|f| f.name.clone()));
    header.push(cohort.schema.target_name().to_string());
    writer
        .write_record(&header)
        .map_err(|e| Error::corrupt(path, e.to_string()))?;

    for record in &cohort.records {
        let mut row = vec![record.patient_id.clone(), record.episode_id.clone()];
        for value in &record.values {
            row.push(value.as_ref().map(format_value).unwrap_or_default());
        }
        row.push(record.outcome.map(|o| o.to_string()).unwrap_or_default());
        writer
            .write_record(&row)
            .map_err(|e| Error::corrupt(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Keep exactly one episode per patient, chosen uniformly at random.
/// Deterministic for a given seed; the surviving records keep their
/// original relative order.
pub fn one_episode_per_patient(cohort: &Cohort, seed: u64) -> Cohort {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<usize>> = HashMap::new();
    for (i, record) in cohort.records.iter().enumerate() {
        let id = record.patient_id.as_str();
        groups.entry(id).or_insert_with(|| {
            order.push(id);
            Vec::new()
        });
        groups.get_mut(id).unwrap().push(i);
    }

    let mut rng = seed::rng(seed, 0x01);
    let mut keep: Vec<usize> = order
        .iter()
        .map(|id| {
            let episodes = &groups[id];
            episodes[rng.random_range(0..episodes.len())]
        })
        .collect();
    keep.sort_unstable();

    Cohort {
        schema: cohort.schema.clone(),
        records: keep.iter().map(|&i| cohort.records[i].clone()).collect(),
    }
}

/// How one feature maps onto matrix columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnBlock {
    Numeric,
    Boolean,
    /// One column per observed category, vocabulary sorted lexically.
    OneHot(Vec<String>),
}

impl ColumnBlock {
    pub fn width(&self) -> usize {
        match self {
            ColumnBlock::Numeric | ColumnBlock::Boolean => 1,
            ColumnBlock::OneHot(vocab) => vocab.len(),
        }
    }
}

/// Column span of one source feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureColumns {
    pub feature: String,
    /// Index of the feature in the schema this encoder was fitted on.
    pub feature_index: usize,
    pub start: usize,
    pub block: ColumnBlock,
}

impl FeatureColumns {
    pub fn width(&self) -> usize {
        self.block.width()
    }

    pub fn columns(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width()
    }
}

/// Fitted encoding: per-categorical vocabularies and the resulting column
/// layout. Vocabularies are fixed after fitting; unseen categories encode
/// to an all-zeros block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    groups: Vec<FeatureColumns>,
    n_cols: usize,
    /// Column index -> group index.
    column_group: Vec<usize>,
}

impl Encoder {
    pub fn groups(&self) -> &[FeatureColumns] {
        &self.groups
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Name of the source feature behind a matrix column.
    pub fn feature_of_column(&self, col: usize) -> &str {
        &self.groups[self.column_group[col]].feature
    }

    pub fn columns_for(&self, feature: &str) -> Option<std::ops::Range<usize>> {
        self.groups
            .iter()
            .find(|g| g.feature == feature)
            .map(|g| g.columns())
    }
}

/// Learn the encoding from the full cohort.
pub fn fit_encoder(cohort: &Cohort) -> Result<Encoder> {
    let rows: Vec<usize> = (0..cohort.len()).collect();
    fit_encoder_on(cohort, &rows)
}

/// Learn the encoding from a row subset (the training rows of a split).
pub fn fit_encoder_on(cohort: &Cohort, rows: &[usize]) -> Result<Encoder> {
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let mut groups = Vec::with_capacity(cohort.schema.len());
    let mut start = 0usize;
    for (feature_index, spec) in cohort.schema.features().iter().enumerate() {
        let block = match spec.kind {
            FeatureKind::Integer | FeatureKind::Real => ColumnBlock::Numeric,
            FeatureKind::Boolean => ColumnBlock::Boolean,
            FeatureKind::Categorical => {
                let mut vocab: Vec<String> = Vec::new();
                for &row in rows {
                    if let Some(Value::Categorical(c)) = cohort.records[row].value(feature_index) {
                        if !vocab.iter().any(|v| v == c) {
                            vocab.push(c.clone());
                        }
                    }
                }
                vocab.sort();
                ColumnBlock::OneHot(vocab)
            }
        };
        let width = block.width();
        groups.push(FeatureColumns {
            feature: spec.name.clone(),
            feature_index,
            start,
            block,
        });
        start += width;
    }

    let mut column_group = vec![0usize; start];
    for (gi, g) in groups.iter().enumerate() {
        for c in g.columns() {
            column_group[c] = gi;
        }
    }
    Ok(Encoder { groups, n_cols: start, column_group })
}

/// Row-major numeric matrix with a per-cell missing mask and the layout it
/// was encoded under.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedMatrix {
    pub(crate) n_rows: usize,
    pub(crate) n_cols: usize,
    pub(crate) values: Vec<f64>,
    pub(crate) missing: Vec<bool>,
    pub(crate) labels: Option<Vec<u8>>,
    pub(crate) encoder: Encoder,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.n_cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    pub fn any_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// Take a row subset (in the given order), keeping the layout.
    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols);
        let mut missing = Vec::with_capacity(rows.len() * self.n_cols);
        for &row in rows {
            values.extend_from_slice(self.row(row));
            missing.extend_from_slice(&self.missing[row * self.n_cols..(row + 1) * self.n_cols]);
        }
        let labels = self
            .labels
            .as_ref()
            .map(|l| rows.iter().map(|&r| l[r]).collect());
        EncodedMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            values,
            missing,
            labels,
            encoder: self.encoder.clone(),
        }
    }

    /// Project onto a column subset. The projected layout exposes each kept
    /// column as a standalone numeric feature.
    pub fn select_columns(&self, cols: &[usize]) -> EncodedMatrix {
        let mut groups = Vec::with_capacity(cols.len());
        for (new_col, &col) in cols.iter().enumerate() {
            let feature = self.encoder.feature_of_column(col).to_string();
            groups.push(FeatureColumns {
                feature,
                feature_index: new_col,
                start: new_col,
                block: ColumnBlock::Numeric,
            });
        }
        let column_group = (0..cols.len()).collect();
        let encoder = Encoder { groups, n_cols: cols.len(), column_group };

        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        let mut missing = Vec::with_capacity(self.n_rows * cols.len());
        for row in 0..self.n_rows {
            for &col in cols {
                values.push(self.value(row, col));
                missing.push(self.is_missing(row, col));
            }
        }
        EncodedMatrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            values,
            missing,
            labels: self.labels.clone(),
            encoder,
        }
    }
}

#[cfg(test)]
impl EncodedMatrix {
    /// Assemble a matrix from raw parts; callers guarantee consistency.
    pub(crate) fn from_parts(
        n_rows: usize,
        values: Vec<f64>,
        missing: Vec<bool>,
        labels: Option<Vec<u8>>,
        encoder: Encoder,
    ) -> EncodedMatrix {
        let n_cols = encoder.n_cols();
        debug_assert_eq!(values.len(), n_rows * n_cols);
        debug_assert_eq!(missing.len(), values.len());
        EncodedMatrix { n_rows, n_cols, values, missing, labels, encoder }
    }
}

#[cfg(test)]
impl Encoder {
    /// Layout of standalone numeric columns for matrices built in tests.
    pub(crate) fn numeric(names: &[&str]) -> Encoder {
        let groups = names
            .iter()
            .enumerate()
            .map(|(i, name)| FeatureColumns {
                feature: name.to_string(),
                feature_index: i,
                start: i,
                block: ColumnBlock::Numeric,
            })
            .collect();
        Encoder {
            groups,
            n_cols: names.len(),
            column_group: (0..names.len()).collect(),
        }
    }
}

/// Encode a cohort under a fitted encoder. The mask marks exactly the
/// source-missing cells; labels are copied when every record has one.
pub fn encode(cohort: &Cohort, encoder: &Encoder) -> EncodedMatrix {
    let n_rows = cohort.len();
    let n_cols = encoder.n_cols();
    let mut values = vec![0.0f64; n_rows * n_cols];
    let mut missing = vec![false; n_rows * n_cols];

    for (row, record) in cohort.records.iter().enumerate() {
        let base = row * n_cols;
        for group in encoder.groups() {
            match (&group.block, record.value(group.feature_index)) {
                (ColumnBlock::Numeric | ColumnBlock::Boolean, Some(value)) => {
                    values[base + group.start] =
                        value.as_f64().expect("validated numeric value");
                }
                (ColumnBlock::Numeric | ColumnBlock::Boolean, None) => {
                    missing[base + group.start] = true;
                }
                (ColumnBlock::OneHot(vocab), Some(value)) => {
                    let category = value.as_category().expect("validated categorical value");
                    // unseen categories leave the block all-zeros
                    if let Ok(pos) = vocab.binary_search_by(|v| v.as_str().cmp(category)) {
                        values[base + group.start + pos] = 1.0;
                    }
                }
                (ColumnBlock::OneHot(_), None) => {
                    for col in group.columns() {
                        missing[base + col] = true;
                    }
                }
            }
        }
    }

    EncodedMatrix {
        n_rows,
        n_cols,
        values,
        missing,
        labels: cohort.labels(),
        encoder: encoder.clone(),
    }
}

/// Train/test row partition, reproducible from its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor() as usize
}

/// Stratified holdout split: per-class test counts are round(count x
/// fraction) with the rounding remainder absorbed by the majority class so
/// the total matches round(n x fraction); assignment is uniform within each
/// class and deterministic per seed.
pub fn stratified_split(labels: &[u8], test_fraction: f64, seed: u64) -> Result<SplitIndices> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "test_fraction must lie in (0,1), got {test_fraction}"
        )));
    }
    let mut pos: Vec<usize> = Vec::new();
    let mut neg: Vec<usize> = Vec::new();
    for (i, &label) in labels.iter().enumerate() {
        if label == 1 {
            pos.push(i);
        } else {
            neg.push(i);
        }
    }
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::SingleClass);
    }

    let total_target = round_half_up(labels.len() as f64 * test_fraction);
    let mut pos_target = round_half_up(pos.len() as f64 * test_fraction);
    let mut neg_target = round_half_up(neg.len() as f64 * test_fraction);

    // absorb the rounding remainder into the majority class
    let sum = pos_target + neg_target;
    let majority = if pos.len() >= neg.len() { &mut pos_target } else { &mut neg_target };
    if sum > total_target {
        *majority -= (sum - total_target).min(*majority);
    } else {
        *majority += total_target - sum;
    }
    let pos_target = pos_target.min(pos.len());
    let neg_target = neg_target.min(neg.len());

    let mut rng = seed::rng(seed, 0x02);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);

    let mut test: Vec<usize> = pos[..pos_target]
        .iter()
        .chain(&neg[..neg_target])
        .copied()
        .collect();
    let mut train: Vec<usize> = pos[pos_target..]
        .iter()
        .chain(&neg[neg_target..])
        .copied()
        .collect();
    test.sort_unstable();
    train.sort_unstable();

    Ok(SplitIndices { train, test, seed })
}
