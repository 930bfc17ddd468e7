//! Clinical comparator models: a configurable point-based prognostic table
//! and a four-feature linear index refit against the one-year target.
//!
//! The point table is loaded from configuration, one item per line:
//! `name, feature, op, cutpoint, points` with op one of `<, <=, >, >=, ==,
//! flag`. Missing predicate inputs contribute zero points.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::schema::{CohortSchema, PatientRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    /// Boolean feature is positive; the cutpoint is ignored.
    Flag,
}

impl Comparator {
    fn parse(text: &str) -> Option<Comparator> {
        match text {
            "<" => Some(Comparator::Lt),
            "<=" => Some(Comparator::Le),
            ">" => Some(Comparator::Gt),
            ">=" => Some(Comparator::Ge),
            "==" => Some(Comparator::Eq),
            "flag" => Some(Comparator::Flag),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfundItem {
    pub name: String,
    pub feature: String,
    pub comparator: Comparator,
    pub cutpoint: f64,
    pub points: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfundTable {
    pub items: Vec<ProfundItem>,
}

impl ProfundTable {
    /// Parse the line-oriented config format. `#` starts a comment.
    pub fn parse(text: &str) -> Result<ProfundTable> {
        let mut items = Vec::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(Error::InvalidConfig(format!(
                    "line {}: expected 5 comma-separated fields, got {}",
                    line_no + 1,
                    fields.len()
                )));
            }
            let comparator = Comparator::parse(fields[2]).ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "line {}: unknown comparator {:?}",
                    line_no + 1,
                    fields[2]
                ))
            })?;
            let cutpoint = if comparator == Comparator::Flag {
                0.0
            } else {
                fields[3].parse::<f64>().map_err(|_| {
                    Error::InvalidConfig(format!(
                        "line {}: cutpoint {:?} is not a number",
                        line_no + 1,
                        fields[3]
                    ))
                })?
            };
            let points = fields[4].parse::<u32>().map_err(|_| {
                Error::InvalidConfig(format!(
                    "line {}: points {:?} must be a non-negative integer",
                    line_no + 1,
                    fields[4]
                ))
            })?;
            items.push(ProfundItem {
                name: fields[0].to_string(),
                feature: fields[1].to_string(),
                comparator,
                cutpoint,
                points,
            });
        }
        Ok(ProfundTable { items })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ProfundTable> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ProfundTable::parse(&text)
    }

    /// Every feature the table references must exist in the schema.
    pub fn check_features(&self, schema: &CohortSchema) -> Result<()> {
        for item in &self.items {
            if schema.position(&item.feature).is_none() {
                return Err(Error::UnknownFeature(item.feature.clone()));
            }
        }
        Ok(())
    }

    pub fn max_points(&self) -> u32 {
        self.items.iter().map(|i| i.points).sum()
    }
}

/// Sum of points over satisfied predicates. Missing inputs contribute zero.
pub fn profund_score(
    record: &PatientRecord,
    table: &ProfundTable,
    schema: &CohortSchema,
) -> Result<u32> {
    let mut score = 0u32;
    for item in &table.items {
        let index = schema
            .position(&item.feature)
            .ok_or_else(|| Error::UnknownFeature(item.feature.clone()))?;
        let Some(value) = record.value(index).and_then(|v| v.as_f64()) else {
            continue;
        };
        let satisfied = match item.comparator {
            Comparator::Lt => value < item.cutpoint,
            Comparator::Le => value <= item.cutpoint,
            Comparator::Gt => value > item.cutpoint,
            Comparator::Ge => value >= item.cutpoint,
            Comparator::Eq => value == item.cutpoint,
            Comparator::Flag => value == 1.0,
        };
        if satisfied {
            score += item.points;
        }
    }
    Ok(score)
}

/// Linear index over four features, refit by ordinary least squares against
/// the binary one-year target. Scores are the unbounded linear predictor;
/// only their ranking and thresholding are used downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuurmanModel {
    pub intercept: f64,
    pub coefficients: [f64; 4],
    pub feature_names: Vec<String>,
}

/// Number of features the linear baseline expects.
pub const BUURMAN_FEATURES: usize = 4;

/// Solve the normal equations by Gaussian elimination with partial
/// pivoting. A vanishing pivot names the degenerate design column.
#[allow(clippy::needless_range_loop)]
fn solve_normal_equations(
    design: &EncodedMatrix,
    targets: &[f64],
) -> Result<(f64, [f64; 4])> {
    let n = design.n_rows();
    let p = BUURMAN_FEATURES + 1;

    // X'X and X'y with an implicit leading intercept column
    let x = |row: usize, col: usize| -> f64 {
        if col == 0 {
            1.0
        } else {
            design.value(row, col - 1)
        }
    };
    let mut a = vec![[0.0f64; 6]; p]; // augmented [X'X | X'y]
    for i in 0..p {
        for j in 0..p {
            let mut sum = 0.0;
            for r in 0..n {
                sum += x(r, i) * x(r, j);
            }
            a[i][j] = sum;
        }
        let mut sum = 0.0;
        for r in 0..n {
            sum += x(r, i) * targets[r];
        }
        a[i][p] = sum;
    }

    let scale: f64 = (0..p).map(|i| a[i][i].abs()).fold(0.0, f64::max).max(1.0);
    let tolerance = 1e-10 * scale;

    for col in 0..p {
        let pivot_row = (col..p)
            .max_by(|&r1, &r2| a[r1][col].abs().total_cmp(&a[r2][col].abs()))
            .unwrap();
        if a[pivot_row][col].abs() < tolerance {
            let feature = if col == 0 {
                "intercept".to_string()
            } else {
                design.encoder().groups()[col - 1].feature.clone()
            };
            return Err(Error::RankDeficient { feature });
        }
        a.swap(col, pivot_row);
        for row in col + 1..p {
            let factor = a[row][col] / a[col][col];
            for k in col..=p {
                a[row][k] -= factor * a[col][k];
            }
        }
    }

    let mut solution = [0.0f64; 5];
    for col in (0..p).rev() {
        let mut value = a[col][p];
        for k in col + 1..p {
            value -= a[col][k] * solution[k];
        }
        solution[col] = value / a[col][col];
    }
    Ok((solution[0], [solution[1], solution[2], solution[3], solution[4]]))
}

/// Fit the linear baseline on a design restricted to its four features.
/// Constant targets are rejected; for the binary outcome that means both
/// classes must be present.
pub fn fit_buurman(design: &EncodedMatrix, targets: &[f64]) -> Result<BuurmanModel> {
    if design.n_cols() != BUURMAN_FEATURES {
        return Err(Error::LayoutMismatch {
            expected: BUURMAN_FEATURES,
            got: design.n_cols(),
        });
    }
    if design.n_rows() < 5 {
        return Err(Error::InvalidConfig(format!(
            "linear baseline needs at least 5 rows, got {}",
            design.n_rows()
        )));
    }
    if targets.len() != design.n_rows() {
        return Err(Error::LengthMismatch { left: targets.len(), right: design.n_rows() });
    }
    if targets.iter().all(|&t| t == targets[0]) {
        return Err(Error::SingleClass);
    }

    let (intercept, coefficients) = solve_normal_equations(design, targets)?;
    let feature_names = design
        .encoder()
        .groups()
        .iter()
        .map(|g| g.feature.clone())
        .collect();
    Ok(BuurmanModel { intercept, coefficients, feature_names })
}

/// Linear predictor per row (unbounded).
pub fn buurman_predict(model: &BuurmanModel, design: &EncodedMatrix) -> Result<Vec<f64>> {
    if design.n_cols() != BUURMAN_FEATURES {
        return Err(Error::LayoutMismatch {
            expected: BUURMAN_FEATURES,
            got: design.n_cols(),
        });
    }
    Ok((0..design.n_rows())
        .map(|r| {
            let mut score = model.intercept;
            for (c, coef) in model.coefficients.iter().enumerate() {
                score += coef * design.value(r, c);
            }
            score
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Encoder;
    use crate::schema::{CohortSchema, FeatureKind, FeatureSpec, Value, TARGET_NAME};

    fn points_schema() -> CohortSchema {
        CohortSchema::new(
            vec![
                FeatureSpec {
                    name: "Age".into(),
                    kind: FeatureKind::Integer,
                    units: None,
                    missing_allowed: false,
                },
                FeatureSpec {
                    name: "Barthel Test".into(),
                    kind: FeatureKind::Integer,
                    units: None,
                    missing_allowed: true,
                },
                FeatureSpec {
                    name: "Malignancy".into(),
                    kind: FeatureKind::Boolean,
                    units: None,
                    missing_allowed: false,
                },
            ],
            TARGET_NAME,
        )
        .unwrap()
    }

    fn points_record(age: i64, barthel: Option<i64>, malignancy: bool) -> PatientRecord {
        PatientRecord {
            patient_id: "p".into(),
            episode_id: "e".into(),
            values: vec![
                Some(Value::Integer(age)),
                barthel.map(Value::Integer),
                Some(Value::Boolean(malignancy)),
            ],
            outcome: None,
        }
    }

    const TABLE_TEXT: &str = "\
# demo table
age_ge_85, Age, >=, 85, 3
barthel_lt_60, Barthel Test, <, 60, 4
malignancy, Malignancy, flag, -, 6
";

    #[test]
    fn parse_reads_items_and_skips_comments() {
        let table = ProfundTable::parse(TABLE_TEXT).unwrap();
        assert_eq!(table.items.len(), 3);
        assert_eq!(table.items[0].points, 3);
        assert_eq!(table.items[2].comparator, Comparator::Flag);
        assert_eq!(table.max_points(), 13);
    }

    #[test]
    fn malformed_lines_are_rejected() {
        assert!(ProfundTable::parse("just,four,fields,here").is_err());
        assert!(ProfundTable::parse("a, Age, >=, not_a_number, 3").is_err());
        assert!(ProfundTable::parse("a, Age, ~~, 85, 3").is_err());
        assert!(ProfundTable::parse("a, Age, >=, 85, -3").is_err());
    }

    #[test]
    fn no_predicate_satisfied_scores_zero() {
        let table = ProfundTable::parse(TABLE_TEXT).unwrap();
        let record = points_record(40, Some(90), false);
        assert_eq!(profund_score(&record, &table, &points_schema()).unwrap(), 0);
    }

    #[test]
    fn all_predicates_satisfied_scores_the_table_sum() {
        let table = ProfundTable::parse(TABLE_TEXT).unwrap();
        let record = points_record(90, Some(40), true);
        assert_eq!(
            profund_score(&record, &table, &points_schema()).unwrap(),
            table.max_points()
        );
    }

    #[test]
    fn worked_example_age_and_barthel() {
        let table =
            ProfundTable::parse("a, Age, >=, 85, 3\nb, Barthel Test, <, 60, 4\n").unwrap();
        let record = points_record(90, Some(50), false);
        assert_eq!(profund_score(&record, &table, &points_schema()).unwrap(), 7);
    }

    #[test]
    fn missing_input_contributes_zero() {
        let table = ProfundTable::parse(TABLE_TEXT).unwrap();
        let with_barthel = points_record(90, Some(40), true);
        let without_barthel = points_record(90, None, true);
        let a = profund_score(&with_barthel, &table, &points_schema()).unwrap();
        let b = profund_score(&without_barthel, &table, &points_schema()).unwrap();
        assert_eq!(a - b, 4);
    }

    #[test]
    fn unknown_feature_is_an_error() {
        let table = ProfundTable::parse("a, Caregiver, flag, -, 2\n").unwrap();
        let record = points_record(90, None, false);
        assert!(matches!(
            profund_score(&record, &table, &points_schema()),
            Err(Error::UnknownFeature(f)) if f == "Caregiver"
        ));
        assert!(table.check_features(&points_schema()).is_err());
    }

    #[test]
    fn score_matches_independent_predicate_sum() {
        // oracle: evaluate each predicate by hand and sum
        let table = ProfundTable::parse(TABLE_TEXT).unwrap();
        let schema = points_schema();
        for age in [40i64, 85, 90] {
            for barthel in [None, Some(30i64), Some(70)] {
                for malignancy in [false, true] {
                    let record = points_record(age, barthel, malignancy);
                    let mut oracle = 0u32;
                    if age >= 85 {
                        oracle += 3;
                    }
                    if let Some(b) = barthel {
                        if b < 60 {
                            oracle += 4;
                        }
                    }
                    if malignancy {
                        oracle += 6;
                    }
                    assert_eq!(profund_score(&record, &table, &schema).unwrap(), oracle);
                }
            }
        }
    }

    #[test]
    fn satisfying_more_predicates_never_lowers_the_score() {
        let table = ProfundTable::parse(TABLE_TEXT).unwrap();
        let schema = points_schema();
        // each step satisfies a superset of the previous record's predicates
        let ladder = [
            points_record(40, Some(90), false),
            points_record(90, Some(90), false),
            points_record(90, Some(40), false),
            points_record(90, Some(40), true),
        ];
        let mut previous = 0;
        for record in &ladder {
            let score = profund_score(record, &table, &schema).unwrap();
            assert!(score >= previous);
            previous = score;
        }
    }

    fn design_from_rows(rows: &[[f64; 4]]) -> EncodedMatrix {
        let encoder = Encoder::numeric(&["Barthel Test", "Charlson Score", "Malignancy", "Urea"]);
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        let missing = vec![false; values.len()];
        EncodedMatrix::from_parts(rows.len(), values, missing, None, encoder)
    }

    fn synthetic_design(n: usize) -> Vec<[f64; 4]> {
        let mut state = 0xb00b5u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n)
            .map(|_| {
                [
                    (next() * 100.0).round(),
                    (next() * 12.0).round(),
                    (next() < 0.2) as u8 as f64,
                    20.0 + next() * 80.0,
                ]
            })
            .collect()
    }

    #[test]
    fn ols_recovers_planted_coefficients() {
        let rows = synthetic_design(400);
        let design = design_from_rows(&rows);
        // oracle target: intercept 0.2, weight 0.01 on the last column only
        let targets: Vec<f64> = rows.iter().map(|r| 0.2 + 0.01 * r[3]).collect();
        let model = fit_buurman(&design, &targets).unwrap();
        assert!((model.intercept - 0.2).abs() < 1e-8);
        assert!((model.coefficients[3] - 0.01).abs() < 1e-8);
        for c in &model.coefficients[..3] {
            assert!(c.abs() < 1e-8);
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_the_design() {
        let rows = synthetic_design(300);
        let design = design_from_rows(&rows);
        let targets: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| f64::from(u8::from(r[3] + r[0] * 0.3 + ((i * 7) % 13) as f64 > 60.0)))
            .collect();
        let model = fit_buurman(&design, &targets).unwrap();
        let scores = buurman_predict(&model, &design).unwrap();

        let residuals: Vec<f64> = targets
            .iter()
            .zip(&scores)
            .map(|(t, s)| t - s)
            .collect();
        let n = rows.len() as f64;
        for col in 0..4 {
            let dot: f64 = residuals
                .iter()
                .zip(&rows)
                .map(|(res, row)| res * row[col])
                .sum();
            assert!((dot / n).abs() < 1e-8, "column {col} correlation {dot}");
        }
        let intercept_dot: f64 = residuals.iter().sum();
        assert!((intercept_dot / n).abs() < 1e-8);
    }

    #[test]
    fn constant_targets_are_rejected() {
        let rows = synthetic_design(50);
        let design = design_from_rows(&rows);
        let targets = vec![1.0f64; 50];
        assert!(matches!(
            fit_buurman(&design, &targets),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn degenerate_column_is_named() {
        let mut rows = synthetic_design(50);
        for row in &mut rows {
            row[2] = 7.0; // constant, collinear with the intercept
        }
        let design = design_from_rows(&rows);
        let targets: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        assert!(matches!(
            fit_buurman(&design, &targets),
            Err(Error::RankDeficient { feature }) if feature == "Malignancy"
        ));
    }

    #[test]
    fn too_few_rows_are_rejected() {
        let rows = synthetic_design(4);
        let design = design_from_rows(&rows);
        let targets = vec![0.0, 1.0, 0.0, 1.0];
        assert!(fit_buurman(&design, &targets).is_err());
    }
}
