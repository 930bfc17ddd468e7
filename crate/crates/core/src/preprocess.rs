//! Train-split-only median imputation and feature standardization.
//!
//! Both transformers derive their statistics exclusively from the rows they
//! were fitted on; applying them never feeds information from other rows
//! back into the fit.

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnBlock, EncodedMatrix};
use crate::error::{Error, Result};

/// Per-cell fill values learned from a training split: the median for
/// numeric and boolean columns, the mode category (as a 1/0 pattern over the
/// one-hot block) for categoricals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Imputer {
    fills: Vec<f64>,
    n_cols: usize,
}

impl Imputer {
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Fill value applied to masked cells of a column.
    pub fn fill(&self, col: usize) -> f64 {
        self.fills[col]
    }
}

fn median_of(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Learn per-column fill statistics from the given rows.
pub fn fit_imputer(matrix: &EncodedMatrix, rows: &[usize]) -> Result<Imputer> {
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let mut fills = vec![0.0f64; matrix.n_cols()];
    for group in matrix.encoder().groups() {
        match &group.block {
            ColumnBlock::Numeric | ColumnBlock::Boolean => {
                let col = group.start;
                let observed: Vec<f64> = rows
                    .iter()
                    .filter(|&&r| !matrix.is_missing(r, col))
                    .map(|&r| matrix.value(r, col))
                    .collect();
                if observed.is_empty() {
                    return Err(Error::AllMissingColumn { column: group.feature.clone() });
                }
                fills[col] = median_of(observed);
            }
            ColumnBlock::OneHot(vocab) => {
                if vocab.is_empty() {
                    continue;
                }
                let first = group.start;
                let observed_rows: Vec<usize> = rows
                    .iter()
                    .copied()
                    .filter(|&r| !matrix.is_missing(r, first))
                    .collect();
                if observed_rows.is_empty() {
                    return Err(Error::AllMissingColumn { column: group.feature.clone() });
                }
                // mode category: most frequent column, lexicographic (= lowest
                // column) tie-break since the vocabulary is sorted
                let mut best_col = first;
                let mut best_count = 0usize;
                for col in group.columns() {
                    let count = observed_rows
                        .iter()
                        .filter(|&&r| matrix.value(r, col) == 1.0)
                        .count();
                    if count > best_count {
                        best_count = count;
                        best_col = col;
                    }
                }
                fills[best_col] = 1.0;
            }
        }
    }
    Ok(Imputer { fills, n_cols: matrix.n_cols() })
}

/// Replace every masked cell with its column statistic. Non-missing cells
/// are untouched; the output has no masked cells.
pub fn apply_imputer(matrix: &EncodedMatrix, imputer: &Imputer) -> Result<EncodedMatrix> {
    if imputer.n_cols != matrix.n_cols() {
        return Err(Error::LayoutMismatch { expected: imputer.n_cols, got: matrix.n_cols() });
    }

    let mut out = matrix.clone();
    for row in 0..out.n_rows {
        let base = row * out.n_cols;
        for col in 0..out.n_cols {
            if out.missing[base + col] {
                out.values[base + col] = imputer.fills[col];
                out.missing[base + col] = false;
            }
        }
    }
    Ok(out)
}

/// Floor applied to per-column SDs so constant columns scale to zero
/// instead of dividing by zero.
pub const SD_FLOOR: f64 = 1e-12;

/// Per-column centering and scaling statistics (population SD), fitted
/// post-imputation on a training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    sds: Vec<f64>,
    floor: f64,
}

impl Standardizer {
    pub fn n_cols(&self) -> usize {
        self.means.len()
    }

    pub fn mean(&self, col: usize) -> f64 {
        self.means[col]
    }

    pub fn sd(&self, col: usize) -> f64 {
        self.sds[col]
    }

    pub fn scale(&self, col: usize, value: f64) -> f64 {
        if self.sds[col] <= self.floor {
            0.0
        } else {
            (value - self.means[col]) / self.sds[col]
        }
    }

    /// Inverse transform with the stored statistics.
    pub fn unscale(&self, col: usize, scaled: f64) -> f64 {
        if self.sds[col] <= self.floor {
            self.means[col]
        } else {
            scaled * self.sds[col] + self.means[col]
        }
    }
}

/// Fit per-column mean and population SD over the given (imputed) rows.
pub fn fit_standardizer(matrix: &EncodedMatrix, rows: &[usize]) -> Result<Standardizer> {
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    debug_assert!(!matrix.any_missing(), "standardizer expects an imputed matrix");

    let n = rows.len() as f64;
    let n_cols = matrix.n_cols();
    let mut means = vec![0.0f64; n_cols];
    let mut sds = vec![0.0f64; n_cols];
    for col in 0..n_cols {
        let sum: f64 = rows.iter().map(|&r| matrix.value(r, col)).sum();
        let mean = sum / n;
        let ss: f64 = rows
            .iter()
            .map(|&r| {
                let d = matrix.value(r, col) - mean;
                d * d
            })
            .sum();
        means[col] = mean;
        sds[col] = (ss / n).sqrt();
    }
    Ok(Standardizer { means, sds, floor: SD_FLOOR })
}

/// Scale every cell to (value - mean) / SD, with constant columns mapping
/// to zero.
pub fn apply_standardizer(matrix: &EncodedMatrix, std: &Standardizer) -> Result<EncodedMatrix> {
    if std.n_cols() != matrix.n_cols() {
        return Err(Error::LayoutMismatch { expected: std.n_cols(), got: matrix.n_cols() });
    }

    let mut out = matrix.clone();
    for row in 0..out.n_rows {
        let base = row * out.n_cols;
        for col in 0..out.n_cols {
            out.values[base + col] = std.scale(col, out.values[base + col]);
        }
    }
    Ok(out)
}
