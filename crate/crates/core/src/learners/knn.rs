//! Exact k-nearest-neighbors over standardized features.
//!
//! Brute-force Euclidean search; ties at the k-th distance break toward the
//! lower training-row index. The score is the positive fraction among the
//! k neighbors.

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    /// Stored standardized training rows, row-major.
    pub train: Vec<f64>,
    pub n_cols: usize,
    pub n_rows: usize,
    pub labels: Vec<u8>,
}

impl KnnModel {
    fn train_row(&self, r: usize) -> &[f64] {
        &self.train[r * self.n_cols..(r + 1) * self.n_cols]
    }

    /// Positive fraction among the k nearest stored rows.
    pub fn score_row(&self, query: &[f64]) -> f64 {
        // squared distances preserve the Euclidean ordering
        let mut candidates: Vec<(f64, usize)> = (0..self.n_rows)
            .map(|r| {
                let dist = self
                    .train_row(r)
                    .iter()
                    .zip(query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>();
                (dist, r)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < candidates.len() {
            candidates.select_nth_unstable_by(self.k - 1, cmp);
        }
        let positives = candidates[..self.k]
            .iter()
            .filter(|&&(_, r)| self.labels[r] == 1)
            .count();
        positives as f64 / self.k as f64
    }
}

/// Store the selected standardized rows and their labels.
pub fn fit_knn(
    matrix: &EncodedMatrix,
    rows: &[usize],
    labels: &[u8],
    k: usize,
) -> Result<KnnModel> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be >= 1".into()));
    }
    if k > rows.len() {
        return Err(Error::KTooLarge { k, n: rows.len() });
    }
    if labels.len() != matrix.n_rows() {
        return Err(Error::LengthMismatch { left: labels.len(), right: matrix.n_rows() });
    }

    let n_cols = matrix.n_cols();
    let mut train = Vec::with_capacity(rows.len() * n_cols);
    let mut stored_labels = Vec::with_capacity(rows.len());
    for &r in rows {
        train.extend_from_slice(matrix.row(r));
        stored_labels.push(labels[r]);
    }
    Ok(KnnModel { k, train, n_cols, n_rows: rows.len(), labels: stored_labels })
}

/// Score every row of a (standardized) matrix.
pub fn knn_predict_proba(model: &KnnModel, matrix: &EncodedMatrix) -> Result<Vec<f64>> {
    if matrix.n_cols() != model.n_cols {
        return Err(Error::LayoutMismatch { expected: model.n_cols, got: matrix.n_cols() });
    }
    Ok((0..matrix.n_rows())
        .map(|r| model.score_row(matrix.row(r)))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::tests::matrix_from_rows;

    #[test]
    fn query_on_a_training_point_with_k1_returns_its_label() {
        let matrix = matrix_from_rows(&[vec![0.0, 0.0], vec![5.0, 5.0], vec![9.0, 1.0]]);
        let labels = [0u8, 1, 0];
        let model = fit_knn(&matrix, &[0, 1, 2], &labels, 1).unwrap();
        assert_eq!(model.score_row(&[5.0, 5.0]), 1.0);
        assert_eq!(model.score_row(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn score_is_positive_fraction_of_neighbors() {
        let matrix = matrix_from_rows(&[
            vec![0.0],
            vec![1.0],
            vec![2.0],
            vec![100.0],
        ]);
        let labels = [1u8, 1, 0, 0];
        let model = fit_knn(&matrix, &[0, 1, 2, 3], &labels, 3).unwrap();
        let score = model.score_row(&[0.5]);
        assert!((score - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn k_larger_than_training_set_is_rejected() {
        let matrix = matrix_from_rows(&[vec![0.0], vec![1.0]]);
        assert!(matches!(
            fit_knn(&matrix, &[0, 1], &[0, 1], 3),
            Err(Error::KTooLarge { k: 3, n: 2 })
        ));
    }

    #[test]
    fn ties_break_toward_lower_training_index() {
        // rows 1 and 2 are equidistant from the query; k=2 must pick rows 0,1
        let matrix = matrix_from_rows(&[vec![0.0], vec![1.0], vec![-1.0]]);
        let labels = [0u8, 1, 0];
        let model = fit_knn(&matrix, &[0, 1, 2], &labels, 2).unwrap();
        let score = model.score_row(&[0.0]);
        assert!((score - 0.5).abs() < 1e-12);
    }

    #[test]
    fn matches_full_sort_oracle_on_random_queries() {
        let mut state = 0x1dd7u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };

        let n = 150;
        let d = 6;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| next() * 10.0).collect())
            .collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(next() < 0.3)).collect();
        let matrix = matrix_from_rows(&rows);
        let idx: Vec<usize> = (0..n).collect();
        let model = fit_knn(&matrix, &idx, &labels, 7).unwrap();

        for _ in 0..200 {
            let query: Vec<f64> = (0..d).map(|_| next() * 10.0).collect();

            // oracle: all-pairs Euclidean distances, full stable sort
            let mut all: Vec<(f64, usize)> = rows
                .iter()
                .enumerate()
                .map(|(r, row)| {
                    let dist = row
                        .iter()
                        .zip(&query)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (dist, r)
                })
                .collect();
            all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let oracle_pos = all[..7].iter().filter(|&&(_, r)| labels[r] == 1).count();
            let oracle = oracle_pos as f64 / 7.0;

            assert_eq!(model.score_row(&query), oracle);
        }
    }
}
