//! Random forest: gini classification trees grown on bootstrap resamples
//! with per-split feature subsampling.
//!
//! Per-tree seeds derive from the master seed, so trees are independent
//! work units; growing them in any order yields the same forest.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::learners::tree::{fit_cart_full, CartParams, FeatureSubset, SplitCriterion, Tree};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// None grows trees until the leaf-size rule stops them.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub n_candidate_features: FeatureSubset,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 300,
            max_depth: None,
            min_samples_leaf: 5,
            n_candidate_features: FeatureSubset::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestEnsemble {
    pub trees: Vec<Tree>,
    /// Impurity-decrease accumulator per matrix column.
    pub column_gains: Vec<f64>,
    pub n_cols: usize,
    pub params: ForestParams,
    pub seed: u64,
}

impl RandomForestEnsemble {
    /// Mean leaf positive-fraction over the trees.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }
}

pub fn fit_random_forest(
    matrix: &EncodedMatrix,
    rows: &[usize],
    labels: &[u8],
    params: &ForestParams,
    seed_value: u64,
) -> Result<RandomForestEnsemble> {
    if params.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if labels.len() != matrix.n_rows() {
        return Err(Error::LengthMismatch { left: labels.len(), right: matrix.n_rows() });
    }
    let positives = rows.iter().filter(|&&r| labels[r] == 1).count();
    if positives == 0 || positives == rows.len() {
        return Err(Error::SingleClass);
    }

    let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
    let tree_params = CartParams {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        n_candidate_features: params.n_candidate_features,
        criterion: SplitCriterion::Gini,
    };

    let mut trees = Vec::with_capacity(params.n_trees);
    let mut column_gains = vec![0.0f64; matrix.n_cols()];
    for t in 0..params.n_trees {
        let mut rng = seed::rng(seed_value, t as u64);
        let tree_rows: Vec<usize> = if params.bootstrap {
            (0..rows.len())
                .map(|_| rows[rng.random_range(0..rows.len())])
                .collect()
        } else {
            rows.to_vec()
        };
        let fitted = fit_cart_full(matrix, &tree_rows, &targets, &tree_params, &mut rng)?;
        for (col, gain) in fitted.column_gains.iter().enumerate() {
            column_gains[col] += gain;
        }
        trees.push(fitted.tree);
    }

    Ok(RandomForestEnsemble {
        trees,
        column_gains,
        n_cols: matrix.n_cols(),
        params: params.clone(),
        seed: seed_value,
    })
}

pub fn rf_predict_proba(
    model: &RandomForestEnsemble,
    matrix: &EncodedMatrix,
) -> Result<Vec<f64>> {
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
    use crate::learners::tree::fit_cart;

    fn toy_data(n: usize) -> (EncodedMatrix, Vec<u8>, Vec<usize>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![(i * 37 % 31) as f64, (i * 17 % 13) as f64])
            .collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + r[1] > 20.0))
            .collect();
        (matrix_from_rows(&rows), labels, (0..n).collect())
    }

    #[test]
    fn forest_of_one_reduces_to_cart() {
        let (matrix, labels, idx) = toy_data(80);
        let params = ForestParams {
            n_trees: 1,
            bootstrap: false,
            n_candidate_features: FeatureSubset::All,
            max_depth: Some(6),
            min_samples_leaf: 2,
        };
        let forest = fit_random_forest(&matrix, &idx, &labels, &params, 42).unwrap();

        let targets: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let cart_params = CartParams {
            max_depth: Some(6),
            min_samples_leaf: 2,
            n_candidate_features: FeatureSubset::All,
            criterion: SplitCriterion::Gini,
        };
        let cart = fit_cart(&matrix, &idx, &targets, &cart_params, 99).unwrap();

        let forest_scores = rf_predict_proba(&forest, &matrix).unwrap();
        for (r, &score) in forest_scores.iter().enumerate() {
            assert_eq!(score, cart.predict_row(matrix.row(r)));
        }
    }

    #[test]
    fn all_positive_labels_are_rejected() {
        let (matrix, _, idx) = toy_data(20);
        let labels = vec![1u8; 20];
        assert!(matches!(
            fit_random_forest(&matrix, &idx, &labels, &ForestParams::default(), 1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let (matrix, labels, idx) = toy_data(60);
        let params = ForestParams { n_trees: 12, ..ForestParams::default() };
        let a = fit_random_forest(&matrix, &idx, &labels, &params, 5).unwrap();
        let b = fit_random_forest(&matrix, &idx, &labels, &params, 5).unwrap();
        assert_eq!(a, b);
        let c = fit_random_forest(&matrix, &idx, &labels, &params, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn scores_are_probabilities() {
        let (matrix, labels, idx) = toy_data(60);
        let params = ForestParams { n_trees: 20, ..ForestParams::default() };
        let forest = fit_random_forest(&matrix, &idx, &labels, &params, 5).unwrap();
        for &score in &rf_predict_proba(&forest, &matrix).unwrap() {
            assert!((0.0..=1.0).contains(&score));
        }
    }

    #[test]
    fn bootstrap_trees_differ() {
        let (matrix, labels, idx) = toy_data(60);
        let params = ForestParams { n_trees: 2, ..ForestParams::default() };
        let forest = fit_random_forest(&matrix, &idx, &labels, &params, 8).unwrap();
        assert_ne!(forest.trees[0], forest.trees[1]);
    }
}
