//! Gradient boosted classifier: stagewise additive regression trees on the
//! negative gradients of the binomial log-loss.
//!
//! Each stage fits a squared-error tree to the residuals y - sigmoid(F),
//! re-values its leaves with one damped Newton step, and shrinks the update
//! by the learning rate. Scores are sigmoid(init + lr * sum of trees) and
//! stay strictly inside (0,1).

use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::learners::tree::{
    fit_cart_full, CartParams, FeatureSubset, SplitCriterion, Tree,
};
use crate::seed;

/// Raw scores are clamped to this magnitude before the sigmoid so
/// probabilities never round to exactly 0 or 1.
const RAW_SCORE_LIMIT: f64 = 36.0;

/// Newton leaf values are clamped to this magnitude; pure or saturated
/// leaves would otherwise blow up on the guarded denominator.
const LEAF_VALUE_LIMIT: f64 = 10.0;

/// Guard added to the Newton denominator sum of sigma(1-sigma).
const NEWTON_GUARD: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    let x = x.clamp(-RAW_SCORE_LIMIT, RAW_SCORE_LIMIT);
    1.0 / (1.0 + (-x).exp())
}

/// Mean binomial log-loss with probabilities clamped away from 0 and 1.
pub fn log_loss(probabilities: &[f64], labels: &[u8]) -> f64 {
    let mut total = 0.0;
    for (&p, &y) in probabilities.iter().zip(labels) {
        let p = p.clamp(1e-15, 1.0 - 1e-15);
        total += if y == 1 { -p.ln() } else { -(1.0 - p).ln() };
    }
    total / probabilities.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbParams {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
}

impl Default for GbParams {
    fn default() -> Self {
        GbParams { n_trees: 100, learning_rate: 0.1, max_depth: 3, min_samples_leaf: 20 }
    }
}

impl GbParams {
    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must lie in (0,1], got {}",
                self.learning_rate
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoostedEnsemble {
    /// Log-odds of the training base rate.
    pub init_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
    /// Impurity-decrease accumulator per matrix column.
    pub column_gains: Vec<f64>,
    pub n_cols: usize,
    pub params: GbParams,
    pub seed: u64,
    /// Mean training log-loss after each stage; entry 0 is the intercept-only
    /// model.
    pub stage_losses: Vec<f64>,
}

impl GradientBoostedEnsemble {
    pub fn raw_score(&self, row: &[f64]) -> f64 {
        let mut score = self.init_score;
        for tree in &self.trees {
            score += self.learning_rate * tree.predict_row(row);
        }
        score
    }

    pub fn score_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.raw_score(row))
    }
}

/// Fit the boosted classifier on the selected rows. `labels` is indexed by
/// matrix row; per-stage tree seeds derive from the master seed.
pub fn fit_gradient_boosting(
    matrix: &EncodedMatrix,
    rows: &[usize],
    labels: &[u8],
    params: &GbParams,
    seed_value: u64,
) -> Result<GradientBoostedEnsemble> {
    params.validate()?;
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

    let base_rate = positives as f64 / rows.len() as f64;
    let init_score = (base_rate / (1.0 - base_rate)).ln();

    let tree_params = CartParams {
        max_depth: Some(params.max_depth),
        min_samples_leaf: params.min_samples_leaf,
        n_candidate_features: FeatureSubset::All,
        criterion: SplitCriterion::SquaredError,
    };

    let mut raw = vec![0.0f64; matrix.n_rows()];
    for &r in rows {
        raw[r] = init_score;
    }
    let train_labels: Vec<u8> = rows.iter().map(|&r| labels[r]).collect();
    let mut stage_losses = Vec::with_capacity(params.n_trees + 1);
    let probs: Vec<f64> = rows.iter().map(|&r| sigmoid(raw[r])).collect();
    stage_losses.push(log_loss(&probs, &train_labels));

    let mut residuals = vec![0.0f64; matrix.n_rows()];
    let mut trees = Vec::with_capacity(params.n_trees);
    let mut column_gains = vec![0.0f64; matrix.n_cols()];

    for stage in 0..params.n_trees {
        for &r in rows {
            residuals[r] = f64::from(labels[r]) - sigmoid(raw[r]);
        }

        let mut rng = seed::rng(seed_value, stage as u64);
        let fitted = fit_cart_full(matrix, rows, &residuals, &tree_params, &mut rng)?;
        let mut tree = fitted.tree;
        for (col, gain) in fitted.column_gains.iter().enumerate() {
            column_gains[col] += gain;
        }

        // one Newton step per leaf: sum residuals / sum sigma(1-sigma),
        // accumulated in a canonical order so fits are row-order invariant
        let mut leaf_members: Vec<Vec<(f64, f64)>> = vec![Vec::new(); tree.nodes.len()];
        for &r in rows {
            let leaf = tree.leaf_index(matrix.row(r));
            let p = sigmoid(raw[r]);
            leaf_members[leaf].push((residuals[r], p * (1.0 - p)));
        }
        let mut leaf_values = vec![0.0f64; tree.nodes.len()];
        for (leaf, members) in leaf_members.iter_mut().enumerate() {
            if members.is_empty() {
                continue;
            }
            members.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            let numerator: f64 = members.iter().map(|m| m.0).sum();
            let denominator: f64 = members.iter().map(|m| m.1).sum::<f64>() + NEWTON_GUARD;
            let value = (numerator / denominator).clamp(-LEAF_VALUE_LIMIT, LEAF_VALUE_LIMIT);
            tree.set_leaf_value(leaf, value);
            leaf_values[leaf] = value;
        }

        for &r in rows {
            let leaf = tree.leaf_index(matrix.row(r));
            raw[r] += params.learning_rate * leaf_values[leaf];
        }
        let probs: Vec<f64> = rows.iter().map(|&r| sigmoid(raw[r])).collect();
        stage_losses.push(log_loss(&probs, &train_labels));

        trees.push(tree);
    }

    Ok(GradientBoostedEnsemble {
        init_score,
        learning_rate: params.learning_rate,
        trees,
        column_gains,
        n_cols: matrix.n_cols(),
        params: params.clone(),
        seed: seed_value,
        stage_losses,
    })
}

/// Probability scores for every matrix row.
pub fn gb_predict_proba(
    model: &GradientBoostedEnsemble,
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

    fn linear_matrix(n: usize) -> (EncodedMatrix, Vec<u8>) {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64 / n as f64]).collect();
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();
        (matrix_from_rows(&rows), labels)
    }

    #[test]
    fn init_score_is_log_odds_of_base_rate() {
        // oracle: ln(p / (1-p)) computed independently of the fit
        let p = 0.1243f64;
        let oracle = (p / (1.0 - p)).ln();
        assert!((oracle - (-1.9523)).abs() < 1e-3);

        let n = 10_000usize;
        let n_pos = 1243usize;
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64]).collect();
        let matrix = matrix_from_rows(&rows);
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i < n_pos)).collect();
        let idx: Vec<usize> = (0..n).collect();
        let params = GbParams { n_trees: 0, ..GbParams::default() };
        let model = fit_gradient_boosting(&matrix, &idx, &labels, &params, 1).unwrap();
        assert!((model.init_score - oracle).abs() < 1e-12);
    }

    #[test]
    fn zero_trees_scores_the_base_rate_everywhere() {
        let (matrix, labels) = linear_matrix(40);
        let idx: Vec<usize> = (0..40).collect();
        let params = GbParams { n_trees: 0, ..GbParams::default() };
        let model = fit_gradient_boosting(&matrix, &idx, &labels, &params, 1).unwrap();
        let scores = gb_predict_proba(&model, &matrix).unwrap();
        for &s in &scores {
            assert!((s - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn separable_data_reaches_perfect_training_auc() {
        let (matrix, labels) = linear_matrix(100);
        let idx: Vec<usize> = (0..100).collect();
        let params = GbParams {
            n_trees: 50,
            learning_rate: 0.1,
            max_depth: 2,
            min_samples_leaf: 1,
        };
        let model = fit_gradient_boosting(&matrix, &idx, &labels, &params, 3).unwrap();
        let scores = gb_predict_proba(&model, &matrix).unwrap();
        let auc = crate::metrics::auc_of(&scores, &labels).unwrap();
        assert_eq!(auc, 1.0);
    }

    #[test]
    fn training_log_loss_is_non_increasing() {
        let mut state = 0x51u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..5 {
            let n = 120;
            let rows: Vec<Vec<f64>> =
                (0..n).map(|_| vec![next(), next(), next()]).collect();
            let labels: Vec<u8> = rows
                .iter()
                .map(|r| u8::from(r[0] + 0.6 * r[1] + 0.4 * next() > 0.9))
                .collect();
            if labels.iter().all(|&l| l == labels[0]) {
                continue;
            }
            let matrix = matrix_from_rows(&rows);
            let idx: Vec<usize> = (0..n).collect();
            let params = GbParams {
                n_trees: 40,
                learning_rate: 0.1,
                max_depth: 3,
                min_samples_leaf: 2,
            };
            let model = fit_gradient_boosting(&matrix, &idx, &labels, &params, 7).unwrap();
            for pair in model.stage_losses.windows(2) {
                assert!(
                    pair[1] <= pair[0] + 1e-12,
                    "stage loss rose: {} -> {}",
                    pair[0],
                    pair[1]
                );
            }
        }
    }

    #[test]
    fn scores_stay_strictly_inside_unit_interval() {
        let (matrix, labels) = linear_matrix(60);
        let idx: Vec<usize> = (0..60).collect();
        let params = GbParams {
            n_trees: 200,
            learning_rate: 0.5,
            max_depth: 2,
            min_samples_leaf: 1,
        };
        let model = fit_gradient_boosting(&matrix, &idx, &labels, &params, 5).unwrap();
        let scores = gb_predict_proba(&model, &matrix).unwrap();
        for &s in &scores {
            assert!(s > 0.0 && s < 1.0, "score {s}");
        }
    }

    #[test]
    fn duplicate_rows_get_identical_scores() {
        let (matrix, labels) = linear_matrix(30);
        let idx: Vec<usize> = (0..30).collect();
        let model =
            fit_gradient_boosting(&matrix, &idx, &labels, &GbParams::default(), 2).unwrap();
        let dup = matrix_from_rows(&[vec![0.4], vec![0.4]]);
        let scores = gb_predict_proba(&model, &dup).unwrap();
        assert_eq!(scores[0], scores[1]);
    }

    #[test]
    fn adding_a_positive_tree_never_lowers_scores() {
        let (matrix, labels) = linear_matrix(30);
        let idx: Vec<usize> = (0..30).collect();
        let params = GbParams { n_trees: 5, ..GbParams::default() };
        let model = fit_gradient_boosting(&matrix, &idx, &labels, &params, 2).unwrap();
        let before = gb_predict_proba(&model, &matrix).unwrap();

        let mut extended = model.clone();
        extended
            .trees
            .push(Tree { nodes: vec![crate::learners::tree::Node::Leaf { value: 2.0 }] });
        let after = gb_predict_proba(&extended, &matrix).unwrap();
        for (b, a) in before.iter().zip(&after) {
            assert!(a >= b);
        }
    }

    #[test]
    fn single_class_labels_are_rejected() {
        let (matrix, _) = linear_matrix(10);
        let labels = vec![1u8; 10];
        let idx: Vec<usize> = (0..10).collect();
        assert!(matches!(
            fit_gradient_boosting(&matrix, &idx, &labels, &GbParams::default(), 1),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn fit_is_deterministic() {
        let (matrix, labels) = linear_matrix(50);
        let idx: Vec<usize> = (0..50).collect();
        let params = GbParams { n_trees: 10, ..GbParams::default() };
        let a = fit_gradient_boosting(&matrix, &idx, &labels, &params, 11).unwrap();
        let b = fit_gradient_boosting(&matrix, &idx, &labels, &params, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn layout_mismatch_is_rejected_at_scoring() {
        let (matrix, labels) = linear_matrix(20);
        let idx: Vec<usize> = (0..20).collect();
        let model =
            fit_gradient_boosting(&matrix, &idx, &labels, &GbParams::default(), 1).unwrap();
        let wrong = matrix_from_rows(&[vec![1.0, 2.0]]);
        assert!(matches!(
            gb_predict_proba(&model, &wrong),
            Err(Error::LayoutMismatch { .. })
        ));
    }
}
