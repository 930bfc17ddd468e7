//! From-scratch learners: CART trees, the gradient boosted classifier, a
//! random forest, and k-nearest-neighbors. Each produces a score in [0,1]
//! per record.

pub mod forest;
pub mod gbdt;
pub mod knn;
pub mod tree;

pub use forest::{fit_random_forest, rf_predict_proba, ForestParams, RandomForestEnsemble};
pub use gbdt::{
    fit_gradient_boosting, gb_predict_proba, log_loss, sigmoid, GbParams,
    GradientBoostedEnsemble,
};
pub use knn::{fit_knn, knn_predict_proba, KnnModel};
pub use tree::{fit_cart, CartParams, FeatureSubset, Node, SplitCriterion, Tree};

use crate::dataset::Encoder;

/// Map per-column split gains back onto the original features: one-hot
/// block columns are summed into their parent categorical, the result is
/// normalized to sum 1 and sorted by decreasing importance.
///
/// A model that never split (all leaves) has no gain mass; every feature
/// then reports zero.
pub fn gini_importance(column_gains: &[f64], encoder: &Encoder) -> Vec<(String, f64)> {
    let total: f64 = column_gains.iter().sum();
    let mut importances: Vec<(String, f64)> = encoder
        .groups()
        .iter()
        .map(|group| {
            let gain: f64 = group.columns().map(|c| column_gains[c]).sum();
            let share = if total > 0.0 { gain / total } else { 0.0 };
            (group.feature.clone(), share)
        })
        .collect();
    importances.sort_by(|a, b| b.1.total_cmp(&a.1));
    importances
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::tree::tests::matrix_from_rows;

    fn fit_toy_gb(
        rows: &[Vec<f64>],
        labels: &[u8],
        seed: u64,
    ) -> (GradientBoostedEnsemble, crate::dataset::EncodedMatrix) {
        let matrix = matrix_from_rows(rows);
        let idx: Vec<usize> = (0..rows.len()).collect();
        let params = GbParams { n_trees: 20, min_samples_leaf: 2, ..GbParams::default() };
        let model = fit_gradient_boosting(&matrix, &idx, labels, &params, seed).unwrap();
        (model, matrix)
    }

    #[test]
    fn single_feature_takes_all_importance() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64]).collect();
        let labels: Vec<u8> = (0..40).map(|i| u8::from(i >= 20)).collect();
        let (model, matrix) = fit_toy_gb(&rows, &labels, 1);
        let imp = gini_importance(&model.column_gains, matrix.encoder());
        assert_eq!(imp.len(), 1);
        assert!((imp[0].1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn importances_sum_to_one() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 7) as f64, (i % 11) as f64, (i % 3) as f64])
            .collect();
        let labels: Vec<u8> = (0..60).map(|i| u8::from((i % 7) >= 4)).collect();
        let (model, matrix) = fit_toy_gb(&rows, &labels, 2);
        let imp = gini_importance(&model.column_gains, matrix.encoder());
        let total: f64 = imp.iter().map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn importance_is_sorted_descending() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i % 7) as f64, (i % 11) as f64, (i % 3) as f64])
            .collect();
        let labels: Vec<u8> = (0..60).map(|i| u8::from((i % 7) >= 4)).collect();
        let (model, matrix) = fit_toy_gb(&rows, &labels, 2);
        let imp = gini_importance(&model.column_gains, matrix.encoder());
        for pair in imp.windows(2) {
            assert!(pair[0].1 >= pair[1].1);
        }
    }

    #[test]
    fn permuting_columns_permutes_importances() {
        let rows: Vec<Vec<f64>> = (0..80)
            .map(|i| vec![(i % 13) as f64, (i % 5) as f64])
            .collect();
        let labels: Vec<u8> = (0..80).map(|i| u8::from((i % 13) >= 7)).collect();
        let (model, matrix) = fit_toy_gb(&rows, &labels, 3);
        let imp: std::collections::HashMap<String, f64> =
            gini_importance(&model.column_gains, matrix.encoder())
                .into_iter()
                .collect();

        // swap the two columns; importances must swap names with them
        let swapped: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[1], r[0]]).collect();
        let (model2, matrix2) = fit_toy_gb(&swapped, &labels, 3);
        let imp2: std::collections::HashMap<String, f64> =
            gini_importance(&model2.column_gains, matrix2.encoder())
                .into_iter()
                .collect();

        assert_eq!(imp["f0"], imp2["f1"]);
        assert_eq!(imp["f1"], imp2["f0"]);
    }
}
