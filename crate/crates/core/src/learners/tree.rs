//! CART trees with exact split search.
//!
//! Split candidates are found by sorting each candidate feature's values
//! within the node (no histogram binning); thresholds sit at midpoints
//! between adjacent distinct values. Node aggregates are accumulated in a
//! canonical (value, target) order so a fit is invariant to the ordering of
//! its training rows.

use rand::seq::index::sample;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedMatrix;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    /// Classification impurity over 0/1 targets.
    Gini,
    /// Regression impurity; used by the boosting stages.
    SquaredError,
}

/// How many features to consider per split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    All,
    /// floor(sqrt(d)), the forest convention.
    Sqrt,
    Count(usize),
}

impl FeatureSubset {
    pub fn resolve(self, n_cols: usize) -> usize {
        match self {
            FeatureSubset::All => n_cols,
            FeatureSubset::Sqrt => ((n_cols as f64).sqrt().floor() as usize).max(1),
            FeatureSubset::Count(k) => k.clamp(1, n_cols),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    /// None grows until the other stopping rules bite.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub n_candidate_features: FeatureSubset,
    pub criterion: SplitCriterion,
}

impl CartParams {
    fn validate(&self) -> Result<()> {
        if self.max_depth == Some(0) {
            return Err(Error::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        Ok(())
    }
}

/// One tree node in the arena; children are arena indices and always come
/// after their parent. Routing rule: value <= threshold goes left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { column: usize, threshold: f64, left: usize, right: usize },
}

/// A fitted tree stored as a node array rooted at index 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_index(row)] {
            Node::Leaf { value } => *value,
            Node::Split { .. } => unreachable!("leaf_index returns a leaf"),
        }
    }

    /// Index of the leaf a row routes to.
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split { column, threshold, left, right } => {
                    at = if row[*column] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub(crate) fn set_leaf_value(&mut self, index: usize, value: f64) {
        match &mut self.nodes[index] {
            Node::Leaf { value: v } => *v = value,
            Node::Split { .. } => panic!("node {index} is not a leaf"),
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Structural totality check: children exist, appear after their parent,
    /// and every non-root node is referenced exactly once.
    pub fn is_well_formed(&self) -> bool {
        let mut referenced = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = node {
                for child in [*left, *right] {
                    if child <= i || child >= self.nodes.len() {
                        return false;
                    }
                    referenced[child] += 1;
                }
            }
        }
        referenced[0] == 0 && referenced.iter().skip(1).all(|&c| c == 1)
    }
}

/// Tree plus the per-column split gains it accumulated while growing.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct FittedTree {
    pub tree: Tree,
    /// Weighted impurity decrease credited to each matrix column.
    pub column_gains: Vec<f64>,
}

/// Greedy recursive CART fit. `targets` is indexed by matrix row; `rows`
/// selects the training rows and may contain repeats (bootstrap samples).
pub fn fit_cart(
    matrix: &EncodedMatrix,
    rows: &[usize],
    targets: &[f64],
    params: &CartParams,
    seed_value: u64,
) -> Result<Tree> {
    let mut rng = seed::rng(seed_value, 0x03);
    Ok(fit_cart_full(matrix, rows, targets, params, &mut rng)?.tree)
}

pub(crate) fn fit_cart_full(
    matrix: &EncodedMatrix,
    rows: &[usize],
    targets: &[f64],
    params: &CartParams,
    rng: &mut ChaCha8Rng,
) -> Result<FittedTree> {
    params.validate()?;
    if rows.is_empty() {
        return Err(Error::EmptyCohort);
    }
    if targets.len() != matrix.n_rows() {
        return Err(Error::LengthMismatch { left: targets.len(), right: matrix.n_rows() });
    }

    let mut builder = Builder {
        matrix,
        targets,
        params,
        rng,
        nodes: Vec::new(),
        column_gains: vec![0.0; matrix.n_cols()],
    };
    builder.grow(rows.to_vec(), 0);
    Ok(FittedTree { tree: Tree { nodes: builder.nodes }, column_gains: builder.column_gains })
}

struct Builder<'a> {
    matrix: &'a EncodedMatrix,
    targets: &'a [f64],
    params: &'a CartParams,
    rng: &'a mut ChaCha8Rng,
    nodes: Vec<Node>,
    column_gains: Vec<f64>,
}

struct BestSplit {
    column: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let at_depth_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        let too_small = rows.len() < 2 * self.params.min_samples_leaf;
        if at_depth_limit || too_small || self.is_pure(&rows) {
            return self.push_leaf(&rows);
        }

        let columns = self.candidate_columns();
        let best = self.best_split(&rows, &columns);
        let Some(best) = best else {
            return self.push_leaf(&rows);
        };

        self.column_gains[best.column] += best.gain;
        let index = self.nodes.len();
        self.nodes.push(Node::Split {
            column: best.column,
            threshold: best.threshold,
            left: 0,
            right: 0,
        });

        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&r| self.matrix.value(r, best.column) <= best.threshold);
        let left = self.grow(left_rows, depth + 1);
        let right = self.grow(right_rows, depth + 1);
        match &mut self.nodes[index] {
            Node::Split { left: l, right: r, .. } => {
                *l = left;
                *r = right;
            }
            Node::Leaf { .. } => unreachable!(),
        }
        index
    }

    fn is_pure(&self, rows: &[usize]) -> bool {
        let first = self.targets[rows[0]];
        rows.iter().all(|&r| self.targets[r] == first)
    }

    fn push_leaf(&mut self, rows: &[usize]) -> usize {
        // canonical summation order keeps leaf values row-order invariant
        let mut values: Vec<f64> = rows.iter().map(|&r| self.targets[r]).collect();
        values.sort_by(f64::total_cmp);
        let value = values.iter().sum::<f64>() / values.len() as f64;
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    /// Candidate columns in ascending order; a strict subset is drawn from
    /// the tree's RNG when configured.
    fn candidate_columns(&mut self) -> Vec<usize> {
        let n_cols = self.matrix.n_cols();
        let k = self.params.n_candidate_features.resolve(n_cols);
        if k >= n_cols {
            (0..n_cols).collect()
        } else {
            let mut columns = sample(self.rng, n_cols, k).into_vec();
            columns.sort_unstable();
            columns
        }
    }

    fn best_split(&self, rows: &[usize], columns: &[usize]) -> Option<BestSplit> {
        // parent impurity from a canonical target order, shared by every
        // candidate column so equal splits compare equal
        let mut parent_targets: Vec<f64> = rows.iter().map(|&r| self.targets[r]).collect();
        parent_targets.sort_by(f64::total_cmp);
        let parent_impurity = match self.params.criterion {
            SplitCriterion::Gini => {
                let pos: f64 = parent_targets.iter().sum();
                weighted_gini(parent_targets.len() as f64, pos)
            }
            SplitCriterion::SquaredError => {
                let n = parent_targets.len() as f64;
                let mean = parent_targets.iter().sum::<f64>() / n;
                parent_targets.iter().map(|t| (t - mean) * (t - mean)).sum()
            }
        };

        let mut best: Option<BestSplit> = None;
        for &column in columns {
            let mut pairs: Vec<(f64, f64)> = rows
                .iter()
                .map(|&r| (self.matrix.value(r, column), self.targets[r]))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

            let n = pairs.len();
            let total_sum: f64 = pairs.iter().map(|p| p.1).sum();
            let total_sq: f64 = pairs.iter().map(|p| p.1 * p.1).sum();

            let mut left_sum = 0.0f64;
            let mut left_sq = 0.0f64;
            for i in 1..n {
                left_sum += pairs[i - 1].1;
                left_sq += pairs[i - 1].1 * pairs[i - 1].1;
                if pairs[i].0 == pairs[i - 1].0 {
                    continue;
                }
                let left_n = i;
                let right_n = n - i;
                if left_n < self.params.min_samples_leaf
                    || right_n < self.params.min_samples_leaf
                {
                    continue;
                }

                let gain = match self.params.criterion {
                    SplitCriterion::Gini => {
                        parent_impurity
                            - weighted_gini(left_n as f64, left_sum)
                            - weighted_gini(right_n as f64, total_sum - left_sum)
                    }
                    SplitCriterion::SquaredError => {
                        let left_sse = sse(left_n as f64, left_sum, left_sq);
                        let right_sse =
                            sse(right_n as f64, total_sum - left_sum, total_sq - left_sq);
                        parent_impurity - left_sse - right_sse
                    }
                };
                let gain = gain.max(0.0);

                if best.as_ref().is_none_or(|b| gain > b.gain) {
                    // midpoint, nudged back onto the left value if rounding
                    // would otherwise route the right group leftward
                    let low = pairs[i - 1].0;
                    let high = pairs[i].0;
                    let mid = (low + high) / 2.0;
                    let threshold = if mid < high { mid } else { low };
                    best = Some(BestSplit { column, threshold, gain });
                }
            }
        }
        best
    }
}

/// n * gini(p) for a binary node with `pos` positives out of `n`.
fn weighted_gini(n: f64, pos: f64) -> f64 {
    let p = pos / n;
    n * 2.0 * p * (1.0 - p)
}

/// Sum of squared deviations from the mean, from running sums.
fn sse(n: f64, sum: f64, sq: f64) -> f64 {
    (sq - sum * sum / n).max(0.0)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::Encoder;

    pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> EncodedMatrix {
        let n_cols = rows[0].len();
        let names: Vec<String> = (0..n_cols).map(|i| format!("f{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let values: Vec<f64> = rows.iter().flatten().copied().collect();
        let missing = vec![false; values.len()];
        EncodedMatrix::from_parts(rows.len(), values, missing, None, Encoder::numeric(&refs))
    }

    fn gini_params(max_depth: Option<usize>) -> CartParams {
        CartParams {
            max_depth,
            min_samples_leaf: 1,
            n_candidate_features: FeatureSubset::All,
            criterion: SplitCriterion::Gini,
        }
    }

    #[test]
    fn single_threshold_data_splits_cleanly() {
        let matrix = matrix_from_rows(&[vec![-1.0], vec![-0.5], vec![0.5], vec![1.0]]);
        let targets = [0.0, 0.0, 1.0, 1.0];
        let tree = fit_cart(&matrix, &[0, 1, 2, 3], &targets, &gini_params(Some(4)), 1).unwrap();
        assert!(tree.is_well_formed());
        match &tree.nodes[0] {
            Node::Split { threshold, .. } => {
                assert!((*threshold - 0.0).abs() < 1e-12, "threshold {threshold}")
            }
            Node::Leaf { .. } => panic!("expected a split at the root"),
        }
        assert_eq!(tree.predict_row(&[-0.7]), 0.0);
        assert_eq!(tree.predict_row(&[0.7]), 1.0);
    }

    #[test]
    fn identical_targets_collapse_to_one_leaf() {
        let matrix = matrix_from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        let targets = [0.4, 0.4, 0.4];
        let tree = fit_cart(&matrix, &[0, 1, 2], &targets, &gini_params(Some(4)), 1).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        match &tree.nodes[0] {
            Node::Leaf { value } => assert!((value - 0.4).abs() < 1e-12),
            Node::Split { .. } => panic!("expected a leaf"),
        }
    }

    /// Brute force over all axis-aligned split pairs: verifies depth-2 zero
    /// training error is attainable on XOR before asking the fit for it.
    fn xor_depth2_attainable(points: &[(f64, f64)], labels: &[f64]) -> bool {
        let splits = [(0usize, 0.5f64), (1, 0.5)];
        let coord = |p: &(f64, f64), col: usize| if col == 0 { p.0 } else { p.1 };

        for &(root_col, root_thr) in &splits {
            for &left_split in &splits {
                for &right_split in &splits {
                    // every leaf cell of the candidate depth-2 tree must be pure
                    let pure = [true, false].iter().all(|&goes_left| {
                        let (col, thr) = if goes_left { left_split } else { right_split };
                        [true, false].iter().all(|&child_left| {
                            let mut seen: Option<f64> = None;
                            points.iter().zip(labels).all(|(p, &label)| {
                                let in_cell = (coord(p, root_col) <= root_thr) == goes_left
                                    && (coord(p, col) <= thr) == child_left;
                                if !in_cell {
                                    return true;
                                }
                                match seen {
                                    None => {
                                        seen = Some(label);
                                        true
                                    }
                                    Some(s) => s == label,
                                }
                            })
                        })
                    });
                    if pure {
                        return true;
                    }
                }
            }
        }
        false
    }

    #[test]
    fn xor_is_solved_at_depth_two() {
        let points = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)];
        let labels = [0.0, 1.0, 1.0, 0.0];
        assert!(xor_depth2_attainable(&points, &labels), "oracle: depth-2 solution exists");

        let matrix = matrix_from_rows(&[
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ]);
        let tree =
            fit_cart(&matrix, &[0, 1, 2, 3], &labels, &gini_params(Some(2)), 1).unwrap();
        for (i, point) in points.iter().enumerate() {
            assert_eq!(tree.predict_row(&[point.0, point.1]), labels[i]);
        }
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let matrix = matrix_from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let targets = [0.0, 1.0, 0.0, 1.0];
        let params = CartParams { min_samples_leaf: 2, ..gini_params(None) };
        let tree = fit_cart(&matrix, &[0, 1, 2, 3], &targets, &params, 1).unwrap();
        // only the 2/2 split position is allowed
        for node in &tree.nodes {
            if let Node::Split { threshold, .. } = node {
                assert!((*threshold - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fit_is_deterministic_per_seed() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i * 37 % 19) as f64, (i * 11 % 7) as f64])
            .collect();
        let matrix = matrix_from_rows(&rows);
        let targets: Vec<f64> = (0..40).map(|i| f64::from(u8::from(i % 3 == 0))).collect();
        let idx: Vec<usize> = (0..40).collect();
        let params = CartParams {
            n_candidate_features: FeatureSubset::Count(1),
            ..gini_params(Some(5))
        };
        let a = fit_cart(&matrix, &idx, &targets, &params, 9).unwrap();
        let b = fit_cart(&matrix, &idx, &targets, &params, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn fit_is_row_order_invariant() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i * 37 % 23) as f64, (i * 13 % 11) as f64, (i % 5) as f64])
            .collect();
        let matrix = matrix_from_rows(&rows);
        let targets: Vec<f64> = (0..60).map(|i| ((i * 7 % 13) as f64) / 13.0).collect();
        let idx: Vec<usize> = (0..60).collect();
        let params = CartParams {
            criterion: SplitCriterion::SquaredError,
            ..gini_params(Some(6))
        };
        let base = fit_cart(&matrix, &idx, &targets, &params, 4).unwrap();

        // permute the physical rows, keep targets aligned
        let perm: Vec<usize> = (0..60).map(|i| (i * 29) % 60).collect();
        let permuted_rows: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let permuted_targets: Vec<f64> = perm.iter().map(|&i| targets[i]).collect();
        let permuted = matrix_from_rows(&permuted_rows);
        let tree = fit_cart(&permuted, &idx, &permuted_targets, &params, 4).unwrap();

        // same function, not just same shape: compare predictions
        for row in &rows {
            assert_eq!(base.predict_row(row), tree.predict_row(row));
        }
    }

    #[test]
    fn every_input_reaches_exactly_one_leaf() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![(i % 17) as f64, (i % 3) as f64]).collect();
        let matrix = matrix_from_rows(&rows);
        let targets: Vec<f64> = (0..50).map(|i| f64::from(u8::from(i % 2 == 0))).collect();
        let idx: Vec<usize> = (0..50).collect();
        let tree = fit_cart(&matrix, &idx, &targets, &gini_params(None), 2).unwrap();
        assert!(tree.is_well_formed());
        for row in &rows {
            let leaf = tree.leaf_index(row);
            assert!(matches!(tree.nodes[leaf], Node::Leaf { .. }));
        }
    }
}
