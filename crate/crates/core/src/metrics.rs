//! Confusion-matrix metrics, ROC/AUC, balanced error rate, and the
//! BER-minimizing decision-threshold search.
//!
//! The decision rule is inclusive: a sample is predicted positive when its
//! score is greater than or equal to the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub true_pos: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub false_neg: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.true_neg + self.false_neg
    }

    pub fn positives(&self) -> usize {
        self.true_pos + self.false_neg
    }

    pub fn negatives(&self) -> usize {
        self.true_neg + self.false_pos
    }
}

/// Scalar metrics derived from one confusion matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub ber: f64,
}

/// Balanced error rate: 1 - (sensitivity + specificity) / 2.
pub fn ber(sensitivity: f64, specificity: f64) -> f64 {
    1.0 - (sensitivity + specificity) / 2.0
}

/// Count prediction outcomes at a threshold (predicted positive iff
/// score >= threshold).
pub fn confusion_at_threshold(
    scores: &[f64],
    labels: &[u8],
    threshold: f64,
) -> Result<ConfusionMatrix> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    if scores.is_empty() {
        return Err(Error::EmptyCohort);
    }

    let mut cm = ConfusionMatrix { true_pos: 0, false_pos: 0, true_neg: 0, false_neg: 0 };
    for (&score, &label) in scores.iter().zip(labels) {
        let predicted_positive = score >= threshold;
        match (predicted_positive, label == 1) {
            (true, true) => cm.true_pos += 1,
            (true, false) => cm.false_pos += 1,
            (false, false) => cm.true_neg += 1,
            (false, true) => cm.false_neg += 1,
        }
    }
    Ok(cm)
}

/// Accuracy, sensitivity, specificity, and BER from counts. Errors when a
/// class is absent (sensitivity or specificity would be undefined).
pub fn metric_set(cm: &ConfusionMatrix) -> Result<MetricSet> {
    let positives = cm.positives();
    let negatives = cm.negatives();
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let sensitivity = cm.true_pos as f64 / positives as f64;
    let specificity = cm.true_neg as f64 / negatives as f64;
    Ok(MetricSet {
        accuracy: (cm.true_pos + cm.true_neg) as f64 / cm.total() as f64,
        sensitivity,
        specificity,
        ber: ber(sensitivity, specificity),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub false_pos_rate: f64,
    pub true_pos_rate: f64,
    /// Threshold generating this point; +inf for the (0,0) origin.
    pub threshold: f64,
}

/// ROC curve over the distinct score values, from (0,0) to (1,1) with both
/// coordinates non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

/// (score, label) pairs sorted descending, plus class counts.
type SortedPairs = (Vec<(f64, u8)>, usize, usize);

/// Sorted-descending view of scores with labels.
fn sorted_pairs(scores: &[f64], labels: &[u8]) -> Result<SortedPairs> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch { left: scores.len(), right: labels.len() });
    }
    let positives = labels.iter().filter(|&&l| l == 1).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::SingleClass);
    }
    let mut pairs: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok((pairs, positives, negatives))
}

/// Sweep thresholds over the distinct score values.
pub fn roc_curve(scores: &[f64], labels: &[u8]) -> Result<RocCurve> {
    let (pairs, positives, negatives) = sorted_pairs(scores, labels)?;

    let mut points = vec![RocPoint {
        false_pos_rate: 0.0,
        true_pos_rate: 0.0,
        threshold: f64::INFINITY,
    }];
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < pairs.len() {
        let value = pairs[i].0;
        while i < pairs.len() && pairs[i].0 == value {
            if pairs[i].1 == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            false_pos_rate: fp as f64 / negatives as f64,
            true_pos_rate: tp as f64 / positives as f64,
            threshold: value,
        });
    }
    Ok(RocCurve { points })
}

/// Area under a ROC curve by trapezoidal integration. Equals the
/// Mann-Whitney statistic P(score+ > score-) + P(tie)/2.
pub fn auc(curve: &RocCurve) -> f64 {
    let mut area = 0.0;
    for pair in curve.points.windows(2) {
        let dx = pair[1].false_pos_rate - pair[0].false_pos_rate;
        let y = (pair[0].true_pos_rate + pair[1].true_pos_rate) / 2.0;
        area += dx * y;
    }
    area
}

/// ROC AUC straight from scores and labels.
pub fn auc_of(scores: &[f64], labels: &[u8]) -> Result<f64> {
    Ok(auc(&roc_curve(scores, labels)?))
}

/// A decision threshold with the operating point it achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub ber: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Candidate thresholds: the minimum score (everything positive under the
/// inclusive rule), the midpoints between adjacent distinct sorted scores,
/// and +inf (everything negative).
fn threshold_candidates(sorted_desc: &[(f64, u8)]) -> Vec<f64> {
    let mut distinct_asc: Vec<f64> = sorted_desc.iter().rev().map(|p| p.0).collect();
    distinct_asc.dedup();

    let mut candidates = Vec::with_capacity(distinct_asc.len() + 1);
    candidates.push(distinct_asc[0]);
    for pair in distinct_asc.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(f64::INFINITY);
    candidates
}

/// Find the threshold minimizing the balanced error rate. Ties break toward
/// higher sensitivity, then toward the lower threshold.
pub fn optimal_threshold(scores: &[f64], labels: &[u8]) -> Result<ThresholdChoice> {
    let (pairs, positives, negatives) = sorted_pairs(scores, labels)?;

    // cumulative positives over the descending order; cum_pos[k] = positives
    // among the k highest scores
    let mut cum_pos = Vec::with_capacity(pairs.len() + 1);
    cum_pos.push(0usize);
    for (_, label) in &pairs {
        cum_pos.push(cum_pos.last().unwrap() + usize::from(*label == 1));
    }

    let mut best: Option<ThresholdChoice> = None;
    for threshold in threshold_candidates(&pairs) {
        // literal inclusive rule: predicted positive count = |{s >= thr}|
        let predicted_pos = pairs.partition_point(|p| p.0 >= threshold);
        let tp = cum_pos[predicted_pos];
        let fp = predicted_pos - tp;
        let sensitivity = tp as f64 / positives as f64;
        let specificity = (negatives - fp) as f64 / negatives as f64;
        let candidate = ThresholdChoice {
            threshold,
            ber: ber(sensitivity, specificity),
            sensitivity,
            specificity,
        };
        let better = match &best {
            None => true,
            Some(b) => {
                candidate.ber < b.ber
                    || (candidate.ber == b.ber && candidate.sensitivity > b.sensitivity)
            }
        };
        if better {
            best = Some(candidate);
        }
    }
    Ok(best.expect("at least one candidate threshold exists"))
}
