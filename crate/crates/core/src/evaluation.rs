//! Pairwise precision / recall / F-score against ground truth.
//!
//! A pair of points is "predicted" when both are assigned the same universe
//! column (matching) or the same cluster id (clustering), and "true" when they
//! share a ground-truth label. For matching only pairs of points in different
//! objects are counted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problems::MatchingInstance;
use crate::rounding::{ClusterLabels, PartialPermutation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub n_predicted_pairs: u64,
    pub n_true_pairs: u64,
    pub n_correct_pairs: u64,
}

impl ScoreReport {
    pub fn from_counts(predicted: u64, truth: u64, correct: u64) -> Self {
        let precision = if predicted > 0 {
            correct as f64 / predicted as f64
        } else if truth == 0 {
            1.0
        } else {
            0.0
        };
        let recall = if truth > 0 {
            correct as f64 / truth as f64
        } else if predicted == 0 {
            1.0
        } else {
            0.0
        };
        let f_score = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self {
            precision,
            recall,
            f_score,
            n_predicted_pairs: predicted,
            n_true_pairs: truth,
            n_correct_pairs: correct,
        }
    }

    pub const CSV_HEADER: &'static str =
        "precision,recall,f_score,n_predicted_pairs,n_true_pairs,n_correct_pairs";

    /// One CSV record (no trailing newline), floats at 17 significant digits.
    pub fn to_csv_record(&self) -> String {
        format!(
            "{:.16e},{:.16e},{:.16e},{},{},{}",
            self.precision,
            self.recall,
            self.f_score,
            self.n_predicted_pairs,
            self.n_true_pairs,
            self.n_correct_pairs
        )
    }
}

/// Counts pairs `(a, b)`, `a < b`, optionally skipping pairs in the same group.
fn pair_counts(
    pred: &[Option<usize>],
    truth: &[usize],
    group: Option<&[usize]>,
) -> (u64, u64, u64) {
    let n = pred.len();
    let (mut p, mut t, mut c) = (0u64, 0u64, 0u64);
    for a in 0..n {
        for b in (a + 1)..n {
            if let Some(g) = group {
                if g[a] == g[b] {
                    continue;
                }
            }
            let same_pred = matches!((pred[a], pred[b]), (Some(x), Some(y)) if x == y);
            let same_true = truth[a] == truth[b];
            p += same_pred as u64;
            t += same_true as u64;
            c += (same_pred && same_true) as u64;
        }
    }
    (p, t, c)
}

/// Scores per-object assignments against the instance's ground-truth features.
pub fn score_matching(
    pred: &[PartialPermutation],
    truth: &MatchingInstance,
) -> Result<ScoreReport> {
    let sizes = truth.blocks.sizes();
    if pred.len() != sizes.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted blocks for {} objects",
            pred.len(),
            sizes.len()
        )));
    }
    for (b, (p, &s)) in pred.iter().zip(sizes).enumerate() {
        if p.len() != s {
            return Err(Error::DimensionMismatch(format!(
                "block {b}: predicted {} points, instance has {s}",
                p.len()
            )));
        }
    }
    let flat: Vec<Option<usize>> = pred
        .iter()
        .flat_map(|p| p.assignment().iter().copied())
        .collect();
    let groups = truth.blocks.object_of_rows();
    let (p, t, c) = pair_counts(&flat, &truth.ground_truth, Some(&groups));
    Ok(ScoreReport::from_counts(p, t, c))
}

/// Scores a clustering against ground-truth labels.
pub fn score_clustering(pred: &ClusterLabels, truth: &[usize]) -> Result<ScoreReport> {
    if pred.labels.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predicted labels for {} points",
            pred.labels.len(),
            truth.len()
        )));
    }
    let flat: Vec<Option<usize>> = pred.labels.iter().copied().map(Some).collect();
    let (p, t, c) = pair_counts(&flat, truth, None);
    Ok(ScoreReport::from_counts(p, t, c))
}
