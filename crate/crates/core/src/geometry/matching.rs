use serde::{Deserialize, Serialize};

use super::{iou, BoundingBox};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub cutoff: f64,
    /// `(prediction index, truth index, iou)` in selection order.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_predictions: Vec<usize>,
    pub unmatched_truths: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub cutoff_iou: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricsReport {
    /// Ratios from raw counts. A zero denominator yields 0.
    pub fn from_counts(tp: usize, fp: usize, fn_: usize, cutoff_iou: f64) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { cutoff_iou, tp, fp, fn_, precision, recall, f1 }
    }

    /// Sums counts over frames and recomputes the ratios.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>, cutoff_iou: f64) -> Self {
        let (tp, fp, fn_) = reports.into_iter().fold((0, 0, 0), |(tp, fp, fn_), r| (tp + r.tp, fp + r.fp, fn_ + r.fn_));
        Self::from_counts(tp, fp, fn_, cutoff_iou)
    }
}

/// Global-maximum greedy assignment over the full IoU matrix.
///
/// The largest remaining IoU (ties: lower prediction index, then lower truth
/// index) is paired and its row and column removed, until no remaining entry
/// reaches `cutoff`. The comparison is inclusive; pairs must overlap, so a
/// zero cutoff matches any overlapping pair but never disjoint boxes.
///
/// Walking the candidate list sorted once is equivalent to rescanning the
/// matrix after every deletion.
pub fn greedy_match(preds: &[BoundingBox], truths: &[BoundingBox], cutoff: f64) -> MatchResult {
    let matrix: Vec<Vec<f64>> = preds.iter().map(|p| truths.iter().map(|t| iou(p, t)).collect()).collect();
    greedy_assign(&matrix, truths.len(), cutoff)
}

/// [`greedy_match`] on a precomputed `preds x truths` IoU matrix.
pub fn greedy_assign(matrix: &[Vec<f64>], n_truths: usize, cutoff: f64) -> MatchResult {
    let mut candidates = Vec::new();
    for (i, row) in matrix.iter().enumerate() {
        debug_assert_eq!(row.len(), n_truths);
        for (j, &v) in row.iter().enumerate() {
            if v > 0.0 && v >= cutoff {
                candidates.push((i, j, v));
            }
        }
    }
    candidates.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut pred_used = vec![false; matrix.len()];
    let mut truth_used = vec![false; n_truths];
    let mut pairs = Vec::new();
    for (i, j, v) in candidates {
        if !pred_used[i] && !truth_used[j] {
            pred_used[i] = true;
            truth_used[j] = true;
            pairs.push((i, j, v));
        }
    }
    MatchResult {
        cutoff,
        pairs,
        unmatched_predictions: (0..matrix.len()).filter(|&i| !pred_used[i]).collect(),
        unmatched_truths: (0..n_truths).filter(|&j| !truth_used[j]).collect(),
    }
}

pub fn metrics(m: &MatchResult) -> MetricsReport {
    MetricsReport::from_counts(m.pairs.len(), m.unmatched_predictions.len(), m.unmatched_truths.len(), m.cutoff)
}

/// One report per cutoff.
pub fn f1_sweep(preds: &[BoundingBox], truths: &[BoundingBox], cutoffs: &[f64]) -> Vec<MetricsReport> {
    cutoffs.iter().map(|&c| metrics(&greedy_match(preds, truths, c))).collect()
}
