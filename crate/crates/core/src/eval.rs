//! Precision-recall curves, average precision and macro PR-AUC.
//!
//! The area under a precision-recall curve is computed as average precision,
//! the step integral `sum_k (R_k - R_{k-1}) * P_k` over the curve's operating
//! points, not by trapezoidal interpolation (which overstates the area
//! between points).

use ndarray::ArrayView2;

use crate::nn::PredictionMatrix;
use crate::{Error, Result};

/// Operating points in order of decreasing threshold, starting from the
/// anchor `(recall 0, precision 1)` at threshold `+inf` and ending at full
/// recall.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub recall: Vec<f64>,
    pub precision: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl PrCurve {
    pub fn len(&self) -> usize {
        self.recall.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recall.is_empty()
    }

    /// Step integral of precision over recall.
    pub fn area(&self) -> f64 {
        self.recall
            .windows(2)
            .zip(&self.precision[1..])
            .map(|(r, p)| (r[1] - r[0]) * p)
            .sum()
    }
}

fn check_inputs(scores: &[f64], labels: &[f64]) -> Result<usize> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("no scores given".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("scores contain NaN".into()));
    }
    if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
    }
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 {
        return Err(Error::InvalidArgument("no positive labels".into()));
    }
    Ok(positives)
}

/// One operating point per distinct score; tied scores share a threshold.
pub fn precision_recall_curve(scores: &[f64], labels: &[f64]) -> Result<PrCurve> {
    let positives = check_inputs(scores, labels)? as f64;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut curve = PrCurve {
        recall: vec![0.0],
        precision: vec![1.0],
        thresholds: vec![f64::INFINITY],
    };
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let threshold = scores[order[i]];
        while i < order.len() && scores[order[i]] == threshold {
            if labels[order[i]] == 1.0 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        curve.recall.push(tp / positives);
        curve.precision.push(tp / (tp + fp));
        curve.thresholds.push(threshold);
    }
    Ok(curve)
}

pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64> {
    Ok(precision_recall_curve(scores, labels)?.area())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroAucPr {
    pub value: f64,
    /// Columns with no positives or no negatives, left out of the mean.
    pub degenerate_labels: usize,
}

/// Mean average precision over label columns that contain both classes.
pub fn macro_auc_pr(preds: ArrayView2<'_, f64>, labels: ArrayView2<'_, f64>) -> Result<MacroAucPr> {
    if preds.dim() != labels.dim() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs labels {:?}",
            preds.dim(),
            labels.dim()
        )));
    }
    let mut total = 0.0;
    let mut used = 0;
    let mut degenerate = 0;
    for (p, y) in preds.columns().into_iter().zip(labels.columns()) {
        let positives = y.iter().filter(|&&v| v == 1.0).count();
        if positives == 0 || positives == y.len() {
            degenerate += 1;
            continue;
        }
        total += average_precision(&p.to_vec(), &y.to_vec())?;
        used += 1;
    }
    if used == 0 {
        return Err(Error::AllLabelsDegenerate);
    }
    Ok(MacroAucPr {
        value: total / used as f64,
        degenerate_labels: degenerate,
    })
}

/// Fraction of entries where `pred >= threshold` agrees with the label.
pub fn train_accuracy(preds: &PredictionMatrix, labels: ArrayView2<'_, f64>, threshold: f64) -> Result<f64> {
    if preds.dim() != labels.dim() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs labels {:?}",
            preds.dim(),
            labels.dim()
        )));
    }
    if labels.is_empty() {
        return Ok(0.0);
    }
    let correct = preds
        .iter()
        .zip(labels.iter())
        .filter(|(&p, &y)| (p >= threshold) == (y == 1.0))
        .count();
    Ok(correct as f64 / labels.len() as f64)
}
