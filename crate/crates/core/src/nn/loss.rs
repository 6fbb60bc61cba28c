use ndarray::ArrayView2;

use crate::{Error, Result};

/// Predictions are clamped to `[LOG_CLAMP, 1 - LOG_CLAMP]` before the log.
pub const LOG_CLAMP: f64 = 1e-7;

#[inline]
pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP)
}

#[inline]
pub(crate) fn bce_term(p: f64, t: f64) -> f64 {
    let p = clamp_prob(p);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Mean binary cross-entropy over all entries, with soft targets allowed.
/// An empty batch has zero loss.
pub fn bce_loss_raw(pred: ArrayView2<'_, f64>, target: ArrayView2<'_, f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    if pred.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(&p, &t)| bce_term(p, t))
        .sum();
    Ok(total / pred.len() as f64)
}

pub fn bce_loss(pred: &super::PredictionMatrix, target: ArrayView2<'_, f64>) -> Result<f64> {
    bce_loss_raw(pred.view(), target)
}
