//! Majority vote and trainable (softmax-weighted) majority vote.

use ndarray::{Array2, ArrayView2, Zip};

use crate::nn::prediction_shape as common_shape;
use crate::nn::{AdamConfig, AdamState, PredictionMatrix, LOG_CLAMP};
use crate::{Error, Result};

/// Elementwise mean of the model predictions.
pub fn majority_vote(preds: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    let m = preds.len() as f64;
    weighted_sum(preds, &vec![1.0 / m; preds.len()])
}

fn weighted_sum(preds: &[PredictionMatrix], weights: &[f64]) -> Result<PredictionMatrix> {
    let dim = common_shape(preds)?;
    if weights.len() != preds.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} models",
            weights.len(),
            preds.len()
        )));
    }
    let mut out = Array2::<f64>::zeros(dim);
    for (p, &w) in preds.iter().zip(weights) {
        out.scaled_add(w, &**p);
    }
    // rounding can push a convex combination a hair past the unit interval
    out.mapv_inplace(|v| v.clamp(0.0, 1.0));
    Ok(PredictionMatrix::new_unchecked(out))
}

/// Trainable majority vote weights, parameterized by softmax logits so the
/// weights stay positive and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct TmvParams {
    pub logits: Vec<f64>,
}

impl TmvParams {
    /// Uniform weights.
    pub fn uniform(n_models: usize) -> Self {
        Self {
            logits: vec![0.0; n_models],
        }
    }

    pub fn n_models(&self) -> usize {
        self.logits.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        let max = self.logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = self.logits.iter().map(|&z| (z - max).exp()).collect();
        let total: f64 = exp.iter().sum();
        exp.into_iter().map(|e| e / total).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.logits.iter().all(|v| v.is_finite())
    }

    /// Labeled BCE of the combined prediction and its gradient w.r.t. the logits.
    pub fn loss_and_gradient(
        &self,
        preds: &[PredictionMatrix],
        labels: ArrayView2<'_, f64>,
    ) -> Result<(f64, Vec<f64>)> {
        let combined = tmv_combine(self, preds)?;
        if combined.dim() != labels.dim() {
            return Err(Error::Shape(format!(
                "predictions {:?} vs labels {:?}",
                combined.dim(),
                labels.dim()
            )));
        }
        let count = labels.len() as f64;
        let mut loss = 0.0;
        // dL/dc per entry, with c clamped as in the loss
        let mut d_combined = Array2::<f64>::zeros(labels.dim());
        Zip::from(&mut d_combined)
            .and(&*combined)
            .and(labels)
            .for_each(|d, &c, &t| {
                let c = c.clamp(LOG_CLAMP, 1.0 - LOG_CLAMP);
                loss -= t * c.ln() + (1.0 - t) * (1.0 - c).ln();
                *d = (c - t) / (c * (1.0 - c)) / count;
            });
        let weights = self.weights();
        let per_model: Vec<f64> = preds
            .iter()
            .map(|p| (&d_combined * &**p).sum())
            .collect();
        let mean: f64 = weights.iter().zip(&per_model).map(|(w, g)| w * g).sum();
        let grad = weights
            .iter()
            .zip(&per_model)
            .map(|(w, g)| w * (g - mean))
            .collect();
        Ok((loss / count, grad))
    }

    /// Runs `iters` Adam steps on the labeled loss.
    pub fn fit(
        &mut self,
        optimizer: &mut AdamState,
        preds: &[PredictionMatrix],
        labels: ArrayView2<'_, f64>,
        iters: usize,
    ) -> Result<()> {
        if labels.nrows() == 0 {
            return Err(Error::InvalidArgument(
                "trainable majority vote needs labeled rows".into(),
            ));
        }
        if preds.len() != self.n_models() {
            return Err(Error::Shape(format!(
                "{} prediction sets for {} weights",
                preds.len(),
                self.n_models()
            )));
        }
        for _ in 0..iters {
            let (_, grad) = self.loss_and_gradient(preds, labels)?;
            optimizer.step(&mut [self.logits.as_mut_slice()], &[grad.as_slice()]);
        }
        Ok(())
    }
}

/// `sum_j w_j * preds_j` with the current simplex weights.
pub fn tmv_combine(params: &TmvParams, preds: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    weighted_sum(preds, &params.weights())
}

/// Fits from `params` (warm start) or from uniform weights.
pub fn tmv_fit(
    params: &TmvParams,
    preds_labeled: &[PredictionMatrix],
    labels: ArrayView2<'_, f64>,
    max_iters: usize,
    warm_start: bool,
    adam: AdamConfig,
) -> Result<TmvParams> {
    let mut fitted = if warm_start {
        params.clone()
    } else {
        TmvParams::uniform(params.n_models())
    };
    let mut optimizer = AdamState::new(adam, &[fitted.n_models()]);
    fitted.fit(&mut optimizer, preds_labeled, labels, max_iters)?;
    Ok(fitted)
}
