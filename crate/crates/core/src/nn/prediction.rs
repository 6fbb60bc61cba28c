use std::ops::Deref;

use ndarray::{Array2, ArrayView2};

use crate::{Error, Result};

/// Rows x labels matrix of probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix(Array2<f64>);

impl PredictionMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument(
                "prediction entries must lie in [0, 1]".into(),
            ));
        }
        Ok(Self(values))
    }

    /// Caller guarantees every entry is a probability.
    pub(crate) fn new_unchecked(values: Array2<f64>) -> Self {
        debug_assert!(values.iter().all(|p| (0.0..=1.0).contains(p)));
        Self(values)
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

impl Deref for PredictionMatrix {
    type Target = Array2<f64>;

    fn deref(&self) -> &Array2<f64> {
        &self.0
    }
}

/// Checks that `preds` is non-empty and every matrix has the same shape.
pub(crate) fn common_shape(preds: &[PredictionMatrix]) -> Result<(usize, usize)> {
    let first = preds
        .first()
        .ok_or_else(|| Error::InvalidArgument("no model predictions given".into()))?;
    let dim = first.dim();
    if let Some(bad) = preds.iter().find(|p| p.dim() != dim) {
        return Err(Error::Shape(format!(
            "prediction shapes differ: {:?} vs {:?}",
            dim,
            bad.dim()
        )));
    }
    Ok(dim)
}
