//! Consensus predictions: majority vote, trainable majority vote and the
//! semi-supervised per-label RBM.

mod checkpoint;
pub mod rbm;
mod vote;

use std::fmt;
use std::str::FromStr;

use ndarray::ArrayView2;
use rand::RngCore;

pub use checkpoint::{read_consensus, write_consensus};
pub use rbm::{
    labeled_log_likelihood, rbm_combine, rbm_conditional, rbm_fit, rbm_free_energy, RbmBlock,
    RbmData, RbmGradient, RbmParams,
};
pub use vote::{majority_vote, tmv_combine, tmv_fit, TmvParams};

use crate::nn::{AdamConfig, AdamState, PredictionMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConsensusKind {
    MajorityVote,
    TrainableMajorityVote,
    Rbm,
}

impl fmt::Display for ConsensusKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::MajorityVote => "mv",
            Self::TrainableMajorityVote => "tmv",
            Self::Rbm => "rbm",
        })
    }
}

impl FromStr for ConsensusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mv" => Ok(Self::MajorityVote),
            "tmv" => Ok(Self::TrainableMajorityVote),
            "rbm" => Ok(Self::Rbm),
            other => Err(Error::Config(format!("unknown consensus kind `{other}`"))),
        }
    }
}

/// Parameters and optimizer state of a consensus method.
#[derive(Debug, Clone, PartialEq)]
pub enum ConsensusParams {
    MajorityVote,
    TrainableMajorityVote {
        params: TmvParams,
        optimizer: AdamState,
    },
    Rbm {
        params: RbmParams,
        /// One optimizer per label block.
        optimizers: Vec<AdamState>,
    },
}

/// Model and label predictions available to a consensus refit.
#[derive(Debug, Clone, Copy)]
pub struct ConsensusData<'a> {
    /// Per-model predictions on the unlabeled pool (may be empty).
    pub unlabeled: &'a [PredictionMatrix],
    /// Per-model predictions on the labeled rows.
    pub labeled: &'a [PredictionMatrix],
    pub labels: ArrayView2<'a, f64>,
}

/// The consensus prediction over `n_models` models and `n_labels` labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusModel {
    n_models: usize,
    n_labels: usize,
    adam: AdamConfig,
    pub params: ConsensusParams,
    pub rbm_gradient: RbmGradient,
}

impl ConsensusModel {
    /// Neutral initial parameters: uniform weights, or an all-zero RBM.
    pub fn new(kind: ConsensusKind, n_models: usize, n_labels: usize, adam: AdamConfig) -> Self {
        let params = match kind {
            ConsensusKind::MajorityVote => ConsensusParams::MajorityVote,
            ConsensusKind::TrainableMajorityVote => ConsensusParams::TrainableMajorityVote {
                params: TmvParams::uniform(n_models),
                optimizer: AdamState::new(adam, &[n_models]),
            },
            ConsensusKind::Rbm => {
                let params = RbmParams::zeros(n_models, n_labels);
                ConsensusParams::Rbm {
                    optimizers: params.optimizers(adam),
                    params,
                }
            }
        };
        Self {
            n_models,
            n_labels,
            adam,
            params,
            rbm_gradient: RbmGradient::default(),
        }
    }

    pub(crate) fn from_parts(
        n_models: usize,
        n_labels: usize,
        adam: AdamConfig,
        params: ConsensusParams,
    ) -> Self {
        Self {
            n_models,
            n_labels,
            adam,
            params,
            rbm_gradient: RbmGradient::default(),
        }
    }

    pub fn kind(&self) -> ConsensusKind {
        match self.params {
            ConsensusParams::MajorityVote => ConsensusKind::MajorityVote,
            ConsensusParams::TrainableMajorityVote { .. } => ConsensusKind::TrainableMajorityVote,
            ConsensusParams::Rbm { .. } => ConsensusKind::Rbm,
        }
    }

    pub fn n_models(&self) -> usize {
        self.n_models
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn adam_config(&self) -> AdamConfig {
        self.adam
    }

    pub fn is_trainable(&self) -> bool {
        self.kind() != ConsensusKind::MajorityVote
    }

    /// All trainable parameters, flattened.
    pub fn parameter_vector(&self) -> Vec<f64> {
        match &self.params {
            ConsensusParams::MajorityVote => Vec::new(),
            ConsensusParams::TrainableMajorityVote { params, .. } => params.logits.clone(),
            ConsensusParams::Rbm { params, .. } => params
                .blocks
                .iter()
                .flat_map(|b| std::iter::once(b.a).chain(b.b.iter().copied()).chain(b.w.iter().copied()))
                .collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.parameter_vector().iter().all(|v| v.is_finite())
    }

    fn check_preds(&self, preds: &[PredictionMatrix]) -> Result<()> {
        if preds.len() != self.n_models {
            return Err(Error::Shape(format!(
                "{} prediction sets for a consensus over {} models",
                preds.len(),
                self.n_models
            )));
        }
        Ok(())
    }

    pub fn predict(&self, preds: &[PredictionMatrix]) -> Result<PredictionMatrix> {
        self.check_preds(preds)?;
        let out = match &self.params {
            ConsensusParams::MajorityVote => majority_vote(preds)?,
            ConsensusParams::TrainableMajorityVote { params, .. } => tmv_combine(params, preds)?,
            ConsensusParams::Rbm { params, .. } => rbm_combine(params, preds)?,
        };
        if out.ncols() != self.n_labels {
            return Err(Error::Shape(format!(
                "predictions have {} labels, consensus expects {}",
                out.ncols(),
                self.n_labels
            )));
        }
        Ok(out)
    }

    /// Refits for `iters` optimizer steps. Without `warm_start` the
    /// parameters and optimizer state are reset first. Majority vote is
    /// left unchanged.
    pub fn fit(
        &mut self,
        data: &ConsensusData<'_>,
        iters: usize,
        warm_start: bool,
        rng: &mut impl RngCore,
    ) -> Result<()> {
        if !warm_start {
            *self = Self {
                rbm_gradient: self.rbm_gradient,
                ..Self::new(self.kind(), self.n_models, self.n_labels, self.adam)
            };
        }
        let gradient = self.rbm_gradient;
        match &mut self.params {
            ConsensusParams::MajorityVote => Ok(()),
            ConsensusParams::TrainableMajorityVote { params, optimizer } => {
                params.fit(optimizer, data.labeled, data.labels, iters)
            }
            ConsensusParams::Rbm { params, optimizers } => {
                let rbm_data = RbmData {
                    unlabeled: data.unlabeled,
                    labeled: data.labeled,
                    labels: data.labels,
                };
                params.fit(optimizers, &rbm_data, iters, gradient, rng)
            }
        }
    }
}

pub fn consensus_predict(
    model: &ConsensusModel,
    preds: &[PredictionMatrix],
) -> Result<PredictionMatrix> {
    model.predict(preds)
}

pub fn consensus_fit(
    mut model: ConsensusModel,
    data: &ConsensusData<'_>,
    iters: usize,
    warm_start: bool,
    rng: &mut impl RngCore,
) -> Result<ConsensusModel> {
    model.fit(data, iters, warm_start, rng)?;
    Ok(model)
}
