use std::fmt;
use std::str::FromStr;

use crate::consensus::ConsensusKind;
use crate::nn::AdamConfig;
use crate::{Error, Result};

/// When the agreement term switches on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BurnIn {
    /// Plain supervised steps while `iteration <= K0`.
    Iterations(usize),
    /// Plain supervised steps until at least half of the models exceed this
    /// accuracy on their labeled batch.
    TrainAccuracy(f64),
}

impl BurnIn {
    pub const NEVER: BurnIn = BurnIn::Iterations(usize::MAX);
}

/// Knobs of the coupled training loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerConfig {
    /// Unlabeled batch size `N_U`.
    pub unlabeled_batch: usize,
    /// Labeled batch size `N_L`.
    pub labeled_batch: usize,
    pub burn_in: BurnIn,
    /// Consensus refit period `K`.
    pub retrain_every: usize,
    /// Agreement weight shared by all models.
    pub lambda: f64,
    /// Per-model agreement weights; overrides `lambda` when set.
    pub model_lambdas: Option<Vec<f64>>,
    pub max_iters: usize,
    pub consensus_initial_iters: usize,
    pub consensus_refit_iters: usize,
    pub convergence_window: usize,
    pub convergence_tol: f64,
    pub model_adam: AdamConfig,
    pub consensus_adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            unlabeled_batch: 128,
            labeled_batch: 128,
            burn_in: BurnIn::Iterations(10),
            retrain_every: 100,
            lambda: 1.0,
            model_lambdas: None,
            max_iters: 2000,
            consensus_initial_iters: 10_000,
            consensus_refit_iters: 1_000,
            convergence_window: 50,
            convergence_tol: 1e-4,
            model_adam: AdamConfig::default(),
            consensus_adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.unlabeled_batch == 0 || self.labeled_batch == 0 {
            return bad("batch sizes must be positive");
        }
        if self.retrain_every == 0 {
            return bad("consensus retrain period must be positive");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and non-negative");
        }
        if let Some(lambdas) = &self.model_lambdas {
            if lambdas.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return bad("per-model lambdas must be finite and non-negative");
            }
        }
        if self.convergence_window < 2 {
            return bad("convergence window must be at least 2");
        }
        if !(self.convergence_tol >= 0.0) {
            return bad("convergence tolerance must be non-negative");
        }
        if let BurnIn::TrainAccuracy(t) = self.burn_in {
            if !(0.0..=1.0).contains(&t) {
                return bad("burn-in accuracy threshold must lie in [0, 1]");
            }
        }
        Ok(())
    }

    pub fn lambda_for(&self, model: usize) -> f64 {
        self.model_lambdas
            .as_ref()
            .and_then(|l| l.get(model).copied())
            .unwrap_or(self.lambda)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// The compared methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MethodKind {
    /// 5-fold cross-validation selection of a single architecture.
    Cv5,
    /// Independent training, then a trainable majority vote.
    Tmv,
    /// Agreement training with a trainable majority vote consensus.
    TmvAl,
    /// Independent training, then the semi-supervised RBM.
    Rbm,
    /// Agreement training with the semi-supervised RBM consensus.
    RbmAl,
    /// Independent training, then a plain majority vote.
    Mv,
}

impl MethodKind {
    pub const ALL: [MethodKind; 6] = [
        MethodKind::Cv5,
        MethodKind::Tmv,
        MethodKind::TmvAl,
        MethodKind::Rbm,
        MethodKind::RbmAl,
        MethodKind::Mv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Cv5 => "CV5",
            Self::Tmv => "TMV",
            Self::TmvAl => "TMV_AL",
            Self::Rbm => "RBM",
            Self::RbmAl => "RBM_AL",
            Self::Mv => "MV",
        }
    }

    /// Consensus method; `None` for cross-validation.
    pub fn consensus(self) -> Option<ConsensusKind> {
        match self {
            Self::Cv5 => None,
            Self::Tmv | Self::TmvAl => Some(ConsensusKind::TrainableMajorityVote),
            Self::Rbm | Self::RbmAl => Some(ConsensusKind::Rbm),
            Self::Mv => Some(ConsensusKind::MajorityVote),
        }
    }

    pub fn uses_agreement(self) -> bool {
        matches!(self, Self::TmvAl | Self::RbmAl)
    }
}

impl fmt::Display for MethodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        let key = if key == "CV_5" { "CV5".to_string() } else { key };
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}
