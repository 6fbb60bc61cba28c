//! Agreement-based training of multi-label classifier ensembles.
//!
//! Several MLPs are trained in tandem. After a short burn-in each model's
//! supervised loss is augmented with a penalty for disagreeing with a
//! trainable consensus prediction on unlabeled inputs, and the consensus is
//! periodically refit on labeled and unlabeled data. The consensus is also
//! the ensemble's output prediction.
//!
//! Modules:
//!
//! - [`data`]: datasets, the sparse text format, ARFF ingestion, splits, batching,
//!   and a synthetic teacher-network generator.
//! - [`nn`]: dense MLPs with hand-derived backprop, binary cross-entropy and Adam.
//! - [`consensus`]: majority vote, trainable majority vote and the per-label
//!   semi-supervised RBM.
//! - [`engine`]: the coupled training loop, independent training, post-hoc
//!   ensembling and 5-fold cross-validation selection.
//! - [`eval`]: precision-recall curves and macro-averaged PR-AUC.
//! - [`experiment`]: config files, the method x seed sweep and reports.

pub mod consensus;
pub mod data;
pub mod engine;
mod error;
pub mod eval;
pub mod experiment;
pub mod nn;
pub mod seeding;

pub use ndarray;

pub use consensus::{ConsensusKind, ConsensusModel};
pub use data::{Batch, BatchSampler, DataSplit, Dataset, SyntheticSpec};
pub use engine::{BurnIn, EnsembleState, MethodKind, TrainerConfig};
pub use error::{Error, Result};
pub use experiment::{ExperimentConfig, ResultRow};
pub use nn::{AdamConfig, AdamState, Gradients, MlpArchitecture, MlpModel, PredictionMatrix};
