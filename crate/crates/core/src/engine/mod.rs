//! Coupled agreement training, independent training, post-hoc ensembling and
//! cross-validation selection.

mod config;
mod convergence;
mod cv;
mod train;

pub use config::{BurnIn, MethodKind, TrainerConfig};
pub use convergence::has_converged;
pub use cv::{cross_validate_select, fold_assignment, CvSelection, CV_FOLDS};
pub use train::{
    augmented_grad, fit_consensus_post_hoc, init_models, mean_pairwise_disagreement, predict_all,
    train_agreement, train_independent, EnsembleState,
};
