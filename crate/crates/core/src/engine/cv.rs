use rand::seq::SliceRandom;

use super::config::TrainerConfig;
use super::train::{train_independent, EnsembleState};
use crate::consensus::{ConsensusKind, ConsensusModel};
use crate::data::Dataset;
use crate::eval::macro_auc_pr;
use crate::nn::{MlpArchitecture, MlpModel};
use crate::seeding::{self, stream};
use crate::{Error, Result};

pub const CV_FOLDS: usize = 5;

/// Outcome of model selection by cross-validation.
#[derive(Debug, Clone)]
pub struct CvSelection {
    pub best_index: usize,
    /// The winning architecture retrained on the whole labeled set.
    pub best_model: MlpModel,
    /// Mean validation macro PR-AUC per candidate; NaN if no fold was scorable.
    pub mean_scores: Vec<f64>,
    /// Iterations of the final retraining.
    pub iterations: usize,
}

fn single_model_state(arch: &MlpArchitecture, d: usize, l: usize, config: &TrainerConfig) -> Result<EnsembleState> {
    let model = MlpModel::init(arch, d, l, seeding::derive2(config.seed, stream::MODEL_INIT, 0))?;
    let consensus = ConsensusModel::new(ConsensusKind::MajorityVote, 1, l, config.consensus_adam);
    EnsembleState::new(vec![model], consensus, config)
}

/// Contiguous blocks of a shuffled order; sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::rng(seeding::derive(seed, stream::CV_FOLDS)));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(order[start..start + len].to_vec());
        start += len;
    }
    out
}

/// Picks the architecture with the best mean 5-fold validation macro PR-AUC
/// and retrains it on all of `labeled`. Ties go to the earliest candidate.
pub fn cross_validate_select(
    candidates: &[MlpArchitecture],
    labeled: &Dataset,
    config: &TrainerConfig,
) -> Result<CvSelection> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument("no candidate architectures".into()));
    }
    let n = labeled.n_instances();
    if n < CV_FOLDS {
        return Err(Error::InvalidArgument(format!(
            "{CV_FOLDS}-fold cross-validation needs at least {CV_FOLDS} labeled rows, got {n}"
        )));
    }
    let labels = labeled.require_labels()?;
    let (d, l) = (labeled.n_features(), labels.ncols());
    let folds = fold_assignment(n, CV_FOLDS, config.seed);

    let mut mean_scores = Vec::with_capacity(candidates.len());
    for arch in candidates {
        let mut total = 0.0;
        let mut scored = 0usize;
        for (f, held_out) in folds.iter().enumerate() {
            let train_rows: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(g, _)| *g != f)
                .flat_map(|(_, rows)| rows.iter().copied())
                .collect();
            let fold_config = config.with_seed(seeding::derive2(config.seed, stream::CV_TRAINING, f as u64));
            let train = labeled.select_rows(&train_rows)?;
            let valid = labeled.select_rows(held_out)?;
            let state = train_independent(single_model_state(arch, d, l, &fold_config)?, &train, &fold_config)?;
            let preds = state.models[0].forward(valid.features())?;
            match macro_auc_pr(preds.view(), valid.require_labels()?) {
                Ok(score) => {
                    total += score.value;
                    scored += 1;
                }
                Err(Error::AllLabelsDegenerate) => {}
                Err(e) => return Err(e),
            }
        }
        mean_scores.push(if scored == 0 { f64::NAN } else { total / scored as f64 });
    }

    let mut best_index = 0;
    for (i, s) in mean_scores.iter().enumerate() {
        let best = mean_scores[best_index];
        if *s > best || (best.is_nan() && !s.is_nan()) {
            best_index = i;
        }
    }
    let state = train_independent(single_model_state(&candidates[best_index], d, l, config)?, labeled, config)?;
    Ok(CvSelection {
        best_index,
        iterations: state.iterations,
        best_model: state.models.into_iter().next().expect("one model"),
        mean_scores,
    })
}
