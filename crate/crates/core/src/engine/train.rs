use ndarray::ArrayView2;
use rayon::prelude::*;

use super::config::{BurnIn, TrainerConfig};
use super::convergence::has_converged;
use crate::consensus::{ConsensusData, ConsensusModel};
use crate::data::{Batch, BatchSampler, DataSplit, Dataset};
use crate::eval::train_accuracy;
use crate::nn::{adam_step, bce_loss_raw, AdamState, Gradients, MlpArchitecture, MlpModel, PredictionMatrix};
use crate::seeding::{self, stream};
use crate::{Error, Result};

/// Models, their optimizers, the consensus and the training record.
#[derive(Debug, Clone)]
pub struct EnsembleState {
    pub models: Vec<MlpModel>,
    pub optimizers: Vec<AdamState>,
    pub consensus: ConsensusModel,
    pub converged: Vec<bool>,
    /// Per model, the supervised loss on the labeled batch of every step it
    /// took. Convergence is judged on this history.
    pub loss_history: Vec<Vec<f64>>,
    /// Per model, the objective actually minimized at each step: equal to
    /// `loss_history` during burn-in, the augmented loss afterwards.
    pub objective_history: Vec<Vec<f64>>,
    /// Per iteration, the mean pairwise BCE between model predictions on the
    /// unlabeled batch. Empty when no unlabeled batches were drawn.
    pub disagreement_history: Vec<f64>,
    /// Iterations run.
    pub iterations: usize,
    /// Number of consensus (re)fits performed.
    pub consensus_fits: usize,
    /// First iteration that used the augmented loss, if any.
    pub augmented_from: Option<usize>,
}

impl EnsembleState {
    /// Fresh state around already-initialized models.
    pub fn new(models: Vec<MlpModel>, consensus: ConsensusModel, config: &TrainerConfig) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::InvalidArgument("ensemble needs at least one model".into()));
        }
        if consensus.n_models() != models.len() {
            return Err(Error::Shape(format!(
                "consensus over {} models for an ensemble of {}",
                consensus.n_models(),
                models.len()
            )));
        }
        let m = models.len();
        Ok(Self {
            optimizers: models
                .iter()
                .map(|model| AdamState::for_model(config.model_adam, model))
                .collect(),
            models,
            consensus,
            converged: vec![false; m],
            loss_history: vec![Vec::new(); m],
            objective_history: vec![Vec::new(); m],
            disagreement_history: Vec::new(),
            iterations: 0,
            consensus_fits: 0,
            augmented_from: None,
        })
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    /// Consensus prediction on `x`.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<PredictionMatrix> {
        self.consensus.predict(&predict_all(&self.models, x)?)
    }

    fn consensus_refit(&mut self, split_labeled: &Dataset, unlabeled: Option<&Dataset>, iters: usize, warm_start: bool, rng: &mut seeding::Rng) -> Result<()> {
        if self.consensus.is_trainable() {
            let labeled_preds = predict_all(&self.models, split_labeled.features())?;
            let unlabeled_preds = match unlabeled {
                Some(u) => predict_all(&self.models, u.features())?,
                None => Vec::new(),
            };
            let data = ConsensusData {
                unlabeled: &unlabeled_preds,
                labeled: &labeled_preds,
                labels: split_labeled.require_labels()?,
            };
            self.consensus.fit(&data, iters, warm_start, rng)?;
        }
        self.consensus_fits += 1;
        Ok(())
    }
}

/// Initializes one model per architecture; model `j` uses seed stream `j`.
pub fn init_models(architectures: &[MlpArchitecture], input_dim: usize, output_dim: usize, seed: u64) -> Result<Vec<MlpModel>> {
    architectures
        .iter()
        .enumerate()
        .map(|(j, arch)| {
            MlpModel::init(arch, input_dim, output_dim, seeding::derive2(seed, stream::MODEL_INIT, j as u64))
        })
        .collect()
}

pub fn predict_all(models: &[MlpModel], x: ArrayView2<'_, f64>) -> Result<Vec<PredictionMatrix>> {
    models.par_iter().map(|m| m.forward(x)).collect()
}

/// Mean BCE over ordered pairs of distinct models, each scored against the
/// other's predictions. Zero for a single model.
pub fn mean_pairwise_disagreement(preds: &[PredictionMatrix]) -> Result<f64> {
    let m = preds.len();
    if m < 2 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (j, a) in preds.iter().enumerate() {
        for (k, b) in preds.iter().enumerate() {
            if j != k {
                total += bce_loss_raw(a.view(), b.view())?;
            }
        }
    }
    Ok(total / (m * (m - 1)) as f64)
}

/// Loss and gradient of `bce(f(x_L), y_L) + lambda * bce(f(x_U), consensus)`.
///
/// The consensus is a constant target. With `lambda == 0` the result is
/// exactly the plain labeled loss and gradient.
pub fn augmented_grad(
    model: &MlpModel,
    labeled: &Batch,
    unlabeled: &Batch,
    consensus_preds: &PredictionMatrix,
    lambda: f64,
) -> Result<(f64, Gradients)> {
    let (parts, grads) = augmented_parts(model, labeled, unlabeled, consensus_preds, lambda)?;
    Ok((parts.0 + lambda * parts.1, grads))
}

/// As [`augmented_grad`], returning the supervised and agreement losses
/// separately.
fn augmented_parts(
    model: &MlpModel,
    labeled: &Batch,
    unlabeled: &Batch,
    consensus_preds: &PredictionMatrix,
    lambda: f64,
) -> Result<((f64, f64), Gradients)> {
    let labels = labeled
        .labels
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("labeled batch has no labels".into()))?;
    if consensus_preds.nrows() != unlabeled.len() {
        return Err(Error::Shape(format!(
            "{} consensus rows for an unlabeled batch of {}",
            consensus_preds.nrows(),
            unlabeled.len()
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("lambda {lambda} must be non-negative")));
    }
    let (loss, mut grads) = model.backward(labeled.features.view(), labels.view())?;
    if lambda == 0.0 {
        return Ok(((loss, 0.0), grads));
    }
    let (agreement, agreement_grads) = model.backward(unlabeled.features.view(), consensus_preds.view())?;
    grads.add_scaled(&agreement_grads, lambda);
    Ok(((loss, agreement), grads))
}

#[derive(Clone, Copy, PartialEq)]
enum Mode {
    Independent,
    Agreement,
}

fn run(
    mut state: EnsembleState,
    labeled: &Dataset,
    unlabeled: Option<&Dataset>,
    config: &TrainerConfig,
    mode: Mode,
) -> Result<EnsembleState> {
    config.validate()?;
    let labels = labeled.require_labels()?;
    let input_dim = labeled.n_features();
    let output_dim = labels.ncols();
    if let Some(bad) = state.models.iter().find(|m| m.input_dim() != input_dim || m.output_dim() != output_dim) {
        return Err(Error::Shape(format!(
            "model maps {} -> {}, data is {input_dim} -> {output_dim}",
            bad.input_dim(),
            bad.output_dim()
        )));
    }
    let unlabeled = unlabeled.filter(|u| mode == Mode::Agreement && u.n_instances() > 0);

    let mut labeled_sampler = BatchSampler::new(
        labeled.n_instances(),
        config.labeled_batch,
        seeding::rng(seeding::derive(config.seed, stream::LABELED_BATCHES)),
    )?;
    let mut unlabeled_sampler = unlabeled
        .map(|u| {
            BatchSampler::new(
                u.n_instances(),
                config.unlabeled_batch,
                seeding::rng(seeding::derive(config.seed, stream::UNLABELED_BATCHES)),
            )
        })
        .transpose()?;
    let mut consensus_rng = seeding::rng(seeding::derive(config.seed, stream::CONSENSUS));
    let mut accuracy_reached = false;
    let m = state.n_models();
    let lambdas: Vec<f64> = (0..m).map(|j| config.lambda_for(j)).collect();

    while state.converged.iter().any(|c| !c) && state.iterations < config.max_iters {
        let iteration = state.iterations;
        let labeled_batch = labeled_sampler.sample(labeled);

        let mut consensus_target = None;
        let mut unlabeled_batch = None;
        if let (Some(sampler), Some(pool)) = (unlabeled_sampler.as_mut(), unlabeled) {
            let batch = sampler.sample(pool);
            let member_preds = predict_all(&state.models, batch.features.view())?;
            state.disagreement_history.push(mean_pairwise_disagreement(&member_preds)?);
            let augment = match config.burn_in {
                BurnIn::Iterations(k0) => iteration > k0,
                BurnIn::TrainAccuracy(_) => accuracy_reached,
            };
            if augment {
                state.augmented_from.get_or_insert(iteration);
                consensus_target = Some(state.consensus.predict(&member_preds)?);
            }
            unlabeled_batch = Some(batch);
        }

        let EnsembleState {
            models,
            optimizers,
            converged,
            loss_history,
            objective_history,
            ..
        } = &mut state;
        models
            .par_iter_mut()
            .zip(optimizers.par_iter_mut())
            .zip(converged.par_iter_mut())
            .zip(loss_history.par_iter_mut().zip(objective_history.par_iter_mut()))
            .zip(lambdas.par_iter())
            .filter(|((((_, _), done), _), _)| !**done)
            .try_for_each(|((((model, opt), done), (history, objective)), &lambda)| -> Result<()> {
                let ((loss, agreement), grads) = match (&consensus_target, &unlabeled_batch) {
                    (Some(target), Some(batch)) => augmented_parts(model, &labeled_batch, batch, target, lambda)?,
                    _ => {
                        let (loss, grads) = model.backward(
                            labeled_batch.features.view(),
                            labeled_batch.labels.as_ref().expect("labeled").view(),
                        )?;
                        ((loss, 0.0), grads)
                    }
                };
                adam_step(model, &grads, opt);
                history.push(loss);
                objective.push(loss + lambda * agreement);
                *done = has_converged(history, config.convergence_window, config.convergence_tol);
                Ok(())
            })?;

        if mode == Mode::Agreement && iteration % config.retrain_every == 0 {
            let first = state.consensus_fits == 0;
            let iters = if first { config.consensus_initial_iters } else { config.consensus_refit_iters };
            state.consensus_refit(labeled, unlabeled, iters, !first, &mut consensus_rng)?;
        }

        if let BurnIn::TrainAccuracy(threshold) = config.burn_in {
            if !accuracy_reached && unlabeled.is_some() {
                let labels = labeled_batch.labels.as_ref().expect("labeled");
                let mut above = 0;
                for model in &state.models {
                    let preds = model.forward(labeled_batch.features.view())?;
                    if train_accuracy(&preds, labels.view(), 0.5)? > threshold {
                        above += 1;
                    }
                }
                accuracy_reached = 2 * above >= m;
            }
        }
        state.iterations += 1;
    }

    if mode == Mode::Agreement {
        let first = state.consensus_fits == 0;
        let iters = if first { config.consensus_initial_iters } else { config.consensus_refit_iters };
        state.consensus_refit(labeled, unlabeled, iters, !first, &mut consensus_rng)?;
    }
    Ok(state)
}

/// Trains all models jointly: plain labeled steps during burn-in, augmented
/// steps afterwards, with the consensus refit on the full labeled set and
/// unlabeled pool every `retrain_every` iterations (starting at iteration 0)
/// and once more at the end.
///
/// With an empty unlabeled pool this degenerates to independent training.
pub fn train_agreement(state: EnsembleState, split: &DataSplit, config: &TrainerConfig) -> Result<EnsembleState> {
    run(state, &split.labeled, split.unlabeled.as_ref(), config, Mode::Agreement)
}

/// Trains every model on its own labeled loss; the consensus is untouched.
pub fn train_independent(state: EnsembleState, labeled: &Dataset, config: &TrainerConfig) -> Result<EnsembleState> {
    run(state, labeled, None, config, Mode::Independent)
}

/// Fits the consensus once, from scratch, on the trained models' predictions
/// over the labeled set and the unlabeled pool.
pub fn fit_consensus_post_hoc(mut state: EnsembleState, split: &DataSplit, config: &TrainerConfig) -> Result<EnsembleState> {
    if state.loss_history.iter().any(Vec::is_empty) {
        return Err(Error::InvalidArgument("post-hoc consensus needs trained models".into()));
    }
    let mut rng = seeding::rng(seeding::derive(config.seed, stream::CONSENSUS));
    state.consensus_refit(&split.labeled, split.unlabeled.as_ref(), config.consensus_initial_iters, false, &mut rng)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consensus::ConsensusKind;
    use crate::data::{generate_synthetic, shuffle_split, SyntheticSpec};
    use crate::nn::AdamConfig;

    fn small_split(seed: u64) -> DataSplit {
        let spec = SyntheticSpec {
            n_instances: 200,
            n_features: 6,
            n_labels: 3,
            teacher_hidden: vec![4],
            label_noise: 0.05,
            density_bias: 0.0,
        };
        shuffle_split(&generate_synthetic(&spec, seed).unwrap(), 0.3, seed).unwrap()
    }

    fn archs() -> Vec<MlpArchitecture> {
        MlpArchitecture::parse_list("[], [4], [8 4]").unwrap()
    }

    fn state(kind: ConsensusKind, split: &DataSplit, config: &TrainerConfig) -> EnsembleState {
        let models = init_models(&archs(), split.labeled.n_features(), 3, config.seed).unwrap();
        let consensus = ConsensusModel::new(kind, models.len(), 3, config.consensus_adam);
        EnsembleState::new(models, consensus, config).unwrap()
    }

    fn quick_config() -> TrainerConfig {
        TrainerConfig {
            labeled_batch: 32,
            unlabeled_batch: 32,
            max_iters: 120,
            retrain_every: 25,
            consensus_initial_iters: 200,
            consensus_refit_iters: 50,
            ..Default::default()
        }
    }

    #[test]
    fn refit_count() {
        let split = small_split(1);
        let config = quick_config();
        let out = train_agreement(state(ConsensusKind::Rbm, &split, &config), &split, &config).unwrap();
        assert_eq!(out.iterations, 120);
        // iterations 0, 25, 50, 75, 100 plus the final refit
        assert_eq!(out.consensus_fits, 120usize.div_ceil(25) + 1);
        assert_eq!(out.augmented_from, Some(11));
        assert_eq!(out.disagreement_history.len(), 120);
        assert!(out.consensus.is_finite());
    }

    #[test]
    fn no_burn_in_end_means_independent() {
        let split = small_split(2);
        let config = TrainerConfig { burn_in: BurnIn::NEVER, ..quick_config() };
        let a = train_agreement(state(ConsensusKind::TrainableMajorityVote, &split, &config), &split, &config).unwrap();
        let b = train_independent(state(ConsensusKind::TrainableMajorityVote, &split, &config), &split.labeled, &config).unwrap();
        assert_eq!(a.models, b.models);
        assert_eq!(a.loss_history, b.loss_history);
        assert_eq!(a.augmented_from, None);
    }

    #[test]
    fn single_model_majority_vote_matches_independent() {
        let split = small_split(3);
        let config = quick_config();
        let one = |seed| {
            let models = init_models(&archs()[1..2], 6, 3, seed).unwrap();
            let consensus = ConsensusModel::new(ConsensusKind::MajorityVote, 1, 3, AdamConfig::default());
            EnsembleState::new(models, consensus, &config).unwrap()
        };
        let a = train_agreement(one(0), &split, &config).unwrap();
        let b = train_independent(one(0), &split.labeled, &config).unwrap();
        // the agreement term targets the model's own output, so its gradient vanishes
        for (x, y) in a.models[0].layers().iter().zip(b.models[0].layers()) {
            for (u, v) in x.weights.iter().zip(&y.weights) {
                assert!((u - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn augmented_grad_reductions() {
        let split = small_split(4);
        let model = init_models(&archs()[2..], 6, 3, 5).unwrap().remove(0);
        let mut rng = seeding::rng(6);
        let lb = crate::data::sample_batch(&split.labeled, 16, &mut rng).unwrap();
        let ub = crate::data::sample_batch(split.unlabeled.as_ref().unwrap(), 16, &mut rng).unwrap();
        let own = model.forward(ub.features.view()).unwrap();
        let plain = model.backward(lb.features.view(), lb.labels.as_ref().unwrap().view()).unwrap();

        let zero = augmented_grad(&model, &lb, &ub, &own, 0.0).unwrap();
        assert_eq!(zero, plain);

        let (_, with_self) = augmented_grad(&model, &lb, &ub, &own, 1.0).unwrap();
        for (a, b) in with_self.tensors().iter().zip(plain.1.tensors()) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-15);
            }
        }

        let short = PredictionMatrix::new(own.select(ndarray::Axis(0), &[0, 1])).unwrap();
        assert!(augmented_grad(&model, &lb, &ub, &short, 1.0).is_err());
    }

    #[test]
    fn deterministic_runs() {
        let split = small_split(7);
        let config = quick_config();
        let a = train_agreement(state(ConsensusKind::Rbm, &split, &config), &split, &config).unwrap();
        let b = train_agreement(state(ConsensusKind::Rbm, &split, &config), &split, &config).unwrap();
        assert_eq!(a.models, b.models);
        assert_eq!(a.consensus, b.consensus);
        assert_eq!(a.loss_history, b.loss_history);
    }

    #[test]
    fn post_hoc_requires_training() {
        let split = small_split(8);
        let config = quick_config();
        assert!(fit_consensus_post_hoc(state(ConsensusKind::Rbm, &split, &config), &split, &config).is_err());
        let trained = train_independent(state(ConsensusKind::MajorityVote, &split, &config), &split.labeled, &config).unwrap();
        let before = trained.consensus.clone();
        let after = fit_consensus_post_hoc(trained, &split, &config).unwrap();
        assert_eq!(after.consensus, before);
        assert_eq!(after.consensus_fits, 1);
    }

    #[test]
    fn accuracy_burn_in_switches_on() {
        let split = small_split(9);
        let config = TrainerConfig { burn_in: BurnIn::TrainAccuracy(0.5), ..quick_config() };
        let out = train_agreement(state(ConsensusKind::TrainableMajorityVote, &split, &config), &split, &config).unwrap();
        assert!(out.augmented_from.is_some());
        let never = TrainerConfig { burn_in: BurnIn::TrainAccuracy(1.0), ..quick_config() };
        let out = train_agreement(state(ConsensusKind::TrainableMajorityVote, &split, &never), &split, &never).unwrap();
        assert!(out.augmented_from.is_none());
    }

    #[test]
    fn disagreement_examples() {
        let p = PredictionMatrix::new(ndarray::array![[0.5]]).unwrap();
        let d = mean_pairwise_disagreement(&[p.clone(), p.clone()]).unwrap();
        assert!((d - std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(mean_pairwise_disagreement(&[p]).unwrap(), 0.0);
    }
}
