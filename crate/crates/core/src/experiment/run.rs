use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use crate::consensus::{ConsensusKind, ConsensusModel};
use crate::data::{load_sparse_dataset, shuffle_split, DataSplit, Dataset};
use crate::engine::{
    cross_validate_select, fit_consensus_post_hoc, init_models, train_agreement, train_independent,
    EnsembleState, MethodKind, TrainerConfig,
};
use crate::eval::macro_auc_pr;
use crate::nn::{MlpModel, PredictionMatrix};
use crate::{Error, Result};

/// One line of the results table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: MethodKind,
    pub dataset: String,
    pub train_fraction: f64,
    pub seed: u64,
    /// Macro PR-AUC on the test part; NaN for a failed cell.
    pub macro_auc_pr: f64,
    pub seconds: f64,
    pub iterations: usize,
    pub degenerate_labels: usize,
}

/// What a cell leaves behind besides its row.
#[derive(Debug, Clone, Default)]
pub struct CellArtifacts {
    pub models: Vec<MlpModel>,
    pub consensus: Option<ConsensusModel>,
    /// Per model, its supervised loss at every step it took.
    pub loss_history: Vec<Vec<f64>>,
    /// Per model, the minimized objective at every step it took.
    pub objective_history: Vec<Vec<f64>>,
    pub disagreement_history: Vec<f64>,
    /// The winning architecture index for CV5.
    pub selected: Option<usize>,
}

impl CellArtifacts {
    fn from_state(state: &EnsembleState) -> Self {
        Self {
            models: state.models.clone(),
            consensus: Some(state.consensus.clone()),
            loss_history: state.loss_history.clone(),
            objective_history: state.objective_history.clone(),
            disagreement_history: state.disagreement_history.clone(),
            selected: None,
        }
    }

    /// One line per iteration: iteration, each model's supervised loss, each
    /// model's minimized objective (both empty once the model stopped), mean
    /// pairwise disagreement on the unlabeled batch (empty when none was
    /// drawn).
    pub fn loss_log(&self) -> String {
        let m = self.loss_history.len();
        let rows = self
            .loss_history
            .iter()
            .map(Vec::len)
            .chain([self.disagreement_history.len()])
            .max()
            .unwrap_or(0);
        let mut out = String::from("iteration");
        for j in 0..m {
            out.push_str(&format!(",loss_{j}"));
        }
        for j in 0..m {
            out.push_str(&format!(",objective_{j}"));
        }
        out.push_str(",disagreement\n");
        let cell = |v: Option<&f64>| v.map_or_else(String::new, ToString::to_string);
        for i in 0..rows {
            out.push_str(&i.to_string());
            for h in self.loss_history.iter().chain(&self.objective_history) {
                out.push(',');
                out.push_str(&cell(h.get(i)));
            }
            out.push(',');
            out.push_str(&cell(self.disagreement_history.get(i)));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CellRecord {
    pub row: ResultRow,
    pub split_fingerprint: u64,
    pub error: Option<String>,
    pub artifacts: CellArtifacts,
}

struct Outcome {
    preds: PredictionMatrix,
    iterations: usize,
    artifacts: CellArtifacts,
}

/// Independently trained ensemble shared by MV, TMV and RBM in one
/// (fraction, seed) group.
struct Independent {
    state: Result<EnsembleState, String>,
    seconds: f64,
}

fn new_state(config: &ExperimentConfig, trainer: &TrainerConfig, split: &DataSplit, kind: ConsensusKind) -> Result<EnsembleState> {
    let l = split.labeled.require_labels()?.ncols();
    let models = init_models(&config.architectures, split.labeled.n_features(), l, trainer.seed)?;
    let mut consensus = ConsensusModel::new(kind, models.len(), l, trainer.consensus_adam);
    consensus.rbm_gradient = config.rbm_gradient;
    EnsembleState::new(models, consensus, trainer)
}

fn run_method(
    config: &ExperimentConfig,
    trainer: &TrainerConfig,
    split: &DataSplit,
    method: MethodKind,
    independent: Option<&EnsembleState>,
) -> Result<Outcome> {
    let test_x = split.test.features();
    let from_state = |state: EnsembleState| -> Result<Outcome> {
        Ok(Outcome {
            preds: state.predict(test_x)?,
            iterations: state.iterations,
            artifacts: CellArtifacts::from_state(&state),
        })
    };
    match method {
        MethodKind::Cv5 => {
            let sel = cross_validate_select(&config.architectures, &split.labeled, trainer)?;
            let preds = sel.best_model.forward(test_x)?;
            Ok(Outcome {
                preds,
                iterations: sel.iterations,
                artifacts: CellArtifacts {
                    models: vec![sel.best_model],
                    selected: Some(sel.best_index),
                    ..Default::default()
                },
            })
        }
        MethodKind::TmvAl | MethodKind::RbmAl => {
            let kind = method.consensus().expect("agreement methods have a consensus");
            from_state(train_agreement(new_state(config, trainer, split, kind)?, split, trainer)?)
        }
        MethodKind::Mv | MethodKind::Tmv | MethodKind::Rbm => {
            let kind = method.consensus().expect("ensemble methods have a consensus");
            let mut state = match independent {
                Some(s) => s.clone(),
                None => train_independent(new_state(config, trainer, split, kind)?, &split.labeled, trainer)?,
            };
            let mut consensus = ConsensusModel::new(kind, state.n_models(), state.consensus.n_labels(), trainer.consensus_adam);
            consensus.rbm_gradient = config.rbm_gradient;
            state.consensus = consensus;
            from_state(fit_consensus_post_hoc(state, split, trainer)?)
        }
    }
}

fn split_for(data: &Dataset, extra: Option<&Dataset>, fraction: f64, seed: u64) -> Result<DataSplit> {
    let split = shuffle_split(data, fraction, seed)?;
    match extra {
        Some(e) => split.extend_unlabeled(e),
        None => Ok(split),
    }
}

/// Runs every (fraction, seed, method) cell and returns the records in
/// config order (fractions, then seeds, then methods).
///
/// All methods of one (fraction, seed) share the split. A failing cell gets a
/// NaN score and its error message; the rest of the sweep continues.
/// `on_record` is called as cells finish, in completion order.
pub fn run_experiment_with(
    config: &ExperimentConfig,
    on_record: &(dyn Fn(&CellRecord) + Sync),
) -> Result<Vec<CellRecord>> {
    config.validate()?;
    let data = config.load_dataset()?;
    data.require_labels()?;
    let extra = config.unlabeled.as_ref().map(load_sparse_dataset).transpose()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let groups: Vec<(f64, u64)> = config
        .train_fractions
        .iter()
        .flat_map(|&f| config.seeds.iter().map(move |&s| (f, s)))
        .collect();
    let needs_independent = config
        .methods
        .iter()
        .filter(|m| matches!(m, MethodKind::Mv | MethodKind::Tmv | MethodKind::Rbm))
        .count()
        > 1;

    pool.install(|| {
        let splits: Vec<Result<DataSplit, String>> = groups
            .iter()
            .map(|&(f, s)| split_for(&data, extra.as_ref(), f, s).map_err(|e| e.to_string()))
            .collect();
        let independents: Vec<Option<Independent>> = groups
            .par_iter()
            .zip(&splits)
            .map(|(&(_, seed), split)| {
                if !needs_independent {
                    return None;
                }
                let start = Instant::now();
                let state = split.clone().and_then(|split| {
                    let trainer = config.trainer.with_seed(seed);
                    new_state(config, &trainer, &split, ConsensusKind::MajorityVote)
                        .and_then(|s| train_independent(s, &split.labeled, &trainer))
                        .map_err(|e| e.to_string())
                });
                Some(Independent { state, seconds: start.elapsed().as_secs_f64() })
            })
            .collect();

        let cells: Vec<(usize, MethodKind)> = (0..groups.len())
            .flat_map(|g| config.methods.iter().map(move |&m| (g, m)))
            .collect();
        let records = cells
            .par_iter()
            .map(|&(g, method)| {
                let (fraction, seed) = groups[g];
                let trainer = config.trainer.with_seed(seed);
                let start = Instant::now();
                let shared = match method {
                    MethodKind::Mv | MethodKind::Tmv | MethodKind::Rbm => independents[g].as_ref(),
                    _ => None,
                };
                let result = splits[g].clone().and_then(|split| {
                    let fingerprint = split.fingerprint();
                    let independent = match shared.map(|i| &i.state) {
                        Some(Err(e)) => return Err(e.clone()),
                        Some(Ok(s)) => Some(s),
                        None => None,
                    };
                    let outcome = run_method(config, &trainer, &split, method, independent)
                        .and_then(|o| {
                            let score = macro_auc_pr(o.preds.view(), split.test.require_labels()?)?;
                            Ok((o, score))
                        })
                        .map_err(|e| e.to_string());
                    Ok((fingerprint, outcome))
                });
                let mut seconds = start.elapsed().as_secs_f64() + shared.map_or(0.0, |i| i.seconds);
                if !config.record_seconds {
                    seconds = 0.0;
                }
                let mut row = ResultRow {
                    method,
                    dataset: config.dataset_name.clone(),
                    train_fraction: fraction,
                    seed,
                    macro_auc_pr: f64::NAN,
                    seconds,
                    iterations: 0,
                    degenerate_labels: 0,
                };
                let record = match result {
                    Ok((fingerprint, Ok((outcome, score)))) => {
                        row.macro_auc_pr = score.value;
                        row.iterations = outcome.iterations;
                        row.degenerate_labels = score.degenerate_labels;
                        CellRecord { row, split_fingerprint: fingerprint, error: None, artifacts: outcome.artifacts }
                    }
                    Ok((fingerprint, Err(e))) => CellRecord {
                        row,
                        split_fingerprint: fingerprint,
                        error: Some(e),
                        artifacts: CellArtifacts::default(),
                    },
                    Err(e) => CellRecord { row, split_fingerprint: 0, error: Some(e), artifacts: CellArtifacts::default() },
                };
                on_record(&record);
                record
            })
            .collect();
        Ok(records)
    })
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_experiment_with(config, &|_| {})?.into_iter().map(|r| r.row).collect())
}
