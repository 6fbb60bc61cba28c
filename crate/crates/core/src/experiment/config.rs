//! The flat `key = value` experiment config format.
//!
//! ```text
//! # comments and blank lines are ignored
//! dataset = synthetic            # or sparse:<path>, arff:<path>:<label count>
//! synthetic.instances = 2000
//! synthetic.features = 20
//! synthetic.labels = 5
//! synthetic.teacher_hidden = [16]
//! synthetic.label_noise = 0.1
//! data_seed = 0                  # seed of the synthetic generator
//! train_fraction = 0.05, 0.5
//! methods = CV5, TMV, TMV_AL, RBM, RBM_AL, MV
//! architectures = [1], [8], [16 8], [64 32], [128 64 32]
//! seeds = 0, 1, 2, 3, 4
//! ```
//!
//! Trainer keys: `unlabeled_batch`, `labeled_batch`, `burn_in` (an iteration
//! count, `never`, or `accuracy:<threshold>`), `retrain_every`, `lambda`,
//! `lambdas` (one per architecture), `max_iters`, `consensus_initial_iters`,
//! `consensus_refit_iters`, `convergence_window`, `convergence_tol`,
//! `learning_rate`, `consensus_learning_rate`, `leak`, `rbm_gradient`
//! (`cd` or `exact`).
//!
//! Run keys: `name` (dataset name in reports), `unlabeled` (sparse file of
//! extra unlabeled rows), `workers` (0 = all cores), `output`,
//! `record_seconds` (off by default so reports are byte-reproducible).

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::consensus::rbm::RbmGradient;
use crate::data::{generate_synthetic, load_sparse_dataset, parse_arff_multilabel, Dataset, SyntheticSpec};
use crate::engine::{BurnIn, MethodKind, TrainerConfig};
use crate::nn::MlpArchitecture;
use crate::{Error, Result};

/// Where the rows come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic { spec: SyntheticSpec, seed: u64 },
    Sparse(PathBuf),
    Arff { path: PathBuf, label_count: usize },
}

impl DatasetSource {
    pub fn default_name(&self) -> String {
        match self {
            DatasetSource::Synthetic { .. } => "synthetic".into(),
            DatasetSource::Sparse(path) | DatasetSource::Arff { path, .. } => path
                .file_stem()
                .map_or_else(|| "dataset".into(), |s| s.to_string_lossy().into_owned()),
        }
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            DatasetSource::Synthetic { spec, seed } => generate_synthetic(spec, *seed),
            DatasetSource::Sparse(path) => load_sparse_dataset(path),
            DatasetSource::Arff { path, label_count } => parse_arff_multilabel(path, *label_count),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub dataset_name: String,
    /// Extra unlabeled rows appended to the transductive pool.
    pub unlabeled: Option<PathBuf>,
    pub train_fractions: Vec<f64>,
    pub methods: Vec<MethodKind>,
    pub architectures: Vec<MlpArchitecture>,
    /// Trainer settings; the seed is replaced per cell.
    pub trainer: TrainerConfig,
    pub rbm_gradient: RbmGradient,
    pub seeds: Vec<u64>,
    pub workers: usize,
    pub output: Option<PathBuf>,
    pub record_seconds: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic { spec: SyntheticSpec::default(), seed: 0 },
            dataset_name: "synthetic".into(),
            unlabeled: None,
            train_fractions: vec![0.05],
            methods: MethodKind::ALL.to_vec(),
            architectures: MlpArchitecture::parse_list("[1], [8], [16 8], [64 32], [128 64 32]")
                .expect("valid default architectures"),
            trainer: TrainerConfig::default(),
            rbm_gradient: RbmGradient::default(),
            seeds: vec![0],
            workers: 0,
            output: None,
            record_seconds: false,
        }
    }
}

/// `(line number, key, value)` entries of a `key = value` text.
pub fn parse_key_values(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut seen = BTreeMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(line_no, format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::parse(line_no, "empty key"));
        }
        if let Some(first) = seen.insert(key.clone(), line_no) {
            return Err(Error::parse(line_no, format!("`{key}` already set on line {first}")));
        }
        out.push((line_no, key, value.trim().to_string()));
    }
    Ok(out)
}

fn value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| Error::parse(line, format!("bad value `{v}` for `{key}`: {e}")))
}

fn list<T: FromStr>(line: usize, key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| value(line, key, s))
        .collect()
}

fn bool_value(line: usize, key: &str, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::parse(line, format!("bad boolean `{v}` for `{key}`"))),
    }
}

fn hidden_list(line: usize, v: &str) -> Result<Vec<usize>> {
    let arch: MlpArchitecture = value(line, "teacher_hidden", v)?;
    Ok(arch.hidden_sizes)
}

impl FromStr for BurnIn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("never") {
            return Ok(BurnIn::NEVER);
        }
        if let Some(t) = s.strip_prefix("accuracy:") {
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad accuracy threshold `{t}`")))?;
            return Ok(BurnIn::TrainAccuracy(t));
        }
        s.parse()
            .map(BurnIn::Iterations)
            .map_err(|_| Error::Config(format!("bad burn-in `{s}`")))
    }
}

impl fmt::Display for BurnIn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            b if *b == BurnIn::NEVER => f.write_str("never"),
            BurnIn::Iterations(k) => write!(f, "{k}"),
            BurnIn::TrainAccuracy(t) => write!(f, "accuracy:{t}"),
        }
    }
}

fn rbm_gradient(line: usize, v: &str) -> Result<RbmGradient> {
    match v.to_ascii_lowercase().as_str() {
        "cd" | "cd1" | "cd-1" => Ok(RbmGradient::ContrastiveDivergence),
        "exact" => Ok(RbmGradient::Exact),
        _ => Err(Error::parse(line, format!("unknown rbm_gradient `{v}`"))),
    }
}

/// Applies `synthetic.*` keys (prefix already stripped) to `spec`.
/// Returns false if the key is not a synthetic key.
fn apply_synthetic(spec: &mut SyntheticSpec, line: usize, key: &str, v: &str) -> Result<bool> {
    match key {
        "instances" => spec.n_instances = value(line, key, v)?,
        "features" => spec.n_features = value(line, key, v)?,
        "labels" => spec.n_labels = value(line, key, v)?,
        "teacher_hidden" => spec.teacher_hidden = hidden_list(line, v)?,
        "label_noise" => spec.label_noise = value(line, key, v)?,
        "density_bias" => spec.density_bias = value(line, key, v)?,
        _ => return Ok(false),
    }
    Ok(true)
}

/// Reads a synthetic dataset spec; keys may omit the `synthetic.` prefix.
pub fn parse_synthetic_spec(text: &str) -> Result<SyntheticSpec> {
    let mut spec = SyntheticSpec::default();
    for (line, key, v) in parse_key_values(text)? {
        let bare = key.strip_prefix("synthetic.").unwrap_or(&key);
        if !apply_synthetic(&mut spec, line, bare, &v)? {
            return Err(Error::parse(line, format!("unknown synthetic key `{key}`")));
        }
    }
    spec.validate()?;
    Ok(spec)
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.architectures.is_empty() {
            return bad("at least one architecture is required".into());
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.train_fractions.is_empty() {
            return bad("at least one train fraction is required".into());
        }
        if let Some(f) = self.train_fractions.iter().find(|f| !(**f > 0.0 && **f < 1.0)) {
            return bad(format!("train fraction {f} outside (0, 1)"));
        }
        if let Some(l) = &self.trainer.model_lambdas {
            if l.len() != self.architectures.len() {
                return bad(format!(
                    "{} lambdas for {} architectures",
                    l.len(),
                    self.architectures.len()
                ));
            }
        }
        if self.dataset_name.contains([',', '\n', '"']) {
            return bad(format!("dataset name `{}` may not contain commas or quotes", self.dataset_name));
        }
        if let DatasetSource::Synthetic { spec, .. } = &self.dataset {
            spec.validate()?;
        }
        self.trainer.validate()
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        Ok(self.dataset.load()?.with_name(self.dataset_name.clone()))
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut spec = SyntheticSpec::default();
        let mut data_seed = 0u64;
        let mut source: Option<String> = None;
        let mut name = None;
        let mut leak = None;
        for (line, key, v) in parse_key_values(text)? {
            let t = &mut cfg.trainer;
            match key.as_str() {
                "dataset" => source = Some(v),
                "name" => name = Some(v),
                "data_seed" => data_seed = value(line, &key, &v)?,
                "unlabeled" => cfg.unlabeled = Some(PathBuf::from(v)),
                "train_fraction" => cfg.train_fractions = list(line, &key, &v)?,
                "methods" => cfg.methods = list(line, &key, &v)?,
                "architectures" => {
                    cfg.architectures = MlpArchitecture::parse_list(&v).map_err(|e| Error::parse(line, e.to_string()))?
                }
                "seeds" => cfg.seeds = list(line, &key, &v)?,
                "workers" => cfg.workers = value(line, &key, &v)?,
                "output" => cfg.output = Some(PathBuf::from(v)),
                "record_seconds" => cfg.record_seconds = bool_value(line, &key, &v)?,
                "rbm_gradient" => cfg.rbm_gradient = rbm_gradient(line, &v)?,
                "leak" => leak = Some(value::<f64>(line, &key, &v)?),
                "unlabeled_batch" => t.unlabeled_batch = value(line, &key, &v)?,
                "labeled_batch" => t.labeled_batch = value(line, &key, &v)?,
                "burn_in" => t.burn_in = value(line, &key, &v)?,
                "retrain_every" => t.retrain_every = value(line, &key, &v)?,
                "lambda" => t.lambda = value(line, &key, &v)?,
                "lambdas" => t.model_lambdas = Some(list(line, &key, &v)?),
                "max_iters" => t.max_iters = value(line, &key, &v)?,
                "consensus_initial_iters" => t.consensus_initial_iters = value(line, &key, &v)?,
                "consensus_refit_iters" => t.consensus_refit_iters = value(line, &key, &v)?,
                "convergence_window" => t.convergence_window = value(line, &key, &v)?,
                "convergence_tol" => t.convergence_tol = value(line, &key, &v)?,
                "learning_rate" => t.model_adam.learning_rate = value(line, &key, &v)?,
                "consensus_learning_rate" => t.consensus_adam.learning_rate = value(line, &key, &v)?,
                other => {
                    let known = other
                        .strip_prefix("synthetic.")
                        .map(|k| apply_synthetic(&mut spec, line, k, &v))
                        .transpose()?
                        .unwrap_or(false);
                    if !known {
                        return Err(Error::parse(line, format!("unknown key `{other}`")));
                    }
                }
            }
        }
        cfg.dataset = match source.as_deref() {
            None | Some("synthetic") => DatasetSource::Synthetic { spec, seed: data_seed },
            Some(s) => {
                if let Some(path) = s.strip_prefix("sparse:") {
                    DatasetSource::Sparse(PathBuf::from(path))
                } else if let Some(rest) = s.strip_prefix("arff:") {
                    let (path, count) = rest
                        .rsplit_once(':')
                        .ok_or_else(|| Error::Config(format!("arff source needs a label count: `{s}`")))?;
                    let label_count = count
                        .parse()
                        .map_err(|_| Error::Config(format!("bad arff label count `{count}`")))?;
                    DatasetSource::Arff { path: PathBuf::from(path), label_count }
                } else {
                    return Err(Error::Config(format!("unknown dataset source `{s}`")));
                }
            }
        };
        cfg.dataset_name = name.unwrap_or_else(|| cfg.dataset.default_name());
        if let Some(leak) = leak {
            cfg.architectures = cfg
                .architectures
                .into_iter()
                .map(|a| MlpArchitecture::with_leak(a.hidden_sizes, leak))
                .collect::<Result<_>>()?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

/// Canonical form; parses back to an equal config.
impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.dataset {
            DatasetSource::Synthetic { spec, seed } => {
                writeln!(f, "dataset = synthetic")?;
                writeln!(f, "synthetic.instances = {}", spec.n_instances)?;
                writeln!(f, "synthetic.features = {}", spec.n_features)?;
                writeln!(f, "synthetic.labels = {}", spec.n_labels)?;
                writeln!(f, "synthetic.teacher_hidden = {}", MlpArchitecture::new(spec.teacher_hidden.clone()).map_err(|_| fmt::Error)?)?;
                writeln!(f, "synthetic.label_noise = {}", spec.label_noise)?;
                writeln!(f, "synthetic.density_bias = {}", spec.density_bias)?;
                writeln!(f, "data_seed = {seed}")?;
            }
            DatasetSource::Sparse(path) => writeln!(f, "dataset = sparse:{}", path.display())?,
            DatasetSource::Arff { path, label_count } => {
                writeln!(f, "dataset = arff:{}:{label_count}", path.display())?
            }
        }
        writeln!(f, "name = {}", self.dataset_name)?;
        if let Some(u) = &self.unlabeled {
            writeln!(f, "unlabeled = {}", u.display())?;
        }
        writeln!(f, "train_fraction = {}", join(&self.train_fractions))?;
        writeln!(f, "methods = {}", join(&self.methods))?;
        writeln!(f, "architectures = {}", join(&self.architectures))?;
        if let Some(a) = self.architectures.first() {
            writeln!(f, "leak = {}", a.leak)?;
        }
        writeln!(f, "seeds = {}", join(&self.seeds))?;
        let t = &self.trainer;
        writeln!(f, "unlabeled_batch = {}", t.unlabeled_batch)?;
        writeln!(f, "labeled_batch = {}", t.labeled_batch)?;
        writeln!(f, "burn_in = {}", t.burn_in)?;
        writeln!(f, "retrain_every = {}", t.retrain_every)?;
        writeln!(f, "lambda = {}", t.lambda)?;
        if let Some(l) = &t.model_lambdas {
            writeln!(f, "lambdas = {}", join(l))?;
        }
        writeln!(f, "max_iters = {}", t.max_iters)?;
        writeln!(f, "consensus_initial_iters = {}", t.consensus_initial_iters)?;
        writeln!(f, "consensus_refit_iters = {}", t.consensus_refit_iters)?;
        writeln!(f, "convergence_window = {}", t.convergence_window)?;
        writeln!(f, "convergence_tol = {}", t.convergence_tol)?;
        writeln!(f, "learning_rate = {}", t.model_adam.learning_rate)?;
        writeln!(f, "consensus_learning_rate = {}", t.consensus_adam.learning_rate)?;
        let gradient = match self.rbm_gradient {
            RbmGradient::ContrastiveDivergence => "cd",
            RbmGradient::Exact => "exact",
        };
        writeln!(f, "rbm_gradient = {gradient}")?;
        writeln!(f, "workers = {}", self.workers)?;
        if let Some(o) = &self.output {
            writeln!(f, "output = {}", o.display())?;
        }
        writeln!(f, "record_seconds = {}", self.record_seconds)
    }
}
