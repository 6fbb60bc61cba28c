//! Multi-label datasets: storage, file formats, splitting and batching.

mod arff;
mod sparse;
mod synthetic;

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

pub use arff::{parse_arff_multilabel, parse_arff_str};
pub use sparse::{load_sparse_dataset, parse_sparse, write_sparse, save_sparse_dataset};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::seeding::{self, Rng};
use crate::{Error, Result};

/// Dense feature matrix with an optional 0/1 label matrix.
///
/// Labels are stored as `f64` so they can be used directly as training
/// targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Array2<f64>,
    labels: Option<Array2<f64>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: Array2<f64>,
        labels: Option<Array2<f64>>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::InvalidArgument("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::InvalidArgument("dataset has no features".into()));
        }
        if let Some(labels) = &labels {
            if labels.nrows() != n {
                return Err(Error::Shape(format!(
                    "{} feature rows but {} label rows",
                    n,
                    labels.nrows()
                )));
            }
            if labels.ncols() == 0 {
                return Err(Error::InvalidArgument("label matrix has no columns".into()));
            }
            if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
                return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
            }
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> Option<ArrayView2<'_, f64>> {
        self.labels.as_ref().map(|l| l.view())
    }

    /// Labels, or an error naming the dataset when it is unlabeled.
    pub fn require_labels(&self) -> Result<ArrayView2<'_, f64>> {
        self.labels().ok_or_else(|| {
            Error::InvalidArgument(format!("dataset `{}` has no labels", self.name))
        })
    }

    pub fn n_instances(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_labels(&self) -> Option<usize> {
        self.labels.as_ref().map(|l| l.ncols())
    }

    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        Self::new(
            self.name.clone(),
            self.features.select(Axis(0), rows),
            self.labels.as_ref().map(|l| l.select(Axis(0), rows)),
        )
    }

    pub fn without_labels(&self) -> Self {
        Self {
            name: self.name.clone(),
            features: self.features.clone(),
            labels: None,
        }
    }

    /// Row-wise concatenation of feature matrices. Labels are kept only when
    /// both sides carry them.
    pub fn concat(&self, other: &Dataset) -> Result<Self> {
        if self.n_features() != other.n_features() {
            return Err(Error::Shape(format!(
                "cannot concatenate {} and {} feature columns",
                self.n_features(),
                other.n_features()
            )));
        }
        let features = ndarray::concatenate(Axis(0), &[self.features(), other.features()])
            .expect("column counts checked");
        let labels = match (self.labels(), other.labels()) {
            (Some(a), Some(b)) => Some(
                ndarray::concatenate(Axis(0), &[a, b])
                    .map_err(|_| Error::Shape("label column counts differ".into()))?,
            ),
            _ => None,
        };
        Self::new(self.name.clone(), features, labels)
    }

    /// Fraction of positive entries per label column.
    pub fn label_density(&self) -> Option<Vec<f64>> {
        self.labels().map(|labels| {
            labels
                .mean_axis(Axis(0))
                .map(|m| m.to_vec())
                .unwrap_or_default()
        })
    }
}

/// Labeled training part, unlabeled pool and held-out test part.
///
/// The unlabeled pool is the test inputs with labels hidden, optionally
/// extended with extra unlabeled rows.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub labeled: Dataset,
    pub unlabeled: Option<Dataset>,
    pub test: Dataset,
    pub labeled_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl DataSplit {
    /// Hash of the sorted test indices; equal for equal splits.
    pub fn fingerprint(&self) -> u64 {
        let mut sorted = self.test_indices.clone();
        sorted.sort_unstable();
        seeding::fingerprint(sorted.into_iter().map(|i| i as u64))
    }

    pub fn n_unlabeled(&self) -> usize {
        self.unlabeled.as_ref().map_or(0, Dataset::n_instances)
    }

    /// Appends rows to the unlabeled pool.
    pub fn extend_unlabeled(mut self, extra: &Dataset) -> Result<Self> {
        let extra = extra.without_labels();
        self.unlabeled = Some(match self.unlabeled.take() {
            Some(pool) => pool.concat(&extra)?,
            None => extra,
        });
        Ok(self)
    }
}

/// Shuffles the rows with `seed` and takes the first `floor(train_fraction * N)`
/// as the labeled part. The rest is the test part, whose inputs also form the
/// unlabeled pool.
pub fn shuffle_split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<DataSplit> {
    dataset.require_labels()?;
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} outside (0, 1)"
        )));
    }
    let n = dataset.n_instances();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} of {n} rows leaves an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::rng(seeding::derive(seed, seeding::stream::SPLIT)));
    let (train_idx, test_idx) = order.split_at(n_train);
    let test = dataset.select_rows(test_idx)?;
    Ok(DataSplit {
        labeled: dataset.select_rows(train_idx)?,
        unlabeled: Some(test.without_labels()),
        test,
        labeled_indices: train_idx.to_vec(),
        test_indices: test_idx.to_vec(),
    })
}

/// Rows drawn from a parent dataset.
#[derive(Debug, Clone)]
pub struct Batch {
    pub features: Array2<f64>,
    pub labels: Option<Array2<f64>>,
    pub source_indices: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.source_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source_indices.is_empty()
    }
}

/// Epoch-shuffled batch sampler.
///
/// Rows are visited in a shuffled order; when the order is exhausted it is
/// reshuffled, so every row is seen once per epoch before any repeats. A
/// batch that straddles an epoch boundary takes the tail of one epoch and the
/// head of the next.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n_rows: usize,
    batch_size: usize,
    order: Vec<usize>,
    cursor: usize,
    rng: Rng,
}

impl BatchSampler {
    pub fn new(n_rows: usize, batch_size: usize, rng: Rng) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        Ok(Self {
            n_rows,
            batch_size,
            order: (0..n_rows).collect(),
            cursor: n_rows,
            rng,
        })
    }

    /// Effective batch size, `min(batch_size, n_rows)`.
    pub fn batch_len(&self) -> usize {
        self.batch_size.min(self.n_rows)
    }

    pub fn next_indices(&mut self) -> Vec<usize> {
        let len = self.batch_len();
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            if self.cursor == self.n_rows {
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            let take = (len - out.len()).min(self.n_rows - self.cursor);
            out.extend_from_slice(&self.order[self.cursor..self.cursor + take]);
            self.cursor += take;
        }
        out
    }

    pub fn sample(&mut self, dataset: &Dataset) -> Batch {
        debug_assert_eq!(dataset.n_instances(), self.n_rows);
        let idx = self.next_indices();
        Batch {
            features: dataset.features.select(Axis(0), &idx),
            labels: dataset.labels.as_ref().map(|l| l.select(Axis(0), &idx)),
            source_indices: idx,
        }
    }
}

/// One-shot batch draw; `rng` advances so successive calls differ.
pub fn sample_batch(dataset: &Dataset, size: usize, rng: &mut Rng) -> Result<Batch> {
    use rand::Rng as _;
    let mut sampler = BatchSampler::new(dataset.n_instances(), size, seeding::rng(rng.random()))?;
    Ok(sampler.sample(dataset))
}
