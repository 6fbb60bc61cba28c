//! Semi-supervised RBM consensus, one independent RBM per label.
//!
//! Each RBM has the model predictions for its label as visible units and a
//! single hidden unit standing for the true label, with energy
//! `-(a h + sum_j b_j v_j + sum_j w_j v_j h)`. The consensus is the hidden
//! unit's conditional `P(h = 1 | v) = sigmoid(a + w . v)`.
//!
//! Fitting ascends the sum of two equally weighted terms:
//!
//! - the mean log-likelihood of the unlabeled visible vectors, with its
//!   gradient estimated by CD-1 (exact hidden expectations in the positive
//!   phase, a sampled hidden unit and mean-field visibles in the negative
//!   phase), and
//! - the mean Bernoulli log-likelihood of the known labels under the hidden
//!   conditional, whose gradient is exact.
//!
//! The partition function is never formed on the training path. For small
//! `M` the [`exact`] module enumerates it for testing and for the
//! exact-gradient variant.

use ndarray::{Array2, ArrayView2};
use rand::{Rng as _, RngCore};
use rayon::prelude::*;

use crate::nn::prediction_shape as common_shape;
use crate::nn::{sigmoid, AdamConfig, AdamState, PredictionMatrix};
use crate::seeding;
use crate::{Error, Result};

/// Parameters of the RBM for one label.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmBlock {
    /// Hidden bias.
    pub a: f64,
    /// Visible biases, one per model.
    pub b: Vec<f64>,
    /// Hidden-visible couplings, one per model.
    pub w: Vec<f64>,
}

impl RbmBlock {
    pub fn zeros(n_models: usize) -> Self {
        Self {
            a: 0.0,
            b: vec![0.0; n_models],
            w: vec![0.0; n_models],
        }
    }

    pub fn n_models(&self) -> usize {
        self.w.len()
    }

    pub fn conditional(&self, v: &[f64]) -> f64 {
        rbm_conditional(self.a, &self.w, v)
    }

    pub fn free_energy(&self, v: &[f64]) -> f64 {
        rbm_free_energy(self.a, &self.b, &self.w, v)
    }

    /// The same distribution over visibles with the hidden unit relabeled
    /// `h -> 1 - h`; this turns `P(h = 1 | v)` into `1 - P(h = 1 | v)`.
    pub fn flipped(&self) -> Self {
        Self {
            a: -self.a,
            b: self.b.iter().zip(&self.w).map(|(b, w)| b + w).collect(),
            w: self.w.iter().map(|w| -w).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.iter().chain(&self.w).all(|v| v.is_finite())
    }

    fn tensors_mut(&mut self) -> [&mut [f64]; 3] {
        [std::slice::from_mut(&mut self.a), &mut self.b, &mut self.w]
    }
}

/// One [`RbmBlock`] per label.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmParams {
    pub blocks: Vec<RbmBlock>,
}

impl RbmParams {
    pub fn zeros(n_models: usize, n_labels: usize) -> Self {
        Self {
            blocks: vec![RbmBlock::zeros(n_models); n_labels],
        }
    }

    pub fn n_models(&self) -> usize {
        self.blocks.first().map_or(0, RbmBlock::n_models)
    }

    pub fn n_labels(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(RbmBlock::is_finite)
    }

    /// Fresh optimizer state for every label block.
    pub fn optimizers(&self, config: AdamConfig) -> Vec<AdamState> {
        let m = self.n_models();
        vec![AdamState::new(config, &[1, m, m]); self.n_labels()]
    }

    /// Fits every label block for `iters` Adam steps. Label blocks are
    /// independent and fitted in parallel, each with its own random stream
    /// drawn from `rng`.
    pub fn fit(
        &mut self,
        optimizers: &mut [AdamState],
        data: &RbmData<'_>,
        iters: usize,
        gradient: RbmGradient,
        rng: &mut impl RngCore,
    ) -> Result<()> {
        let (m, l) = (self.n_models(), self.n_labels());
        data.check(m, l)?;
        if optimizers.len() != l {
            return Err(Error::Shape(format!("{} optimizers for {l} labels", optimizers.len())));
        }
        if gradient == RbmGradient::Exact && m > exact::MAX_MODELS {
            return Err(Error::InvalidArgument(format!(
                "exact RBM gradients need at most {} models, got {m}",
                exact::MAX_MODELS
            )));
        }
        let seeds: Vec<u64> = (0..l).map(|_| rng.next_u64()).collect();
        self.blocks
            .par_iter_mut()
            .zip(optimizers.par_iter_mut())
            .zip(seeds.into_par_iter())
            .enumerate()
            .for_each(|(label, ((block, opt), seed))| {
                let columns = LabelColumns::gather(data, label);
                let mut rng = seeding::rng(seed);
                for _ in 0..iters {
                    let grad = columns.negative_objective_gradient(block, gradient, &mut rng);
                    let [ga, gb, gw] = &grad;
                    opt.step(&mut block.tensors_mut(), &[&ga[..], &gb[..], &gw[..]]);
                }
            });
        Ok(())
    }
}

/// How the unlabeled log-likelihood gradient is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RbmGradient {
    /// One-step contrastive divergence.
    #[default]
    ContrastiveDivergence,
    /// Exact model expectations by enumerating all binary visible vectors.
    /// Only for small ensembles.
    Exact,
}

/// Predictions (per model) on the unlabeled and labeled rows plus labels.
#[derive(Debug, Clone, Copy)]
pub struct RbmData<'a> {
    pub unlabeled: &'a [PredictionMatrix],
    pub labeled: &'a [PredictionMatrix],
    pub labels: ArrayView2<'a, f64>,
}

impl RbmData<'_> {
    fn rows(preds: &[PredictionMatrix], m: usize, l: usize, what: &str) -> Result<usize> {
        if preds.is_empty() {
            return Ok(0);
        }
        if preds.len() != m {
            return Err(Error::Shape(format!("{} {what} prediction sets for {m} models", preds.len())));
        }
        let (n, cols) = common_shape(preds)?;
        if cols != l {
            return Err(Error::Shape(format!("{what} predictions have {cols} labels, expected {l}")));
        }
        Ok(n)
    }

    fn check(&self, m: usize, l: usize) -> Result<()> {
        let n_u = Self::rows(self.unlabeled, m, l, "unlabeled")?;
        let n_l = Self::rows(self.labeled, m, l, "labeled")?;
        if n_l > 0 && self.labels.dim() != (n_l, l) {
            return Err(Error::Shape(format!(
                "labels {:?}, expected ({n_l}, {l})",
                self.labels.dim()
            )));
        }
        if n_u == 0 && n_l == 0 {
            return Err(Error::InvalidArgument(
                "RBM fitting needs unlabeled or labeled rows".into(),
            ));
        }
        Ok(())
    }
}

/// Row-major visible vectors for one label.
struct LabelColumns {
    m: usize,
    unlabeled: Vec<f64>,
    unlabeled_sums: Vec<f64>,
    labeled: Vec<f64>,
    targets: Vec<f64>,
}

impl LabelColumns {
    fn gather(data: &RbmData<'_>, label: usize) -> Self {
        let collect = |preds: &[PredictionMatrix]| -> Vec<f64> {
            let n = preds.first().map_or(0, |p| p.nrows());
            let mut out = Vec::with_capacity(n * preds.len());
            for i in 0..n {
                out.extend(preds.iter().map(|p| p[[i, label]]));
            }
            out
        };
        let labeled = collect(data.labeled);
        let targets = if labeled.is_empty() {
            Vec::new()
        } else {
            data.labels.column(label).to_vec()
        };
        let m = data.unlabeled.len().max(data.labeled.len());
        let unlabeled = collect(data.unlabeled);
        let mut unlabeled_sums = vec![0.0; m];
        for v in unlabeled.chunks_exact(m.max(1)) {
            for (s, x) in unlabeled_sums.iter_mut().zip(v) {
                *s += x;
            }
        }
        Self { m, unlabeled, unlabeled_sums, labeled, targets }
    }

    /// Gradient of `-(U + S)` as `[d/da, d/db, d/dw]`.
    fn negative_objective_gradient(
        &self,
        block: &RbmBlock,
        gradient: RbmGradient,
        rng: &mut seeding::Rng,
    ) -> [Vec<f64>; 3] {
        let m = self.m;
        let mut ga = 0.0;
        let mut gb = vec![0.0; m];
        let mut gw = vec![0.0; m];

        if !self.unlabeled.is_empty() {
            let n = (self.unlabeled.len() / m) as f64;
            let mut pa = 0.0;
            let mut pw = vec![0.0; m];
            // CD-1 reconstructions depend only on the sampled binary hidden
            // state, so count the samples and expand the two cases afterwards.
            let mut on = 0usize;
            for v in self.unlabeled.chunks_exact(m) {
                let h = block.conditional(v);
                pa += h;
                for j in 0..m {
                    pw[j] += h * v[j];
                }
                if gradient == RbmGradient::ContrastiveDivergence && rng.random::<f64>() < h {
                    on += 1;
                }
            }
            let (na, nb, nw) = match gradient {
                RbmGradient::ContrastiveDivergence => {
                    let recon0: Vec<f64> = block.b.iter().map(|&b| sigmoid(b)).collect();
                    let recon1: Vec<f64> = block.b.iter().zip(&block.w).map(|(&b, &w)| sigmoid(b + w)).collect();
                    let (h0, h1) = (block.conditional(&recon0), block.conditional(&recon1));
                    let (k1, k0) = (on as f64, n - on as f64);
                    (
                        k1 * h1 + k0 * h0,
                        (0..m).map(|j| k1 * recon1[j] + k0 * recon0[j]).collect::<Vec<_>>(),
                        (0..m).map(|j| k1 * h1 * recon1[j] + k0 * h0 * recon0[j]).collect::<Vec<_>>(),
                    )
                }
                RbmGradient::Exact => {
                    let e = exact::model_expectations(block);
                    (
                        e.hidden * n,
                        e.visible.iter().map(|x| x * n).collect(),
                        e.joint.iter().map(|x| x * n).collect(),
                    )
                }
            };
            ga -= (pa - na) / n;
            for j in 0..m {
                gb[j] -= (self.unlabeled_sums[j] - nb[j]) / n;
                gw[j] -= (pw[j] - nw[j]) / n;
            }
        }

        if !self.labeled.is_empty() {
            let n = self.targets.len() as f64;
            for (v, &y) in self.labeled.chunks_exact(m).zip(&self.targets) {
                let r = (y - block.conditional(v)) / n;
                ga -= r;
                for j in 0..m {
                    gw[j] -= r * v[j];
                }
            }
        }
        [vec![ga], gb, gw]
    }
}

/// `P(h = 1 | v) = sigmoid(a + sum_j w_j v_j)`.
pub fn rbm_conditional(a: f64, w: &[f64], v: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), v.len());
    sigmoid(a + w.iter().zip(v).map(|(w, v)| w * v).sum::<f64>())
}

/// `log(1 + exp(x))` without overflow.
pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Free energy with the hidden unit summed out:
/// `F(v) = -sum_j b_j v_j - log(1 + exp(a + sum_j w_j v_j))`.
pub fn rbm_free_energy(a: f64, b: &[f64], w: &[f64], v: &[f64]) -> f64 {
    let visible: f64 = b.iter().zip(v).map(|(b, v)| b * v).sum();
    let activation = a + w.iter().zip(v).map(|(w, v)| w * v).sum::<f64>();
    -visible - softplus(activation)
}

/// Applies each label's conditional to every row.
pub fn rbm_combine(params: &RbmParams, preds: &[PredictionMatrix]) -> Result<PredictionMatrix> {
    let (n, l) = common_shape(preds)?;
    if preds.len() != params.n_models() || l != params.n_labels() {
        return Err(Error::Shape(format!(
            "{} models x {l} labels, RBM expects {} x {}",
            preds.len(),
            params.n_models(),
            params.n_labels()
        )));
    }
    let mut out = Array2::zeros((n, l));
    let mut v = vec![0.0; preds.len()];
    for (label, block) in params.blocks.iter().enumerate() {
        for i in 0..n {
            for (vj, p) in v.iter_mut().zip(preds) {
                *vj = p[[i, label]];
            }
            out[[i, label]] = block.conditional(&v);
        }
    }
    Ok(PredictionMatrix::new_unchecked(out))
}

/// Mean labeled log-likelihood `S = mean_i log Bernoulli(y_i | P(h = 1 | v_i))`
/// for one label block, given row-major visibles.
pub fn labeled_log_likelihood(block: &RbmBlock, visibles: ArrayView2<'_, f64>, targets: &[f64]) -> f64 {
    assert_eq!(visibles.nrows(), targets.len());
    if targets.is_empty() {
        return 0.0;
    }
    let total: f64 = visibles
        .outer_iter()
        .zip(targets)
        .map(|(v, &y)| {
            let s = block.a + block.w.iter().zip(v.iter()).map(|(w, v)| w * v).sum::<f64>();
            // log sigmoid(s) = -softplus(-s), log(1 - sigmoid(s)) = -softplus(s)
            -(y * softplus(-s) + (1.0 - y) * softplus(s))
        })
        .sum();
    total / targets.len() as f64
}

/// Fits from `params` (warm start) or from zeros with fresh optimizer state.
#[allow(clippy::too_many_arguments)]
pub fn rbm_fit(
    params: &RbmParams,
    preds_unlabeled: &[PredictionMatrix],
    preds_labeled: &[PredictionMatrix],
    labels: ArrayView2<'_, f64>,
    max_iters: usize,
    warm_start: bool,
    gradient: RbmGradient,
    adam: AdamConfig,
    rng: &mut impl RngCore,
) -> Result<RbmParams> {
    let mut fitted = if warm_start {
        params.clone()
    } else {
        RbmParams::zeros(params.n_models(), params.n_labels())
    };
    let mut optimizers = fitted.optimizers(adam);
    let data = RbmData {
        unlabeled: preds_unlabeled,
        labeled: preds_labeled,
        labels,
    };
    fitted.fit(&mut optimizers, &data, max_iters, gradient, rng)?;
    Ok(fitted)
}

/// Exact computations by enumerating all `2^M` binary visible vectors.
pub mod exact {
    use super::{softplus, RbmBlock};

    pub const MAX_MODELS: usize = 16;

    fn binary_vector(bits: usize, m: usize) -> Vec<f64> {
        (0..m).map(|j| ((bits >> j) & 1) as f64).collect()
    }

    fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
        let values: Vec<f64> = values.collect();
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
    }

    /// Unnormalized log-probability of a joint `(h, v)` configuration.
    pub fn joint_log_weight(block: &RbmBlock, h: f64, v: &[f64]) -> f64 {
        let bv: f64 = block.b.iter().zip(v).map(|(b, v)| b * v).sum();
        let wv: f64 = block.w.iter().zip(v).map(|(w, v)| w * v).sum();
        block.a * h + bv + wv * h
    }

    /// `log Z` summed over binary `v` and `h`.
    pub fn log_partition(block: &RbmBlock) -> f64 {
        let m = block.n_models();
        assert!(m <= MAX_MODELS, "enumeration limited to {MAX_MODELS} models");
        log_sum_exp((0..1usize << m).flat_map(|bits| {
            let v = binary_vector(bits, m);
            [joint_log_weight(block, 0.0, &v), joint_log_weight(block, 1.0, &v)]
        }))
    }

    /// `P(h = 1 | v)` as the ratio of joint probabilities.
    pub fn conditional_from_joint(block: &RbmBlock, v: &[f64]) -> f64 {
        let log_z = log_partition(block);
        let p1 = (joint_log_weight(block, 1.0, v) - log_z).exp();
        let p0 = (joint_log_weight(block, 0.0, v) - log_z).exp();
        p1 / (p0 + p1)
    }

    /// Exact `log P(v) = -F(v) - log Z`.
    pub fn log_marginal(block: &RbmBlock, v: &[f64]) -> f64 {
        -block.free_energy(v) - log_partition(block)
    }

    pub struct Expectations {
        pub hidden: f64,
        pub visible: Vec<f64>,
        /// `E[h v_j]`.
        pub joint: Vec<f64>,
    }

    /// Model expectations of the sufficient statistics.
    pub fn model_expectations(block: &RbmBlock) -> Expectations {
        let m = block.n_models();
        assert!(m <= MAX_MODELS, "enumeration limited to {MAX_MODELS} models");
        let log_z = log_partition(block);
        let mut e = Expectations {
            hidden: 0.0,
            visible: vec![0.0; m],
            joint: vec![0.0; m],
        };
        for bits in 0..1usize << m {
            let v = binary_vector(bits, m);
            let bv: f64 = block.b.iter().zip(&v).map(|(b, v)| b * v).sum();
            let act = block.a + block.w.iter().zip(&v).map(|(w, v)| w * v).sum::<f64>();
            let p_v = (bv + softplus(act) - log_z).exp();
            let p_h = super::sigmoid(act);
            e.hidden += p_v * p_h;
            for j in 0..m {
                e.visible[j] += p_v * v[j];
                e.joint[j] += p_v * p_h * v[j];
            }
        }
        e
    }
}
