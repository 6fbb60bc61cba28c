#![allow(dead_code)]

use agreement_core::consensus::RbmBlock;
use agreement_core::data::Batch;
use agreement_core::ndarray::{Array2, ArrayView2};
use agreement_core::nn::{bce_loss_raw, Gradients, MlpArchitecture, MlpModel};
use agreement_core::seeding::{self, Rng};
use rand::Rng as _;

pub const FD_STEP: f64 = 1e-5;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-2.0..2.0))
}

pub fn random_probs(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.0..1.0))
}

pub fn random_binary(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| if rng.random_bool(0.5) { 1.0 } else { 0.0 })
}

/// A random model with at most ~200 parameters.
pub fn random_small_model(seed: u64) -> MlpModel {
    let mut rng = seeding::rng(seed);
    let depth = rng.random_range(0..3);
    let hidden: Vec<usize> = (0..depth).map(|_| rng.random_range(1..7)).collect();
    let d = rng.random_range(1..6);
    let l = rng.random_range(1..4);
    let leak = [0.01, 0.1, 0.3][rng.random_range(0..3)];
    MlpModel::init(&MlpArchitecture::with_leak(hidden, leak).unwrap(), d, l, seed).unwrap()
}

pub fn batch(features: Array2<f64>, labels: Option<Array2<f64>>) -> Batch {
    let n = features.nrows();
    Batch { features, labels, source_indices: (0..n).collect() }
}

/// Central differences of `objective` with respect to every parameter, in
/// the order of `Gradients::tensors`.
pub fn numeric_gradient(model: &MlpModel, objective: impl Fn(&MlpModel) -> f64) -> Vec<Vec<f64>> {
    let mut probe = model.clone();
    let sizes: Vec<usize> = probe.tensors_mut().iter().map(|t| t.len()).collect();
    let mut out = Vec::new();
    for (t, &size) in sizes.iter().enumerate() {
        let mut g = Vec::with_capacity(size);
        for i in 0..size {
            let original = probe.tensors_mut()[t][i];
            probe.tensors_mut()[t][i] = original + FD_STEP;
            let up = objective(&probe);
            probe.tensors_mut()[t][i] = original - FD_STEP;
            let down = objective(&probe);
            probe.tensors_mut()[t][i] = original;
            g.push((up - down) / (2.0 * FD_STEP));
        }
        out.push(g);
    }
    out
}

/// Largest `|a - n| / max(|a|, |n|, 1e-6)` over all entries.
pub fn max_relative_error(analytic: &Gradients, numeric: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, n) in analytic.tensors().iter().zip(numeric) {
        assert_eq!(a.len(), n.len());
        for (x, y) in a.iter().zip(n) {
            worst = worst.max((x - y).abs() / x.abs().max(y.abs()).max(1e-6));
        }
    }
    worst
}

pub fn labeled_objective<'a>(x: ArrayView2<'a, f64>, t: ArrayView2<'a, f64>) -> impl Fn(&MlpModel) -> f64 + 'a {
    move |m: &MlpModel| bce_loss_raw(m.forward(x).unwrap().view(), t).unwrap()
}

/// Scalar-loop forward pass used as an independent reference.
pub fn scalar_forward(model: &MlpModel, x: &[f64]) -> Vec<f64> {
    let leak = model.architecture().leak;
    let layers = model.layers();
    let mut act = x.to_vec();
    for (k, layer) in layers.iter().enumerate() {
        let (fan_in, fan_out) = layer.weights.dim();
        let mut next = vec![0.0; fan_out];
        for o in 0..fan_out {
            let mut z = layer.bias[o];
            for i in 0..fan_in {
                z += act[i] * layer.weights[[i, o]];
            }
            next[o] = if k + 1 == layers.len() {
                1.0 / (1.0 + (-z).exp())
            } else if z > 0.0 {
                z
            } else {
                leak * z
            };
        }
        act = next;
    }
    act
}

pub fn random_block(m: usize, rng: &mut Rng) -> RbmBlock {
    RbmBlock {
        a: rng.random_range(-3.0..3.0),
        b: (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
        w: (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
    }
}

pub fn scalar_sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Newton's method for logistic regression with intercept on `x` (rows).
pub fn logistic_regression_oracle(x: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (n, m) = x.dim();
    let k = m + 1;
    let mut theta = vec![0.0; k];
    let feature = |i: usize, j: usize| if j == 0 { 1.0 } else { x[[i, j - 1]] };
    for _ in 0..100 {
        let mut grad = vec![0.0; k];
        let mut hess = vec![vec![0.0; k]; k];
        for i in 0..n {
            let s: f64 = (0..k).map(|j| theta[j] * feature(i, j)).sum();
            let p = scalar_sigmoid(s);
            for a in 0..k {
                grad[a] += (y[i] - p) * feature(i, a);
                for b in 0..k {
                    hess[a][b] += p * (1.0 - p) * feature(i, a) * feature(i, b);
                }
            }
        }
        // solve hess * step = grad by Gaussian elimination with partial pivoting
        let mut aug: Vec<Vec<f64>> = hess.iter().zip(&grad).map(|(r, g)| [r.clone(), vec![*g]].concat()).collect();
        for col in 0..k {
            let pivot = (col..k).max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs())).unwrap();
            aug.swap(col, pivot);
            for row in 0..k {
                if row != col {
                    let f = aug[row][col] / aug[col][col];
                    for c in col..=k {
                        aug[row][c] -= f * aug[col][c];
                    }
                }
            }
        }
        let step: Vec<f64> = (0..k).map(|r| aug[r][k] / aug[r][r]).collect();
        for j in 0..k {
            theta[j] += step[j];
        }
        if step.iter().map(|s| s.abs()).fold(0.0, f64::max) < 1e-13 {
            break;
        }
    }
    theta
}


/// Recomputes precision and recall from scratch at every distinct threshold.
pub fn brute_force_ap(scores: &[f64], labels: &[f64]) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let positives = labels.iter().filter(|&&y| y == 1.0).count() as f64;
    let mut ap = 0.0;
    let mut previous_recall = 0.0;
    for t in thresholds {
        let mut tp = 0.0;
        let mut fp = 0.0;
        for (s, y) in scores.iter().zip(labels) {
            if *s >= t {
                if *y == 1.0 {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
        }
        let recall = tp / positives;
        ap += (recall - previous_recall) * (tp / (tp + fp));
        previous_recall = recall;
    }
    ap
}

