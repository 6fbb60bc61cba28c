use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};

use super::activation::{leaky_relu, sigmoid, DEFAULT_LEAK};
use super::loss::bce_term;
use super::PredictionMatrix;
use crate::seeding;
use crate::{Error, Result};

/// Hidden-layer widths plus the leaky-ReLU slope.
///
/// Displays and parses in bracket notation: `[32 16]` is two hidden layers of
/// 32 and 16 units, `[]` is logistic regression.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpArchitecture {
    pub hidden_sizes: Vec<usize>,
    pub leak: f64,
}

impl MlpArchitecture {
    pub fn new(hidden_sizes: Vec<usize>) -> Result<Self> {
        Self::with_leak(hidden_sizes, DEFAULT_LEAK)
    }

    pub fn with_leak(hidden_sizes: Vec<usize>, leak: f64) -> Result<Self> {
        if hidden_sizes.contains(&0) {
            return Err(Error::InvalidArgument("hidden layer widths must be positive".into()));
        }
        if !(0.0..1.0).contains(&leak) {
            return Err(Error::InvalidArgument(format!("leak {leak} outside [0, 1)")));
        }
        Ok(Self { hidden_sizes, leak })
    }

    /// Parses a comma-separated list such as `[1], [8], [16 8]`.
    pub fn parse_list(s: &str) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        let mut rest = s.trim();
        while !rest.is_empty() {
            let end = rest
                .find(']')
                .ok_or_else(|| Error::Config(format!("unterminated architecture in `{s}`")))?;
            out.push(rest[..=end].parse()?);
            rest = rest[end + 1..].trim_start();
            rest = rest.strip_prefix(',').unwrap_or(rest).trim_start();
        }
        Ok(out)
    }
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self {
            hidden_sizes: Vec::new(),
            leak: DEFAULT_LEAK,
        }
    }
}

impl fmt::Display for MlpArchitecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sizes: Vec<String> = self.hidden_sizes.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", sizes.join(" "))
    }
}

impl FromStr for MlpArchitecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(|| Error::Config(format!("architecture `{s}` is not in [a b ...] form")))?;
        let sizes = inner
            .split_whitespace()
            .map(|tok| {
                tok.parse::<usize>()
                    .map_err(|_| Error::Config(format!("bad layer width `{tok}` in `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sizes)
    }
}

/// One affine layer; weights are `fan_in x fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
        }
    }

    fn affine(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        input.dot(&self.weights) + &self.bias
    }
}

/// Feed-forward network: leaky-ReLU hidden layers, sigmoid outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    architecture: MlpArchitecture,
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Dense>,
}

/// Per-layer gradients, shaped like the model's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.weights.nrows(), l.weights.ncols()))
                .collect(),
        }
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(scale, &b.weights);
            a.bias.scaled_add(scale, &b.bias);
        }
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|l| {
                [
                    l.weights.as_slice().expect("standard layout"),
                    l.bias.as_slice().expect("standard layout"),
                ]
            })
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

impl MlpModel {
    /// Weights uniform on `+-sqrt(2 / fan_in)`, zero biases.
    pub fn init(
        architecture: &MlpArchitecture,
        input_dim: usize,
        output_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidArgument("model dimensions must be positive".into()));
        }
        let mut rng = seeding::rng(seed);
        let widths = Self::widths(architecture, input_dim, output_dim);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (2.0 / fan_in as f64).sqrt();
                let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
                Dense {
                    weights: Array2::from_shape_simple_fn((fan_in, fan_out), || {
                        dist.sample(&mut rng)
                    }),
                    bias: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self {
            architecture: architecture.clone(),
            input_dim,
            output_dim,
            layers,
        })
    }

    /// Builds a model from explicit layers, checking that the shapes chain.
    pub fn from_layers(architecture: MlpArchitecture, layers: Vec<Dense>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::InvalidArgument("model needs at least one layer".into()))?;
        let input_dim = first.weights.nrows();
        let output_dim = layers.last().unwrap().weights.ncols();
        let expected = Self::widths(&architecture, input_dim, output_dim);
        let actual: Vec<usize> = std::iter::once(input_dim)
            .chain(layers.iter().map(|l| l.weights.ncols()))
            .collect();
        let chained = layers.windows(2).all(|w| w[0].weights.ncols() == w[1].weights.nrows());
        let biases_ok = layers.iter().all(|l| l.bias.len() == l.weights.ncols());
        if expected != actual || !chained || !biases_ok || input_dim == 0 || output_dim == 0 {
            return Err(Error::Shape(format!(
                "layers do not match architecture {architecture}"
            )));
        }
        let model = Self {
            architecture,
            input_dim,
            output_dim,
            layers,
        };
        if !model.is_finite() {
            return Err(Error::InvalidArgument("model parameters must be finite".into()));
        }
        Ok(model)
    }

    fn widths(arch: &MlpArchitecture, input_dim: usize, output_dim: usize) -> Vec<usize> {
        std::iter::once(input_dim)
            .chain(arch.hidden_sizes.iter().copied())
            .chain(std::iter::once(output_dim))
            .collect()
    }

    pub fn architecture(&self) -> &MlpArchitecture {
        &self.architecture
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn n_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| {
                [
                    l.weights.as_slice_mut().expect("standard layout"),
                    l.bias.as_slice_mut().expect("standard layout"),
                ]
            })
            .collect()
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input has {} columns, model expects {}",
                x.ncols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    /// Layer inputs for every layer plus the output-layer pre-activation.
    fn forward_cache(&self, x: ArrayView2<'_, f64>) -> (Vec<Array2<f64>>, Array2<f64>) {
        let leak = self.architecture.leak;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        let last = self.layers.len() - 1;
        for layer in &self.layers[..last] {
            let mut z = layer.affine(current.view());
            z.mapv_inplace(|v| leaky_relu(v, leak));
            inputs.push(std::mem::replace(&mut current, z));
        }
        let logits = self.layers[last].affine(current.view());
        inputs.push(current);
        (inputs, logits)
    }

    /// Output-layer pre-activations.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.forward_cache(x).1)
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<PredictionMatrix> {
        Ok(PredictionMatrix::new_unchecked(self.logits(x)?.mapv(sigmoid)))
    }

    /// Mean BCE of `forward(x)` against soft `target`, and its gradient.
    ///
    /// The output delta uses the sigmoid/BCE composite `p - t`; the reported
    /// loss uses clamped probabilities.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        target: ArrayView2<'_, f64>,
    ) -> Result<(f64, Gradients)> {
        self.check_input(&x)?;
        if target.dim() != (x.nrows(), self.output_dim) {
            return Err(Error::Shape(format!(
                "target {:?}, expected ({}, {})",
                target.dim(),
                x.nrows(),
                self.output_dim
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        if x.nrows() == 0 {
            return Ok((0.0, grads));
        }
        let (inputs, logits) = self.forward_cache(x);
        let probs = logits.mapv(sigmoid);
        let scale = 1.0 / probs.len() as f64;
        let loss = probs
            .iter()
            .zip(target.iter())
            .map(|(&p, &t)| bce_term(p, t))
            .sum::<f64>()
            * scale;

        let mut delta = (&probs - &target) * scale;
        let leak = self.architecture.leak;
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let input = &inputs[k];
            // assign keeps the gradient buffers in standard layout
            grads.layers[k].weights.assign(&input.t().dot(&delta));
            grads.layers[k].bias.assign(&delta.sum_axis(Axis(0)));
            if k > 0 {
                let mut upstream = delta.dot(&layer.weights.t());
                // input > 0 exactly when the pre-activation was > 0
                upstream.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d *= leak;
                    }
                });
                delta = upstream;
            }
        }
        Ok((loss, grads))
    }
}

pub fn mlp_init(
    architecture: &MlpArchitecture,
    input_dim: usize,
    output_dim: usize,
    seed: u64,
) -> Result<MlpModel> {
    MlpModel::init(architecture, input_dim, output_dim, seed)
}

pub fn mlp_forward(model: &MlpModel, x: ArrayView2<'_, f64>) -> Result<PredictionMatrix> {
    model.forward(x)
}

pub fn mlp_backward(
    model: &MlpModel,
    x: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
) -> Result<(f64, Gradients)> {
    model.backward(x, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{adam_step, AdamConfig, AdamState};
    use ndarray::{array, s};
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
        let mut rng = seeding::rng(seed);
        Array2::from_shape_simple_fn((rows, cols), || rng.sample(StandardNormal))
    }

    /// Independent scalar-loop forward pass.
    fn scalar_forward(model: &MlpModel, x: &Array2<f64>) -> Array2<f64> {
        let leak = model.architecture().leak;
        let n_layers = model.layers().len();
        let mut out = Array2::zeros((x.nrows(), model.output_dim()));
        for r in 0..x.nrows() {
            let mut act: Vec<f64> = x.row(r).to_vec();
            for (k, layer) in model.layers().iter().enumerate() {
                let mut next = vec![0.0; layer.weights.ncols()];
                for (o, n) in next.iter_mut().enumerate() {
                    let mut z = layer.bias[o];
                    for (i, a) in act.iter().enumerate() {
                        z += a * layer.weights[[i, o]];
                    }
                    *n = if k + 1 == n_layers {
                        1.0 / (1.0 + (-z).exp())
                    } else if z > 0.0 {
                        z
                    } else {
                        leak * z
                    };
                }
                act = next;
            }
            for (o, a) in act.into_iter().enumerate() {
                out[[r, o]] = a;
            }
        }
        out
    }

    #[test]
    fn architecture_notation() {
        let a: MlpArchitecture = "[32 16]".parse().unwrap();
        assert_eq!(a.hidden_sizes, vec![32, 16]);
        assert_eq!(a.to_string(), "[32 16]");
        let list = MlpArchitecture::parse_list("[1], [8], [16 8] ,[]").unwrap();
        assert_eq!(list.len(), 4);
        assert!(list[3].hidden_sizes.is_empty());
        assert!("[0]".parse::<MlpArchitecture>().is_err());
        assert!("16 8".parse::<MlpArchitecture>().is_err());
        assert!(MlpArchitecture::with_leak(vec![], 1.0).is_err());
    }

    #[test]
    fn init_shapes() {
        let m = MlpModel::init(&MlpArchitecture::default(), 3, 2, 0).unwrap();
        assert_eq!(m.layers().len(), 1);
        assert_eq!(m.layers()[0].weights.dim(), (3, 2));
        assert!(m.layers()[0].bias.iter().all(|&b| b == 0.0));

        let arch: MlpArchitecture = "[32 16]".parse().unwrap();
        let m = MlpModel::init(&arch, 120, 101, 0).unwrap();
        let dims: Vec<_> = m.layers().iter().map(|l| l.weights.dim()).collect();
        assert_eq!(dims, vec![(120, 32), (32, 16), (16, 101)]);
        let bound = (2.0f64 / 120.0).sqrt();
        assert!(m.layers()[0].weights.iter().all(|w| w.abs() <= bound));
    }

    #[test]
    fn init_is_deterministic() {
        let arch: MlpArchitecture = "[4]".parse().unwrap();
        assert_eq!(
            MlpModel::init(&arch, 3, 2, 9).unwrap(),
            MlpModel::init(&arch, 3, 2, 9).unwrap()
        );
        assert_ne!(
            MlpModel::init(&arch, 3, 2, 9).unwrap(),
            MlpModel::init(&arch, 3, 2, 10).unwrap()
        );
    }

    #[test]
    fn zero_model_outputs_half() {
        let mut m = MlpModel::init(&MlpArchitecture::default(), 3, 2, 0).unwrap();
        m.layers_mut()[0].weights.fill(0.0);
        let p = m.forward(random_matrix(4, 3, 1).view()).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn empty_batch() {
        let m = MlpModel::init(&MlpArchitecture::default(), 3, 2, 0).unwrap();
        let p = m.forward(Array2::zeros((0, 3)).view()).unwrap();
        assert_eq!(p.dim(), (0, 2));
        let (loss, g) = m.backward(Array2::zeros((0, 3)).view(), Array2::zeros((0, 2)).view()).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn shape_mismatch_errors() {
        let m = MlpModel::init(&MlpArchitecture::default(), 3, 2, 0).unwrap();
        assert!(m.forward(Array2::zeros((1, 4)).view()).is_err());
        assert!(m.backward(Array2::zeros((1, 3)).view(), Array2::zeros((1, 3)).view()).is_err());
    }

    #[test]
    fn forward_matches_scalar_reference() {
        let arch: MlpArchitecture = "[7 5]".parse().unwrap();
        for seed in 0..5 {
            let m = MlpModel::init(&arch, 6, 3, seed).unwrap();
            let x = random_matrix(9, 6, seed + 100);
            let fast = m.forward(x.view()).unwrap();
            let slow = scalar_forward(&m, &x);
            for (a, b) in fast.iter().zip(slow.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_row_equivariant() {
        let arch: MlpArchitecture = "[4]".parse().unwrap();
        let m = MlpModel::init(&arch, 3, 2, 1).unwrap();
        let x = random_matrix(5, 3, 2);
        let perm = [3, 0, 4, 1, 2];
        let px = x.select(Axis(0), &perm);
        let a = m.forward(x.view()).unwrap();
        let b = m.forward(px.view()).unwrap();
        assert_eq!(a.select(Axis(0), &perm), *b);
    }

    #[test]
    fn target_equal_to_output_gives_zero_output_delta() {
        let m = MlpModel::init(&MlpArchitecture::default(), 3, 2, 4).unwrap();
        let x = random_matrix(6, 3, 5);
        let p = m.forward(x.view()).unwrap();
        let (_, g) = m.backward(x.view(), p.view()).unwrap();
        assert!(g.tensors().iter().all(|t| t.iter().all(|v| v.abs() < 1e-15)));
    }

    #[test]
    fn duplicated_batch_keeps_gradient() {
        let arch: MlpArchitecture = "[3]".parse().unwrap();
        let m = MlpModel::init(&arch, 4, 2, 6).unwrap();
        let x = random_matrix(5, 4, 7);
        let t = random_matrix(5, 2, 8).mapv(|v| f64::from(u8::from(v > 0.0)));
        let x2 = ndarray::concatenate(Axis(0), &[x.view(), x.view()]).unwrap();
        let t2 = ndarray::concatenate(Axis(0), &[t.view(), t.view()]).unwrap();
        let (l1, g1) = m.backward(x.view(), t.view()).unwrap();
        let (l2, g2) = m.backward(x2.view(), t2.view()).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (a, b) in g1.tensors().iter().zip(g2.tensors()) {
            for (u, v) in a.iter().zip(b) {
                assert!((u - v).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn finite_difference_small_model() {
        // 5 samples, 4 inputs, one hidden layer of 3, 2 outputs
        let arch: MlpArchitecture = "[3]".parse().unwrap();
        let m = MlpModel::init(&arch, 4, 2, 11).unwrap();
        let x = random_matrix(5, 4, 12);
        let t = random_matrix(5, 2, 13).mapv(sigmoid);
        let (_, g) = m.backward(x.view(), t.view()).unwrap();
        let loss = |m: &MlpModel| crate::nn::bce_loss(&m.forward(x.view()).unwrap(), t.view()).unwrap();
        let h = 1e-5;
        for k in 0..m.layers().len() {
            for (idx, analytic) in g.layers[k].weights.indexed_iter() {
                let mut plus = m.clone();
                plus.layers_mut()[k].weights[idx] += h;
                let mut minus = m.clone();
                minus.layers_mut()[k].weights[idx] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(rel < 1e-4, "layer {k} {idx:?}: {numeric} vs {analytic}");
            }
        }
    }

    #[test]
    fn adam_reduces_loss() {
        let arch: MlpArchitecture = "[8]".parse().unwrap();
        let mut m = MlpModel::init(&arch, 3, 1, 0).unwrap();
        let x = random_matrix(64, 3, 1);
        let t = x.slice(s![.., 0..1]).mapv(|v| f64::from(u8::from(v > 0.0)));
        let mut state = AdamState::for_model(AdamConfig::with_learning_rate(0.01), &m);
        let (first, _) = m.backward(x.view(), t.view()).unwrap();
        for _ in 0..200 {
            let (_, g) = m.backward(x.view(), t.view()).unwrap();
            adam_step(&mut m, &g, &mut state);
        }
        let (last, _) = m.backward(x.view(), t.view()).unwrap();
        assert!(last < first * 0.5, "{first} -> {last}");
        assert!(m.is_finite());
    }

    #[test]
    fn from_layers_validates() {
        let m = MlpModel::init(&"[3]".parse().unwrap(), 2, 1, 0).unwrap();
        let rebuilt = MlpModel::from_layers(m.architecture().clone(), m.layers().to_vec()).unwrap();
        assert_eq!(rebuilt, m);
        assert!(MlpModel::from_layers(MlpArchitecture::default(), m.layers().to_vec()).is_err());
        let bad = vec![Dense {
            weights: array![[f64::NAN]],
            bias: array![0.0],
        }];
        assert!(MlpModel::from_layers(MlpArchitecture::default(), bad).is_err());
    }
}
