//! Adam with bias correction.

use super::{Gradients, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// Moment accumulators for a list of parameter tensors, each stored flat.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(config: AdamConfig, tensor_sizes: &[usize]) -> Self {
        Self {
            config,
            t: 0,
            m: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: tensor_sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }

    pub fn for_model(config: AdamConfig, model: &MlpModel) -> Self {
        let sizes: Vec<usize> = model
            .layers()
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        Self::new(config, &sizes)
    }

    /// Clears moments and the step counter, keeping the config.
    pub fn reset(&mut self) {
        self.t = 0;
        self.m.iter_mut().chain(self.v.iter_mut()).for_each(|b| b.fill(0.0));
    }

    /// One update of every tensor: `params[k] -= lr * m_hat / (sqrt(v_hat) + eps)`.
    pub fn step<P, G>(&mut self, params: &mut [P], grads: &[G])
    where
        P: AsMut<[f64]>,
        G: AsRef<[f64]>,
    {
        assert_eq!(params.len(), self.m.len(), "tensor count mismatch");
        assert_eq!(grads.len(), self.m.len(), "tensor count mismatch");
        self.t += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.t as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (p, g) = (p.as_mut(), g.as_ref());
            assert_eq!(p.len(), g.len(), "tensor {k} size mismatch");
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = b1 * m[i] + (1.0 - b1) * g[i];
                v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Applies one Adam step to every layer of `model`.
pub fn adam_step(model: &mut MlpModel, grads: &Gradients, state: &mut AdamState) {
    let mut params = model.tensors_mut();
    let grads = grads.tensors();
    state.step(&mut params, &grads);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut state = AdamState::new(AdamConfig::default(), &[3]);
        let mut p = vec![vec![1.0, -2.0, 3.0]];
        state.step(&mut p, &[vec![0.0; 3]]);
        assert_eq!(p[0], vec![1.0, -2.0, 3.0]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_is_learning_rate() {
        // t = 1: m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
        let mut state = AdamState::new(AdamConfig::default(), &[1]);
        let mut p = vec![vec![0.0]];
        state.step(&mut p, &[vec![0.5]]);
        let expected = -1e-3 * 0.5 / (0.5 + 1e-8);
        assert!((p[0][0] - expected).abs() < 1e-15);
        assert!((p[0][0] + 1e-3).abs() < 1e-10);
    }

    #[test]
    fn tensors_update_independently() {
        let g1 = vec![0.3, -0.1];
        let g2 = vec![2.0];
        let mut joint = AdamState::new(AdamConfig::default(), &[2, 1]);
        let mut p = vec![vec![1.0, 1.0], vec![5.0]];
        let mut a = AdamState::new(AdamConfig::default(), &[2]);
        let mut b = AdamState::new(AdamConfig::default(), &[1]);
        let mut pa = vec![vec![1.0, 1.0]];
        let mut pb = vec![vec![5.0]];
        for _ in 0..5 {
            joint.step(&mut p, &[g1.clone(), g2.clone()]);
            a.step(&mut pa, &[g1.clone()]);
            b.step(&mut pb, &[g2.clone()]);
        }
        assert_eq!(p[0], pa[0]);
        assert_eq!(p[1], pb[0]);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut state = AdamState::new(AdamConfig::with_learning_rate(0.0), &[2]);
        let mut p = vec![vec![0.25, -4.0]];
        for _ in 0..3 {
            state.step(&mut p, &[vec![1.0, -7.0]]);
        }
        assert_eq!(p[0], vec![0.25, -4.0]);
        assert!(state.v[0].iter().all(|&v| v >= 0.0));
    }
}
