pub const DEFAULT_LEAK: f64 = 0.01;

#[inline]
pub fn leaky_relu(z: f64, leak: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        leak * z
    }
}

/// Subgradient; `leak` at `z == 0`.
#[inline]
pub fn leaky_relu_derivative(z: f64, leak: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        leak
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_values() {
        assert_eq!(leaky_relu(2.0, 0.01), 2.0);
        assert!((leaky_relu(-2.0, 0.01) + 0.02).abs() < 1e-15);
        assert_eq!(leaky_relu(0.0, 0.01), 0.0);
        assert_eq!(leaky_relu_derivative(0.0, 0.01), 0.01);
        assert_eq!(leaky_relu_derivative(3.0, 0.01), 1.0);
    }

    #[test]
    fn sigmoid_is_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
        assert!((sigmoid(2.0) + sigmoid(-2.0) - 1.0).abs() < 1e-15);
    }
}
