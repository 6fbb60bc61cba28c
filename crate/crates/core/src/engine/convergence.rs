/// Windowed convergence test on a loss history.
///
/// True when the history holds at least `2 * window` values and the mean of
/// the last `window` differs from the mean of the `window` before it by at
/// most `tol` relative to the earlier mean.
pub fn has_converged(history: &[f64], window: usize, tol: f64) -> bool {
    assert!(window >= 2, "convergence window must be at least 2");
    window_change(history, window).is_some_and(|change| change <= tol)
}

/// Relative change between the last two windows, if there are two.
pub fn window_change(history: &[f64], window: usize) -> Option<f64> {
    if window == 0 || history.len() < 2 * window {
        return None;
    }
    let n = history.len();
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let recent = mean(&history[n - window..]);
    let previous = mean(&history[n - 2 * window..n - window]);
    Some((recent - previous).abs() / previous.abs().max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_history() {
        assert!(has_converged(&[0.3; 10], 5, 1e-4));
    }

    #[test]
    fn geometric_decay_is_not_converged() {
        // windows of 0.5^k: means differ by a factor of 32
        let h: Vec<f64> = (0..10).map(|k| 0.5f64.powi(k)).collect();
        assert!(!has_converged(&h, 5, 1e-4));
        let change = window_change(&h, 5).unwrap();
        assert!((change - (1.0 - 1.0 / 32.0)).abs() < 1e-12);
    }

    #[test]
    fn short_history() {
        assert!(!has_converged(&[0.3; 9], 5, 1e-4));
        assert!(window_change(&[0.3; 9], 5).is_none());
    }

    #[test]
    fn zero_losses_converge() {
        assert!(has_converged(&[0.0; 8], 4, 1e-4));
    }
}
