//! Central finite-difference gradient checking.
//!
//! The checker only ever evaluates the forward function, so it stays an
//! independent oracle for the tape's analytic backward pass.

/// Numeric gradient of `f` at `x` via central differences.
pub fn finite_diff_grad(mut f: impl FnMut(&[f64]) -> f64, x: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let fp = f(&probe);
        probe[i] = orig - eps;
        let fm = f(&probe);
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * eps);
    }
    grad
}

/// Largest relative error between analytic and numeric gradients.
///
/// Per element: |a − n| / max(|a|, |n|, 1). The floor of 1 keeps near-zero
/// gradient pairs (where the relative form is ill-conditioned) on an
/// absolute-error footing.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient_matches() {
        // f(x) = Σ x², ∇f = 2x
        let x = [1.0, -2.0, 0.5];
        let g = finite_diff_grad(|v| v.iter().map(|a| a * a).sum(), &x, 1e-5);
        let analytic = [2.0, -4.0, 1.0];
        assert!(max_rel_error(&analytic, &g) < 1e-9);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let x = [1.0, 2.0];
        let g = finite_diff_grad(|v| v[0] * v[1], &x, 1e-5);
        let wrong = [2.0, 0.0];
        assert!(max_rel_error(&wrong, &g) > 1e-2);
    }
}
