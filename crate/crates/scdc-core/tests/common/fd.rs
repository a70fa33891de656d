//! Central finite-difference gradient checking.

use scdc_core::autodiff::{backward, Tensor};

/// Numeric gradient of `build_loss` w.r.t. `param` by central differences.
/// The loss graph is rebuilt per probe; `param` is restored afterwards.
pub fn numeric_grad(
    param: &Tensor,
    build_loss: &mut dyn FnMut() -> Tensor,
    step: f64,
) -> Vec<f64> {
    let base = param.values();
    let mut grad = vec![0.0; base.len()];
    let mut probe = base.clone();
    for i in 0..base.len() {
        probe[i] = base[i] + step;
        param.set_values(&probe);
        let up = build_loss().item();
        probe[i] = base[i] - step;
        param.set_values(&probe);
        let down = build_loss().item();
        probe[i] = base[i];
        grad[i] = (up - down) / (2.0 * step);
    }
    param.set_values(&base);
    grad
}

/// max over elements of |analytic - numeric| / max(|analytic|, |numeric|, 1e-6)
pub fn max_rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Checks every parameter of a rebuildable scalar loss against central
/// differences; returns the worst relative error seen.
pub fn check_gradients(
    params: &[(&str, Tensor)],
    mut build_loss: impl FnMut() -> Tensor,
    step: f64,
    tol: f64,
) -> f64 {
    // Analytic pass.
    for (_, p) in params {
        p.zero_grad();
    }
    let loss = build_loss();
    backward(&loss).unwrap();
    let analytic: Vec<Vec<f64>> = params.iter().map(|(_, p)| p.grad()).collect();
    drop(loss);

    let mut worst = 0.0f64;
    for ((name, p), a) in params.iter().zip(&analytic) {
        let n = numeric_grad(p, &mut build_loss, step);
        let err = max_rel_err(a, &n);
        assert!(
            err < tol,
            "{name}: max relative gradient error {err:.3e} exceeds {tol:.0e}"
        );
        worst = worst.max(err);
    }
    worst
}
