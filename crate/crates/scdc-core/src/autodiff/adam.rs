//! Adam optimizer with bias correction.

use serde::{Deserialize, Serialize};

use super::Tensor;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    /// State for a fixed parameter list; moments are zero-initialized and
    /// stay aligned with the list order.
    pub fn new(params: &[Tensor], lr: f64) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            second_moment: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    /// One bias-corrected update from each parameter's accumulated gradient.
    /// Gradients are left untouched; the caller zeroes them per step.
    pub fn step(&mut self, params: &[Tensor]) {
        assert_eq!(params.len(), self.first_moment.len(), "parameter list changed size");
        self.step_count += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step_count as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step_count as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        let inv_bc1 = 1.0 / bc1;
        let inv_bc2 = 1.0 / bc2;
        for (i, p) in params.iter().enumerate() {
            let m = &mut self.first_moment[i];
            let v = &mut self.second_moment[i];
            assert_eq!(p.len(), m.len(), "parameter {i} changed size");
            p.with_grad(|grad| {
                p.with_values_mut(|values| {
                    for (((val, &g), mj), vj) in
                        values.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mj = b1 * *mj + (1.0 - b1) * g;
                        *vj = b2 * *vj + (1.0 - b2) * g * g;
                        let m_hat = *mj * inv_bc1;
                        let v_hat = *vj * inv_bc2;
                        *val -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                })
            });
        }
    }
}

/// Convenience wrapper matching the module surface: one optimizer step over
/// `params` using their accumulated gradients.
pub fn adam_step(params: &[Tensor], state: &mut AdamState) {
    state.step(params);
}
