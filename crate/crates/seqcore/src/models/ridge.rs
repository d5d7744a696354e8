//! Squared-error regression with a squared l2 penalty.
//!
//! Per-point loss: `(<x, b> - y)^2 + lambda * ||b||^2`.

use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::model::LossModel;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RidgeModel {
    pub lambda: f64,
}

impl RidgeModel {
    pub fn new(lambda: f64) -> Self {
        assert!(lambda >= 0.0, "lambda must be nonnegative");
        RidgeModel { lambda }
    }
}

impl LossModel for RidgeModel {
    fn param_dim(&self, data_dim: usize) -> usize {
        data_dim
    }

    fn loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64 {
        let r = dot(x, beta) - y;
        r * r + self.lambda * beta.iter().map(|b| b * b).sum::<f64>()
    }

    fn grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        let r = dot(x, beta) - y;
        for ((o, &xi), &bi) in out.iter_mut().zip(x).zip(beta) {
            *o = 2.0 * r * xi + 2.0 * self.lambda * bi;
        }
    }

    // Per-point Hessian is 2 x x^T + 2 lambda I, so the gradient is
    // (2 max_i ||x_i||^2 + 2 lambda)-Lipschitz.
    fn lipschitz_bound(&self, data: &Dataset, _anchor: &[f64]) -> f64 {
        let r = data.max_row_norm();
        2.0 * r * r + 2.0 * self.lambda
    }
}
