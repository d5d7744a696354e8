//! Binary logistic regression with an optional squared l2 penalty.

use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::model::LossModel;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogisticModel {
    #[serde(default)]
    pub lambda: f64,
}

impl LogisticModel {
    pub fn new() -> Self {
        LogisticModel { lambda: 0.0 }
    }

    pub fn with_penalty(lambda: f64) -> Self {
        assert!(lambda >= 0.0);
        LogisticModel { lambda }
    }
}

impl Default for LogisticModel {
    fn default() -> Self {
        Self::new()
    }
}

// log(1 + e^t) without overflow for large |t|.
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl LossModel for LogisticModel {
    fn param_dim(&self, data_dim: usize) -> usize {
        data_dim
    }

    // -y log g(t) - (1-y) log(1 - g(t))  ==  softplus(t) - y t.
    fn loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64 {
        let t = dot(x, beta);
        softplus(t) - y * t + self.lambda * beta.iter().map(|b| b * b).sum::<f64>()
    }

    fn grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        let t = dot(x, beta);
        let s = sigmoid(t) - y;
        for ((o, &xi), &bi) in out.iter_mut().zip(x).zip(beta) {
            *o = s * xi + 2.0 * self.lambda * bi;
        }
    }

    // Sigmoid curvature is at most 1/4.
    fn lipschitz_bound(&self, data: &Dataset, _anchor: &[f64]) -> f64 {
        let r = data.max_row_norm();
        0.25 * r * r + 2.0 * self.lambda
    }
}
