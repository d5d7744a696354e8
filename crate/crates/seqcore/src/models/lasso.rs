//! Squared-error regression with an lp penalty, p in (0, 2], default l1.
//!
//! The per-point loss used for layering is `g_i + lambda * ||b||_p` with the
//! smooth part `g_i = (<x, b> - y)^2`; solvers work on the split form.

use serde::{Deserialize, Serialize};

use crate::data::{dot, Dataset};
use crate::error::{Error, Result};
use crate::model::{LossModel, LpPenalty};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LassoModel {
    pub lambda: f64,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_p() -> f64 {
    1.0
}

impl LassoModel {
    pub fn new(lambda: f64) -> Self {
        LassoModel { lambda, p: 1.0 }
    }

    pub fn with_exponent(lambda: f64, p: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 2.0) {
            return Err(Error::Parameter(format!("penalty exponent p={p} outside (0, 2]")));
        }
        if lambda < 0.0 {
            return Err(Error::Parameter("lambda must be nonnegative".into()));
        }
        Ok(LassoModel { lambda, p })
    }
}

impl LossModel for LassoModel {
    fn param_dim(&self, data_dim: usize) -> usize {
        data_dim
    }

    fn loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64 {
        self.smooth_loss(beta, x, y) + self.penalty().unwrap().value(beta)
    }

    fn grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        self.smooth_grad(beta, x, y, out);
        self.penalty().unwrap().add_subgradient(beta, out);
    }

    fn smooth_loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64 {
        let r = dot(x, beta) - y;
        r * r
    }

    fn smooth_grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        let r = dot(x, beta) - y;
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = 2.0 * r * xi;
        }
    }

    fn penalty(&self) -> Option<LpPenalty> {
        Some(LpPenalty { lambda: self.lambda, p: self.p })
    }

    // Smooth-part Hessian is 2 x x^T.
    fn lipschitz_bound(&self, data: &Dataset, _anchor: &[f64]) -> f64 {
        let r = data.max_row_norm();
        2.0 * r * r
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::assert_grad_matches_fd;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn penalty_hand_values() {
        let m1 = LassoModel::with_exponent(1.0, 1.0).unwrap();
        assert_eq!(m1.penalty().unwrap().value(&[3.0, -4.0]), 7.0);
        let m2 = LassoModel::with_exponent(1.0, 2.0).unwrap();
        assert_eq!(m2.penalty().unwrap().value(&[3.0, -4.0]), 5.0);
    }

    #[test]
    fn exponent_validation() {
        assert!(LassoModel::with_exponent(1.0, 0.0).is_err());
        assert!(LassoModel::with_exponent(1.0, 2.5).is_err());
        assert!(LassoModel::with_exponent(-1.0, 1.0).is_err());
    }

    #[test]
    fn split_reassembles_loss() {
        let m = LassoModel::new(0.5);
        let beta = [1.0, -2.0];
        let x = [0.5, 0.25];
        let got = m.loss(&beta, &x, 1.0);
        let smooth = m.smooth_loss(&beta, &x, 1.0);
        assert_eq!(got, smooth + 0.5 * 3.0);
    }

    #[test]
    fn gradient_matches_finite_differences_away_from_kinks() {
        let m = LassoModel::new(0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            // Keep coordinates away from zero so the loss is differentiable.
            let beta: Vec<f64> = (0..3)
                .map(|_| {
                    let v: f64 = rng.random_range(0.5..2.0);
                    if rng.random::<bool>() {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let y = rng.random_range(-3.0..3.0);
            assert_grad_matches_fd(&m, &beta, &x, y, 1e-4);
        }
    }
}
