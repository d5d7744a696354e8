//! The loss-model contract shared by every concrete model.
//!
//! A model supplies the per-point loss, the per-point gradient, and the
//! smoothness constants the layered sampler needs. Everything here is pure:
//! evaluators take immutable references and may be called from any thread.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::sum::fsum;

/// A non-smooth lp-norm penalty split off the smooth part of the loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpPenalty {
    pub lambda: f64,
    pub p: f64,
}

impl LpPenalty {
    pub fn value(&self, beta: &[f64]) -> f64 {
        self.lambda * lp_norm(beta, self.p)
    }

    /// Add `lambda * (a subgradient of ||.||_p at beta)` into `out`.
    /// Coordinates at zero select the zero subgradient.
    pub fn add_subgradient(&self, beta: &[f64], out: &mut [f64]) {
        let norm = lp_norm(beta, self.p);
        if norm == 0.0 {
            return;
        }
        for (o, &b) in out.iter_mut().zip(beta) {
            if b != 0.0 {
                *o += self.lambda * b.abs().powf(self.p - 1.0) * b.signum() * norm.powf(1.0 - self.p);
            }
        }
    }

    /// Worst-case gradient-norm contribution of the penalty over the ball,
    /// from the duality gap between the l2 and lp norms: lambda * d^(1/p - 1/2).
    pub fn holder_inflation(&self, d: usize) -> f64 {
        self.lambda * (d as f64).powf(1.0 / self.p - 0.5)
    }
}

pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

/// Behavioral contract for a pluggable loss model.
pub trait LossModel: Send + Sync {
    /// Dimension of the hypothesis vector given the data dimension.
    fn param_dim(&self, data_dim: usize) -> usize;

    /// Per-point loss. Nonnegative for valid hypotheses.
    fn loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64;

    /// Gradient of `loss` with respect to `beta`, written into `out`.
    /// At non-differentiable points this is a subgradient selection.
    fn grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]);

    /// Loss without any non-smooth penalty term.
    fn smooth_loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64 {
        self.loss(beta, x, y)
    }

    /// Gradient of the smooth part only.
    fn smooth_grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        self.grad(beta, x, y, out);
    }

    /// The non-smooth penalty, when the model has one.
    fn penalty(&self) -> Option<LpPenalty> {
        None
    }

    /// Gradient-smoothness constant: a bound L with
    /// `||grad f_i(b1) - grad f_i(b2)|| <= L ||b1 - b2||` over the data.
    /// Models whose bound depends on the anchor may use it.
    fn lipschitz_bound(&self, data: &Dataset, anchor: &[f64]) -> f64;

    /// Batch hook: losses for `idx` into `out`. Models that amortize
    /// per-hypothesis setup (factorizations, normalizers) override this.
    fn losses_into(&self, beta: &[f64], data: &Dataset, idx: &[usize], out: &mut [f64]) {
        for (slot, &i) in out.iter_mut().zip(idx) {
            *slot = self.loss(beta, data.row(i), data.response(i));
        }
    }

    /// Batch hook: accumulate `sum_i w_i * grad f_i(beta)` over `idx` into
    /// `acc` (weights indexed globally; `None` means weight one).
    fn grad_sum_into(
        &self,
        beta: &[f64],
        data: &Dataset,
        idx: &[usize],
        weights: Option<&[f64]>,
        acc: &mut [f64],
    ) {
        let mut g = vec![0.0; acc.len()];
        for &i in idx {
            self.grad(beta, data.row(i), data.response(i), &mut g);
            match weights {
                Some(w) => {
                    let wi = w[i];
                    for (a, gi) in acc.iter_mut().zip(&g) {
                        *a += wi * *gi;
                    }
                }
                None => {
                    for (a, gi) in acc.iter_mut().zip(&g) {
                        *a += *gi;
                    }
                }
            }
        }
    }

    /// Same hook for the smooth part.
    fn smooth_grad_sum_into(
        &self,
        beta: &[f64],
        data: &Dataset,
        idx: &[usize],
        weights: Option<&[f64]>,
        acc: &mut [f64],
    ) {
        let mut g = vec![0.0; acc.len()];
        for &i in idx {
            self.smooth_grad(beta, data.row(i), data.response(i), &mut g);
            match weights {
                Some(w) => {
                    let wi = w[i];
                    for (a, gi) in acc.iter_mut().zip(&g) {
                        *a += wi * *gi;
                    }
                }
                None => {
                    for (a, gi) in acc.iter_mut().zip(&g) {
                        *a += *gi;
                    }
                }
            }
        }
    }
}

/// Smoothness data for one anchor: the global constant L, the exact max and
/// mean gradient norms at the anchor, and the in-ball max-gradient bound
/// M' <= M + L R.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    pub l: f64,
    pub m_max: f64,
    pub m_mean: f64,
    pub m_prime_bound: f64,
    pub radius: f64,
}

/// Sweep the dataset once at the anchor: L from the model, M as the exact
/// max per-point gradient norm (plus the Hölder inflation for lp penalties),
/// the mean of the same norms, and M' = M + L R.
pub fn smoothness_constants<M: LossModel + ?Sized>(
    model: &M,
    data: &Dataset,
    anchor: &[f64],
    radius: f64,
) -> Result<SmoothnessConstants> {
    if data.n() == 0 {
        return Err(Error::Parameter("empty dataset".into()));
    }
    if anchor.len() != model.param_dim(data.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "anchor has {} coordinates, model expects {}",
            anchor.len(),
            model.param_dim(data.dim())
        )));
    }
    let l = model.lipschitz_bound(data, anchor);
    let mut norms = vec![0.0; data.n()];
    let p = anchor.len();
    let mut g = vec![0.0; p];
    for i in 0..data.n() {
        model.smooth_grad(anchor, data.row(i), data.response(i), &mut g);
        norms[i] = crate::data::norm(&g);
        if !norms[i].is_finite() {
            return Err(Error::NonFiniteGradient { index: i });
        }
    }
    let inflation = model
        .penalty()
        .map(|pen| pen.holder_inflation(data.dim()))
        .unwrap_or(0.0);
    let m_max = norms.iter().fold(0.0f64, |a, &b| a.max(b)) + inflation;
    let m_mean = fsum(&norms) / data.n() as f64 + inflation;
    Ok(SmoothnessConstants {
        l,
        m_max,
        m_mean,
        m_prime_bound: m_max + l * radius,
        radius,
    })
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// Central finite difference of the per-point loss; the oracle the
    /// analytic gradients are checked against.
    pub fn fd_grad<M: LossModel + ?Sized>(
        model: &M,
        beta: &[f64],
        x: &[f64],
        y: f64,
        step: f64,
    ) -> Vec<f64> {
        let mut out = vec![0.0; beta.len()];
        let mut b = beta.to_vec();
        for l in 0..beta.len() {
            let orig = b[l];
            b[l] = orig + step;
            let up = model.loss(&b, x, y);
            b[l] = orig - step;
            let down = model.loss(&b, x, y);
            b[l] = orig;
            out[l] = (up - down) / (2.0 * step);
        }
        out
    }

    /// Relative agreement between analytic and finite-difference gradients.
    pub fn assert_grad_matches_fd<M: LossModel + ?Sized>(
        model: &M,
        beta: &[f64],
        x: &[f64],
        y: f64,
        rel_tol: f64,
    ) {
        let fd = fd_grad(model, beta, x, y, 1e-5);
        let mut analytic = vec![0.0; beta.len()];
        model.grad(beta, x, y, &mut analytic);
        let scale = crate::data::norm(&fd).max(crate::data::norm(&analytic)).max(1.0);
        for l in 0..beta.len() {
            let diff = (analytic[l] - fd[l]).abs();
            assert!(
                diff <= rel_tol * scale,
                "coordinate {l}: analytic {} vs fd {} (scale {scale})",
                analytic[l],
                fd[l]
            );
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lp_norms() {
        let b = [3.0, -4.0];
        assert_eq!(lp_norm(&b, 1.0), 7.0);
        assert_eq!(lp_norm(&b, 2.0), 5.0);
    }

    #[test]
    fn holder_inflation_hand_values() {
        // d=4, p=1, lambda=1: 4^(1/1 - 1/2) = 2.
        let pen = LpPenalty { lambda: 1.0, p: 1.0 };
        assert_eq!(pen.holder_inflation(4), 2.0);
        // p=2: exponent 0, the term reduces to lambda.
        let pen2 = LpPenalty { lambda: 3.0, p: 2.0 };
        assert_eq!(pen2.holder_inflation(4), 3.0);
    }

    #[test]
    fn l1_subgradient_selection() {
        let pen = LpPenalty { lambda: 1.0, p: 1.0 };
        let mut out = vec![0.0, 0.0];
        pen.add_subgradient(&[2.0, 0.0], &mut out);
        assert_eq!(out, vec![1.0, 0.0]);
    }
}
