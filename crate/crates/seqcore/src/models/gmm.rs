//! Gaussian mixture training as an ERM problem.
//!
//! The hypothesis flattens `k` blocks `[weight_j, mean_j, precision_j]` into
//! one coordinate vector of length `k * (1 + D + D^2)`; the per-point loss is
//! the negative log mixture density. Densities are evaluated in log space and
//! precision eigenvalues are kept inside `[eig_floor, 1/eig_floor]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::LossModel;

// Caps the max/min density ratio in the smoothness bound; far-away points
// drive the true ratio past anything representable once squared.
const DENSITY_RATIO_CAP: f64 = 1e100;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct GmmModel {
    pub k: usize,
    pub dim: usize,
    /// Precision/covariance eigenvalues are clamped to [eig_floor, 1/eig_floor].
    #[serde(default = "default_eig_floor")]
    pub eig_floor: f64,
    /// Optional override for the data-radius bound; measured from the data at
    /// the anchor when absent.
    #[serde(default)]
    pub radius_bound: Option<f64>,
}

fn default_eig_floor() -> f64 {
    1e-2
}

impl GmmModel {
    pub fn new(k: usize, dim: usize) -> Self {
        assert!(k >= 1 && dim >= 1);
        GmmModel { k, dim, eig_floor: default_eig_floor(), radius_bound: None }
    }

    pub fn block_len(&self) -> usize {
        1 + self.dim + self.dim * self.dim
    }
}

/// Structured view of a flattened GMM hypothesis.
#[derive(Clone, Debug)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<DVector<f64>>,
    pub precisions: Vec<DMatrix<f64>>,
}

impl GmmParams {
    pub fn from_flat(k: usize, d: usize, beta: &[f64]) -> Result<Self> {
        let block = 1 + d + d * d;
        if beta.len() != k * block {
            return Err(Error::DimensionMismatch(format!(
                "flat GMM hypothesis has {} coordinates, expected {}",
                beta.len(),
                k * block
            )));
        }
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut precisions = Vec::with_capacity(k);
        for j in 0..k {
            let b = &beta[j * block..(j + 1) * block];
            weights.push(b[0]);
            means.push(DVector::from_column_slice(&b[1..1 + d]));
            precisions.push(DMatrix::from_row_slice(d, d, &b[1 + d..]));
        }
        Ok(GmmParams { weights, means, precisions })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let k = self.weights.len();
        let d = self.means[0].len();
        let mut out = Vec::with_capacity(k * (1 + d + d * d));
        for j in 0..k {
            out.push(self.weights[j]);
            out.extend(self.means[j].iter());
            for r in 0..d {
                for c in 0..d {
                    out.push(self.precisions[j][(r, c)]);
                }
            }
        }
        out
    }

    /// Mixture weights on the simplex, precisions symmetric positive definite.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let wsum: f64 = self.weights.iter().sum();
        if self.weights.iter().any(|&w| w < 0.0) || (wsum - 1.0).abs() > tol {
            return Err(Error::Parameter(format!(
                "mixture weights must be nonnegative and sum to 1 (sum {wsum})"
            )));
        }
        for (j, prec) in self.precisions.iter().enumerate() {
            let sym_err = (prec - prec.transpose()).norm();
            if sym_err > tol * (1.0 + prec.norm()) {
                return Err(Error::Parameter(format!("precision {j} is not symmetric")));
            }
            let eig = prec.clone().symmetric_eigen();
            if eig.eigenvalues.iter().any(|&e| e <= 0.0) {
                return Err(Error::Parameter(format!("precision {j} is not positive definite")));
            }
        }
        Ok(())
    }

    /// Clamp every precision's eigenvalues into [floor, 1/floor], symmetrizing
    /// first so the eigendecomposition is well-posed.
    pub fn clamp_precisions(&mut self, floor: f64) {
        for prec in &mut self.precisions {
            let sym = (prec.clone() + prec.transpose()) * 0.5;
            let eig = sym.symmetric_eigen();
            let clamped = DVector::from_iterator(
                eig.eigenvalues.len(),
                eig.eigenvalues.iter().map(|&e| e.clamp(floor, 1.0 / floor)),
            );
            *prec = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
        }
    }
}

/// Per-hypothesis evaluation state: parsed parameters plus the log normalizers
/// and inverse precisions each point evaluation reuses.
pub struct PreparedGmm {
    pub params: GmmParams,
    log_weights: Vec<f64>,
    log_norms: Vec<f64>,
    inv_precisions: Vec<DMatrix<f64>>,
    d: usize,
}

impl PreparedGmm {
    pub fn new(model: &GmmModel, beta: &[f64]) -> Result<Self> {
        let params = GmmParams::from_flat(model.k, model.dim, beta)?;
        let d = model.dim;
        let mut log_weights = Vec::with_capacity(model.k);
        let mut log_norms = Vec::with_capacity(model.k);
        let mut inv_precisions = Vec::with_capacity(model.k);
        for j in 0..model.k {
            log_weights.push(if params.weights[j] > 0.0 {
                params.weights[j].ln()
            } else {
                f64::NEG_INFINITY
            });
            let lu = params.precisions[j].clone().lu();
            let det = lu.determinant();
            if !(det > 0.0) {
                return Err(Error::Numeric(format!(
                    "precision block {j} has non-positive determinant {det}"
                )));
            }
            log_norms.push(-0.5 * d as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * det.ln());
            let inv = lu.try_inverse().ok_or_else(|| {
                Error::Numeric(format!("precision block {j} is numerically singular"))
            })?;
            inv_precisions.push(inv);
        }
        Ok(PreparedGmm { params, log_weights, log_norms, inv_precisions, d })
    }

    fn k(&self) -> usize {
        self.params.weights.len()
    }

    /// log N(x; mean_j, prec_j^-1) for each component.
    pub fn log_densities(&self, x: &[f64], out: &mut [f64]) {
        let xv = DVector::from_column_slice(x);
        for j in 0..self.k() {
            let u = &xv - &self.params.means[j];
            let quad = (&self.params.precisions[j] * &u).dot(&u);
            out[j] = self.log_norms[j] - 0.5 * quad;
        }
    }

    /// Log mixture density at `x`; fills `gamma` with the responsibilities.
    pub fn log_mix(&self, x: &[f64], gamma: Option<&mut [f64]>) -> f64 {
        let mut terms = vec![0.0; self.k()];
        self.log_densities(x, &mut terms);
        for (t, lw) in terms.iter_mut().zip(&self.log_weights) {
            *t += *lw;
        }
        let lse = log_sum_exp(&terms);
        if let Some(g) = gamma {
            if lse.is_finite() {
                for (gj, &t) in g.iter_mut().zip(&terms) {
                    *gj = (t - lse).exp();
                }
            } else {
                for gj in g.iter_mut() {
                    *gj = 1.0 / self.k() as f64;
                }
            }
        }
        lse
    }

    pub fn point_loss(&self, x: &[f64]) -> f64 {
        -self.log_mix(x, None)
    }

    /// Gradient of the per-point loss with respect to the flattened
    /// coordinates, written into `out`.
    pub fn grad_into(&self, x: &[f64], out: &mut [f64], scale: f64) {
        let k = self.k();
        let d = self.d;
        let block = 1 + d + d * d;
        let xv = DVector::from_column_slice(x);
        let mut log_dens = vec![0.0; k];
        self.log_densities(x, &mut log_dens);
        let mut terms = log_dens.clone();
        for (t, lw) in terms.iter_mut().zip(&self.log_weights) {
            *t += *lw;
        }
        let lse = log_sum_exp(&terms);
        for j in 0..k {
            let gamma = if lse.is_finite() { (terms[j] - lse).exp() } else { 0.0 };
            let b = &mut out[j * block..(j + 1) * block];
            // d f / d w_j = -p_j / mix (well-defined even as w_j -> 0)
            b[0] += scale * -((log_dens[j] - lse).exp());
            let u = &xv - &self.params.means[j];
            // d f / d mean_j = -gamma_j * prec_j (x - mean_j)
            let su = &self.params.precisions[j] * &u;
            for l in 0..d {
                b[1 + l] += scale * (-gamma * su[l]);
            }
            // d f / d prec_j[a,b] = gamma_j / 2 * (u_a u_b - inv_prec[b,a])
            let inv = &self.inv_precisions[j];
            for a in 0..d {
                for c in 0..d {
                    b[1 + d + a * d + c] += scale * (0.5 * gamma * (u[a] * u[c] - inv[(c, a)]));
                }
            }
        }
    }
}

pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|&t| (t - m).exp()).sum::<f64>().ln()
}

impl LossModel for GmmModel {
    fn param_dim(&self, _data_dim: usize) -> usize {
        self.k * self.block_len()
    }

    fn loss(&self, beta: &[f64], x: &[f64], _y: f64) -> f64 {
        match PreparedGmm::new(self, beta) {
            Ok(p) => p.point_loss(x),
            Err(_) => f64::NAN,
        }
    }

    fn grad(&self, beta: &[f64], x: &[f64], _y: f64, out: &mut [f64]) {
        out.fill(0.0);
        if let Ok(p) = PreparedGmm::new(self, beta) {
            p.grad_into(x, out, 1.0);
        } else {
            out.fill(f64::NAN);
        }
    }

    fn losses_into(&self, beta: &[f64], data: &Dataset, idx: &[usize], out: &mut [f64]) {
        match PreparedGmm::new(self, beta) {
            Ok(p) => {
                for (slot, &i) in out.iter_mut().zip(idx) {
                    *slot = p.point_loss(data.row(i));
                }
            }
            Err(_) => out.fill(f64::NAN),
        }
    }

    fn grad_sum_into(
        &self,
        beta: &[f64],
        data: &Dataset,
        idx: &[usize],
        weights: Option<&[f64]>,
        acc: &mut [f64],
    ) {
        match PreparedGmm::new(self, beta) {
            Ok(p) => {
                for &i in idx {
                    let w = weights.map(|w| w[i]).unwrap_or(1.0);
                    p.grad_into(data.row(i), acc, w);
                }
            }
            Err(_) => acc.fill(f64::NAN),
        }
    }

    /// Gradient-norm bound over the ball, assembled from the per-block bounds:
    /// weight block max/min density ratio, mean block r/eig_floor, precision
    /// block sqrt(D)/eig_floor + r^2, where r is the largest anchor
    /// mean-to-point distance.
    fn lipschitz_bound(&self, data: &Dataset, anchor: &[f64]) -> f64 {
        let prepared = match PreparedGmm::new(self, anchor) {
            Ok(p) => p,
            Err(_) => return f64::INFINITY,
        };
        let mut r = self.radius_bound.unwrap_or(0.0);
        let mut log_min = f64::INFINITY;
        let mut log_max = f64::NEG_INFINITY;
        let mut dens = vec![0.0; self.k];
        for i in 0..data.n() {
            let x = data.row(i);
            prepared.log_densities(x, &mut dens);
            for j in 0..self.k {
                log_min = log_min.min(dens[j]);
                log_max = log_max.max(dens[j]);
                if self.radius_bound.is_none() {
                    let xv = DVector::from_column_slice(x);
                    let dist = (&xv - &prepared.params.means[j]).norm();
                    r = r.max(dist);
                }
            }
        }
        let ratio = ((log_max - log_min).exp()).min(DENSITY_RATIO_CAP);
        let lam = self.eig_floor;
        let d = self.dim as f64;
        let mean_term = r / lam;
        let prec_term = d.sqrt() / lam + r * r;
        (self.k as f64 * (ratio * ratio + mean_term * mean_term + prec_term * prec_term)).sqrt()
    }
}

/// Hard cluster assignments: argmax responsibility per point.
pub fn assignments(model: &GmmModel, data: &Dataset, beta: &[f64]) -> Result<Vec<usize>> {
    let prepared = PreparedGmm::new(model, beta)?;
    let mut gamma = vec![0.0; model.k];
    let mut out = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        prepared.log_mix(data.row(i), Some(&mut gamma));
        let best = gamma
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(j, _)| j)
            .unwrap_or(0);
        out.push(best);
    }
    Ok(out)
}

/// Distance-squared seeding with greedy candidate pools: the first mean is
/// drawn by weight; each next mean is picked from a handful of d^2-sampled
/// candidates as the one that shrinks the total potential most. Unit
/// precisions, uniform mixture weights.
pub fn kpp_init(
    model: &GmmModel,
    data: &Dataset,
    weights: Option<&[f64]>,
    seed: u64,
) -> Result<Vec<f64>> {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    let n = data.n();
    if n == 0 {
        return Err(Error::Parameter("empty dataset".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base_w = |i: usize| weights.map(|w| w[i]).unwrap_or(1.0);
    let candidates = 2 + (usize::BITS - model.k.leading_zeros()) as usize;

    let mut chosen: Vec<usize> = Vec::with_capacity(model.k);
    let first = sample_proportional(&mut rng, n, |i| base_w(i))?;
    chosen.push(first);
    let mut best_d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), data.row(first))).collect();
    while chosen.len() < model.k {
        let mut best: Option<(usize, f64)> = None;
        for _ in 0..candidates {
            let cand = sample_proportional(&mut rng, n, |i| base_w(i) * best_d2[i])
                .unwrap_or_else(|_| rng.random_range(0..n));
            let potential: f64 = (0..n)
                .map(|i| base_w(i) * best_d2[i].min(sq_dist(data.row(i), data.row(cand))))
                .sum();
            if best.map(|(_, p)| potential < p).unwrap_or(true) {
                best = Some((cand, potential));
            }
        }
        let next = best.map(|(c, _)| c).unwrap_or(first);
        chosen.push(next);
        for i in 0..n {
            best_d2[i] = best_d2[i].min(sq_dist(data.row(i), data.row(next)));
        }
    }

    let mut params = GmmParams {
        weights: vec![1.0 / model.k as f64; model.k],
        means: chosen
            .iter()
            .map(|&i| DVector::from_column_slice(data.row(i)))
            .collect(),
        precisions: vec![DMatrix::identity(model.dim, model.dim); model.k],
    };
    params.clamp_precisions(model.eig_floor);
    Ok(params.to_flat())
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn sample_proportional<R: rand::Rng>(
    rng: &mut R,
    n: usize,
    score: impl Fn(usize) -> f64,
) -> Result<usize> {
    let total: f64 = (0..n).map(&score).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::Numeric("degenerate seeding scores".into()));
    }
    let mut u = rng.random::<f64>() * total;
    for i in 0..n {
        u -= score(i);
        if u <= 0.0 {
            return Ok(i);
        }
    }
    Ok(n - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testutil::assert_grad_matches_fd;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_1d() -> (GmmModel, Vec<f64>) {
        let model = GmmModel::new(1, 1);
        // w=1, mu=0, prec=1
        (model, vec![1.0, 0.0, 1.0])
    }

    #[test]
    fn standard_normal_loss_at_origin() {
        let (model, beta) = unit_1d();
        let loss = model.loss(&beta, &[0.0], 0.0);
        let expected = 0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((loss - expected).abs() < 1e-12, "got {loss}, want {expected}");
    }

    #[test]
    fn responsibilities_sum_to_one() {
        let model = GmmModel::new(3, 2);
        let beta = [
            0.5, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, //
            0.3, 2.0, 0.0, 1.0, 0.0, 0.0, 1.0, //
            0.2, 0.0, 3.0, 1.0, 0.0, 0.0, 1.0,
        ];
        let p = PreparedGmm::new(&model, &beta).unwrap();
        let mut gamma = vec![0.0; 3];
        for x in [[0.1, 0.2], [5.0, -3.0], [100.0, 100.0]] {
            p.log_mix(&x, Some(&mut gamma));
            let s: f64 = gamma.iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_components_split_equidistant_point() {
        let model = GmmModel::new(2, 1);
        let beta = [0.5, -1.0, 1.0, 0.5, 1.0, 1.0];
        let p = PreparedGmm::new(&model, &beta).unwrap();
        let mut gamma = vec![0.0; 2];
        p.log_mix(&[0.0], Some(&mut gamma));
        assert!((gamma[0] - 0.5).abs() < 1e-12);
        assert!((gamma[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let model = GmmModel::new(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            // Random valid-ish parameters: positive weights, SPD precisions.
            let w0: f64 = rng.random_range(0.2..0.8);
            let mut beta = vec![w0];
            beta.extend((0..2).map(|_| rng.random_range(-1.0..1.0)));
            let a: f64 = rng.random_range(0.5..1.5);
            let b: f64 = rng.random_range(-0.2..0.2);
            let c: f64 = rng.random_range(0.5..1.5);
            beta.extend([a, b, b, c]);
            beta.push(1.0 - w0);
            beta.extend((0..2).map(|_| rng.random_range(-1.0..1.0)));
            let a2: f64 = rng.random_range(0.5..1.5);
            beta.extend([a2, 0.0, 0.0, a2]);
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_grad_matches_fd(&model, &beta, &x, 0.0, 1e-4);
        }
    }

    #[test]
    fn validate_enforces_simplex_and_spd() {
        let good = GmmParams {
            weights: vec![0.6, 0.4],
            means: vec![DVector::zeros(2), DVector::zeros(2)],
            precisions: vec![DMatrix::identity(2, 2); 2],
        };
        assert!(good.validate(1e-9).is_ok());

        let mut bad_weights = good.clone();
        bad_weights.weights = vec![0.8, 0.4];
        assert!(bad_weights.validate(1e-9).is_err());

        let mut asymmetric = good.clone();
        asymmetric.precisions[0][(0, 1)] = 0.5;
        assert!(asymmetric.validate(1e-9).is_err());

        let mut indefinite = good;
        indefinite.precisions[1] = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(indefinite.validate(1e-9).is_err());
    }

    #[test]
    fn clamp_bounds_eigenvalues() {
        let mut params = GmmParams {
            weights: vec![1.0],
            means: vec![DVector::from_column_slice(&[0.0, 0.0])],
            precisions: vec![DMatrix::from_row_slice(2, 2, &[1e6, 0.0, 0.0, 1e-9])],
        };
        params.clamp_precisions(0.01);
        let eig = params.precisions[0].clone().symmetric_eigen();
        for &e in eig.eigenvalues.iter() {
            assert!(e >= 0.01 - 1e-12 && e <= 100.0 + 1e-9);
        }
    }

    #[test]
    fn kpp_spreads_over_separated_blobs() {
        let mut rows = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in 0..3 {
            for _ in 0..30 {
                rows.push(vec![
                    10.0 * c as f64 + rng.random_range(-0.5..0.5),
                    rng.random_range(-0.5..0.5),
                ]);
            }
        }
        let n = rows.len();
        let ds = Dataset::from_rows(&rows, vec![0.0; n]).unwrap();
        let model = GmmModel::new(3, 2);
        let beta = kpp_init(&model, &ds, None, 42).unwrap();
        let params = GmmParams::from_flat(3, 2, &beta).unwrap();
        let mut firsts: Vec<i64> = params.means.iter().map(|m| (m[0] / 10.0).round() as i64).collect();
        firsts.sort_unstable();
        assert_eq!(firsts, vec![0, 1, 2], "one seed per blob");
    }
}
