//! Weighted and unweighted empirical-risk evaluation.
//!
//! Loss sums use correctly rounded accumulation, so a risk value depends only
//! on the multiset of per-point losses (order and thread count never matter).
//! Gradient sums are combined in fixed chunk order, so they are reproducible
//! across thread counts as well, though not exactly permutation-invariant.

use rayon::prelude::*;

use crate::data::{Coreset, Dataset};
use crate::error::{Error, Result};
use crate::model::LossModel;
use crate::sum::fsum;

// Work is split into fixed-size index chunks; results are reduced in chunk
// order. Chunk geometry must not depend on the thread count.
const CHUNK: usize = 2048;

fn check_dims<M: LossModel + ?Sized>(model: &M, data: &Dataset, beta: &[f64]) -> Result<()> {
    let expected = model.param_dim(data.dim());
    if beta.len() != expected {
        return Err(Error::DimensionMismatch(format!(
            "hypothesis has {} coordinates, model expects {expected}",
            beta.len()
        )));
    }
    Ok(())
}

fn check_coreset_len(data: &Dataset, coreset: &Coreset) -> Result<()> {
    if coreset.len() != data.n() {
        return Err(Error::DimensionMismatch(format!(
            "coreset covers {} points, dataset has {}",
            coreset.len(),
            data.n()
        )));
    }
    Ok(())
}

/// Fill `out[k] = loss(beta, idx[k])`, in parallel over fixed chunks.
fn fill_losses<M: LossModel + ?Sized + Sync>(
    model: &M,
    data: &Dataset,
    beta: &[f64],
    idx: &[usize],
    out: &mut [f64],
) {
    idx.par_chunks(CHUNK)
        .zip(out.par_chunks_mut(CHUNK))
        .for_each(|(ichunk, ochunk)| model.losses_into(beta, data, ichunk, ochunk));
}

fn first_nonfinite(idx: &[usize], losses: &[f64]) -> Option<(usize, f64)> {
    losses
        .iter()
        .position(|v| !v.is_finite())
        .map(|k| (idx[k], losses[k]))
}

/// Mean per-point loss over the whole dataset (the empirical risk).
pub fn full_risk<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    beta: &[f64],
) -> Result<f64> {
    check_dims(model, data, beta)?;
    let idx: Vec<usize> = (0..data.n()).collect();
    let mut losses = vec![0.0; data.n()];
    fill_losses(model, data, beta, &idx, &mut losses);
    if let Some((i, v)) = first_nonfinite(&idx, &losses) {
        return Err(Error::NonFiniteLoss { index: i, value: v });
    }
    Ok(fsum(&losses) / data.n() as f64)
}

/// Weighted mean loss over the coreset support.
pub fn weighted_risk<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    beta: &[f64],
) -> Result<f64> {
    check_dims(model, data, beta)?;
    check_coreset_len(data, coreset)?;
    let idx = coreset.support();
    let mut losses = vec![0.0; idx.len()];
    fill_losses(model, data, beta, idx, &mut losses);
    if let Some((i, v)) = first_nonfinite(idx, &losses) {
        return Err(Error::NonFiniteLoss { index: i, value: v });
    }
    let w = coreset.weights();
    for (l, &i) in losses.iter_mut().zip(idx) {
        *l *= w[i];
    }
    let wsum = fsum(&support_weights(coreset));
    Ok(fsum(&losses) / wsum)
}

/// Weighted mean of the smooth-part losses (penalty excluded). Used by the
/// proximal host, which treats the penalty analytically.
pub fn weighted_smooth_risk<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    beta: &[f64],
) -> Result<f64> {
    check_dims(model, data, beta)?;
    check_coreset_len(data, coreset)?;
    let idx = coreset.support();
    let w = coreset.weights();
    let mut losses = vec![0.0; idx.len()];
    idx.par_chunks(CHUNK)
        .zip(losses.par_chunks_mut(CHUNK))
        .for_each(|(ichunk, ochunk)| {
            for (slot, &i) in ochunk.iter_mut().zip(ichunk) {
                *slot = model.smooth_loss(beta, data.row(i), data.response(i));
            }
        });
    if let Some((i, v)) = first_nonfinite(idx, &losses) {
        return Err(Error::NonFiniteLoss { index: i, value: v });
    }
    for (l, &i) in losses.iter_mut().zip(idx) {
        *l *= w[i];
    }
    let wsum = fsum(&support_weights(coreset));
    Ok(fsum(&losses) / wsum)
}

fn support_weights(coreset: &Coreset) -> Vec<f64> {
    coreset.support().iter().map(|&i| coreset.weight(i)).collect()
}

enum GradPart {
    Full,
    Smooth,
}

fn gradient_impl<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    idx: &[usize],
    weights: Option<&[f64]>,
    beta: &[f64],
    denom: f64,
    part: GradPart,
) -> Result<Vec<f64>> {
    let p = beta.len();
    let partials: Vec<Vec<f64>> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; p];
            match part {
                GradPart::Full => model.grad_sum_into(beta, data, chunk, weights, &mut acc),
                GradPart::Smooth => {
                    model.smooth_grad_sum_into(beta, data, chunk, weights, &mut acc)
                }
            }
            acc
        })
        .collect();
    let mut out = vec![0.0; p];
    for part in &partials {
        for (o, v) in out.iter_mut().zip(part) {
            *o += *v;
        }
    }
    for o in out.iter_mut() {
        *o /= denom;
    }
    if let Some(l) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite gradient coordinate {l}")));
    }
    Ok(out)
}

/// Mean per-point gradient over the whole dataset.
pub fn full_gradient<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    beta: &[f64],
) -> Result<Vec<f64>> {
    check_dims(model, data, beta)?;
    let idx: Vec<usize> = (0..data.n()).collect();
    gradient_impl(data, model, &idx, None, beta, data.n() as f64, GradPart::Full)
}

/// Weighted mean gradient over the coreset support.
pub fn weighted_gradient<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    beta: &[f64],
) -> Result<Vec<f64>> {
    check_dims(model, data, beta)?;
    check_coreset_len(data, coreset)?;
    let wsum = fsum(&support_weights(coreset));
    gradient_impl(
        data,
        model,
        coreset.support(),
        Some(coreset.weights()),
        beta,
        wsum,
        GradPart::Full,
    )
}

/// Weighted mean gradient of the smooth part only.
pub fn weighted_smooth_gradient<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    beta: &[f64],
) -> Result<Vec<f64>> {
    check_dims(model, data, beta)?;
    check_coreset_len(data, coreset)?;
    let wsum = fsum(&support_weights(coreset));
    gradient_impl(
        data,
        model,
        coreset.support(),
        Some(coreset.weights()),
        beta,
        wsum,
        GradPart::Smooth,
    )
}

/// Per-point losses at a hypothesis, in index order.
pub fn pointwise_losses<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    beta: &[f64],
) -> Result<Vec<f64>> {
    check_dims(model, data, beta)?;
    let idx: Vec<usize> = (0..data.n()).collect();
    let mut losses = vec![0.0; data.n()];
    fill_losses(model, data, beta, &idx, &mut losses);
    if let Some((i, v)) = first_nonfinite(&idx, &losses) {
        return Err(Error::NonFiniteLoss { index: i, value: v });
    }
    Ok(losses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Provenance;
    use crate::models::{LogisticModel, Model, RidgeModel};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_ridge() -> (Dataset, Model) {
        let ds = Dataset::new(vec![1.0, 0.0], vec![1.0], 2).unwrap();
        (ds, Model::Ridge(RidgeModel::new(0.01)))
    }

    #[test]
    fn single_point_hand_value() {
        let (ds, model) = small_ridge();
        let f = full_risk(&ds, &model, &[0.0, 0.0]).unwrap();
        assert_eq!(f, 1.0);
    }

    #[test]
    fn logistic_at_zero_is_ln2() {
        let ds = Dataset::new(vec![1.0, -3.0, 2.0, 0.5], vec![1.0, 0.0], 2).unwrap();
        let model = Model::Logistic(LogisticModel::new());
        let f = full_risk(&ds, &model, &[0.0, 0.0]).unwrap();
        assert!((f - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn replication_leaves_mean_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..17)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..17).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ds = Dataset::from_rows(&rows, ys.clone()).unwrap();
        let doubled_rows: Vec<Vec<f64>> = rows.iter().chain(rows.iter()).cloned().collect();
        let doubled_ys: Vec<f64> = ys.iter().chain(ys.iter()).cloned().collect();
        let ds2 = Dataset::from_rows(&doubled_rows, doubled_ys).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.1));
        let beta = [0.3, -0.7, 0.2];
        assert_eq!(
            full_risk(&ds, &model, &beta).unwrap(),
            full_risk(&ds2, &model, &beta).unwrap()
        );
    }

    #[test]
    fn permutation_invariance_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 403;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let model = Model::Ridge(RidgeModel::new(0.01));
        let beta = [1.0, -0.5, 0.25, 2.0];
        let reference = full_risk(&Dataset::from_rows(&rows, ys.clone()).unwrap(), &model, &beta).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        for _ in 0..10 {
            order.shuffle(&mut rng);
            let prows: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();
            let pys: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
            let permuted = full_risk(&Dataset::from_rows(&prows, pys).unwrap(), &model, &beta).unwrap();
            assert_eq!(permuted, reference);
        }
    }

    #[test]
    fn identity_weights_equal_full_risk_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..5).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ds = Dataset::from_rows(&rows, ys).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.01));
        let ones = Coreset::full(n);
        for _ in 0..5 {
            let beta: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let f = full_risk(&ds, &model, &beta).unwrap();
            let wf = weighted_risk(&ds, &model, &ones, &beta).unwrap();
            assert_eq!(wf, f);
            let g = full_gradient(&ds, &model, &beta).unwrap();
            let wg = weighted_gradient(&ds, &model, &ones, &beta).unwrap();
            assert_eq!(wg, g);
        }
    }

    #[test]
    fn identity_weights_hold_for_every_model() {
        use crate::models::{GmmModel, LassoModel};
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let n = 30;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..2).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| f64::from(rng.random::<bool>())).collect();
        let ds = Dataset::from_rows(&rows, ys).unwrap();
        let ones = Coreset::full(n);
        let models = [
            Model::Lasso(LassoModel::new(0.2)),
            Model::Logistic(LogisticModel::new()),
            Model::Gmm(GmmModel::new(2, 2)),
        ];
        for model in &models {
            for trial in 0..5 {
                let beta: Vec<f64> = match model {
                    Model::Gmm(_) => {
                        let mut b = vec![0.6, 0.1, -0.2, 1.0, 0.0, 0.0, 1.0];
                        b.extend([0.4, -0.5, 0.9, 1.2, 0.1, 0.1, 0.8]);
                        b.iter().map(|v| v + 0.01 * trial as f64).collect()
                    }
                    _ => (0..2).map(|_| rng.random_range(-1.5..1.5)).collect(),
                };
                let f = full_risk(&ds, model, &beta).unwrap();
                let wf = weighted_risk(&ds, model, &ones, &beta).unwrap();
                assert_eq!(wf, f, "{model:?}");
            }
        }
    }

    #[test]
    fn point_mass_selects_single_loss() {
        let ds = Dataset::new(vec![1.0, 0.0, 0.0, 1.0, 2.0, 2.0], vec![1.0, -1.0, 0.0], 2).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.0));
        let mut w = vec![0.0; 3];
        w[1] = 3.0;
        let c = Coreset::from_weights(w, Provenance::Uniform).unwrap();
        let beta = [0.5, 0.5];
        let expected = model.as_loss_model().loss(&beta, ds.row(1), ds.response(1));
        assert_eq!(weighted_risk(&ds, &model, &c, &beta).unwrap(), expected);
    }

    #[test]
    fn weighted_mean_hand_trace() {
        // losses (1, 3, 9, 9), weights (2, 2, 0, 0) -> (2*1 + 2*3) / 4 = 2.
        let ds = Dataset::new(vec![1.0, 3.0f64.sqrt(), 3.0, 3.0], vec![0.0, 0.0, 0.0, 0.0], 1).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.0));
        let beta = [1.0];
        let c = Coreset::from_weights(vec![2.0, 2.0, 0.0, 0.0], Provenance::Uniform).unwrap();
        let got = weighted_risk(&ds, &model, &c, &beta).unwrap();
        assert!((got - 2.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_gradient_hand_value() {
        let ds = Dataset::new(vec![1.0, 0.0], vec![1.0], 2).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.0));
        let c = Coreset::from_weights(vec![1.0], Provenance::Uniform).unwrap();
        let g = weighted_gradient(&ds, &model, &c, &[0.0, 0.0]).unwrap();
        assert_eq!(g, vec![-2.0, 0.0]);
    }

    #[test]
    fn nonfinite_loss_names_the_offender() {
        let ds = Dataset::new(vec![1e200, 0.0, 1.0], vec![0.0, 0.0, 0.0], 1).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.0));
        let err = full_risk(&ds, &model, &[1e200]).unwrap_err();
        match err {
            Error::NonFiniteLoss { index, .. } => assert_eq!(index, 0),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let (ds, model) = small_ridge();
        assert!(full_risk(&ds, &model, &[0.0]).is_err());
        let short = Coreset::full(3);
        assert!(weighted_risk(&ds, &model, &short, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn weighted_gradient_matches_finite_differences_of_weighted_risk() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 40;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ds = Dataset::from_rows(&rows, ys).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.02));
        let mut w = vec![0.0; n];
        for i in (0..n).step_by(3) {
            w[i] = n as f64 / ((n + 2) / 3) as f64;
        }
        let c = Coreset::from_weights(w, Provenance::Uniform).unwrap();
        let beta: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = weighted_gradient(&ds, &model, &c, &beta).unwrap();
        let h = 1e-5;
        for l in 0..3 {
            let mut up = beta.clone();
            up[l] += h;
            let mut dn = beta.clone();
            dn[l] -= h;
            let fd = (weighted_risk(&ds, &model, &c, &up).unwrap()
                - weighted_risk(&ds, &model, &c, &dn).unwrap())
                / (2.0 * h);
            assert!(
                (g[l] - fd).abs() <= 1e-4 * fd.abs().max(1.0),
                "coordinate {l}: {} vs {}",
                g[l],
                fd
            );
        }
    }
}
