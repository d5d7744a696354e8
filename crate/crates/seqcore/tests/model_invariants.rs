//! Smoothness-contract sweeps: the computed constants really bound the model
//! derivatives on random data.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use seqcore::data::{Dataset, Hypothesis};
use seqcore::diagnostics::sample_in_ball;
use seqcore::model::{smoothness_constants, LossModel};
use seqcore::models::{GmmModel, LassoModel, LogisticModel, Model, RidgeModel};
use seqcore::synth::{gen_gmm, gen_linear};

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn supervised_data(seed: u64, logistic: bool) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 60;
    let d = 4;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let ys: Vec<f64> = (0..n)
        .map(|_| {
            if logistic {
                f64::from(rng.random::<bool>())
            } else {
                rng.random_range(-3.0..3.0)
            }
        })
        .collect();
    Dataset::from_rows(&rows, ys).unwrap()
}

// 200 random pairs in a unit ball: gradient differences bounded by L times
// the pair distance. For the lasso this applies to the smooth part (the
// penalty subgradient is not continuous); handled via smooth_grad.
fn gradient_lipschitz_sweep(model: &Model, data: &Dataset, smooth_only: bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d = data.dim();
    let l = model.lipschitz_bound(data, &vec![0.0; d]);
    let mut g1 = vec![0.0; d];
    let mut g2 = vec![0.0; d];
    for trial in 0..200 {
        let i = rng.random_range(0..data.n());
        let b1: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b2: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = data.row(i);
        let y = data.response(i);
        if smooth_only {
            model.smooth_grad(&b1, x, y, &mut g1);
            model.smooth_grad(&b2, x, y, &mut g2);
        } else {
            model.grad(&b1, x, y, &mut g1);
            model.grad(&b2, x, y, &mut g2);
        }
        let diff: Vec<f64> = g1.iter().zip(&g2).map(|(a, b)| a - b).collect();
        let dist: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| a - b).collect();
        assert!(
            norm(&diff) <= l * norm(&dist) * (1.0 + 1e-12) + 1e-12,
            "trial {trial}: gradient moved {} over distance {} with L = {l}",
            norm(&diff),
            norm(&dist)
        );
    }
}

#[test]
fn ridge_gradient_lipschitz() {
    let data = supervised_data(1, false);
    gradient_lipschitz_sweep(&Model::Ridge(RidgeModel::new(0.07)), &data, false);
}

#[test]
fn lasso_smooth_gradient_lipschitz() {
    let data = supervised_data(2, false);
    gradient_lipschitz_sweep(&Model::Lasso(LassoModel::new(0.3)), &data, true);
}

#[test]
fn logistic_gradient_lipschitz() {
    let data = supervised_data(3, true);
    gradient_lipschitz_sweep(&Model::Logistic(LogisticModel::with_penalty(0.02)), &data, false);
}

// The mixture constant bounds function values, not gradient differences:
// |f(b1) - f(b2)| <= L ||b1 - b2|| near the anchor.
#[test]
fn gmm_value_lipschitz_near_anchor() {
    let (data, _) = gen_gmm(400, 2, 2, 3.0, 5).unwrap();
    let gmm = GmmModel::new(2, 2);
    let model = Model::Gmm(gmm);
    let anchor = seqcore::models::default_init(&model, &data, None, 11).unwrap();
    let l = model.lipschitz_bound(&data, anchor.coords());
    assert!(l.is_finite() && l > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let radius = 0.05;
    for _ in 0..200 {
        let i = rng.random_range(0..data.n());
        let b1 = sample_in_ball(anchor.coords(), radius, &mut rng);
        let b2 = sample_in_ball(anchor.coords(), radius, &mut rng);
        let f1 = model.loss(&b1, data.row(i), 0.0);
        let f2 = model.loss(&b2, data.row(i), 0.0);
        if !(f1.is_finite() && f2.is_finite()) {
            continue; // a probe broke the simplex constraint; not this bound's regime
        }
        let dist: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| a - b).collect();
        assert!(
            (f1 - f2).abs() <= l * norm(&dist) * (1.0 + 1e-9) + 1e-12,
            "moved {} over {}",
            (f1 - f2).abs(),
            norm(&dist)
        );
    }
}

// Anchor envelope: per-point losses inside the ball stay within
// M' ||delta|| + (L/2) ||delta||^2 of their anchor values.
#[test]
fn taylor_envelope_inside_the_ball() {
    let (data, _) = gen_linear(80, 4, (-3.0, 3.0), 2.0, 17).unwrap();
    let radius = 0.7;
    for model in [
        Model::Ridge(RidgeModel::new(0.05)),
        Model::Lasso(LassoModel::new(0.2)),
    ] {
        let anchor: Vec<f64> = vec![0.4, -0.2, 0.1, 0.3];
        let constants = smoothness_constants(&model, &data, &anchor, radius).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..200 {
            let beta = sample_in_ball(&anchor, radius, &mut rng);
            let delta: Vec<f64> = beta.iter().zip(&anchor).map(|(a, b)| a - b).collect();
            let dist = norm(&delta);
            let bound = constants.m_prime_bound * dist + 0.5 * constants.l * dist * dist;
            for i in 0..data.n() {
                let at_anchor = model.loss(&anchor, data.row(i), data.response(i));
                let at_beta = model.loss(&beta, data.row(i), data.response(i));
                assert!(
                    (at_beta - at_anchor).abs() <= bound * (1.0 + 1e-9) + 1e-12,
                    "point {i}: moved {} with bound {bound}",
                    (at_beta - at_anchor).abs()
                );
            }
        }
    }
}

// The logistic curvature constant from the stated closed form.
#[test]
fn logistic_smoothness_hand_value() {
    let data = Dataset::new(vec![2.0, 0.0, 1.0, 1.0], vec![1.0, 0.0], 2).unwrap();
    let model = Model::Logistic(LogisticModel::new());
    let anchor = Hypothesis::zeros(2);
    let c = smoothness_constants(&model, &data, anchor.coords(), 1.0).unwrap();
    assert_eq!(c.l, 1.0); // max row norm 2 -> L = 4/4
    assert_eq!(c.m_prime_bound, c.m_max + c.l);
}
