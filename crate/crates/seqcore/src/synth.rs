//! Seeded synthetic data generators for the benchmark protocols.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Linear data: standard-normal features, responses `<h, x> + noise` with
/// `h` drawn uniformly from `coef_range` per coordinate and Gaussian noise of
/// the given variance. Returns the generating coefficients alongside for
/// ground-truth checks.
pub fn gen_linear(
    n: usize,
    d: usize,
    coef_range: (f64, f64),
    noise_var: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if n == 0 || d == 0 {
        return Err(Error::Parameter("n and d must be at least 1".into()));
    }
    if coef_range.0 > coef_range.1 || noise_var < 0.0 {
        return Err(Error::Parameter("bad coefficient range or noise variance".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h: Vec<f64> = (0..d)
        .map(|_| {
            if coef_range.0 == coef_range.1 {
                coef_range.0
            } else {
                rng.random_range(coef_range.0..coef_range.1)
            }
        })
        .collect();
    let noise_sd = noise_var.sqrt();
    let mut features = Vec::with_capacity(n * d);
    let mut responses = Vec::with_capacity(n);
    for _ in 0..n {
        let mut y = 0.0;
        for &hj in &h {
            let x: f64 = rng.sample(StandardNormal);
            features.push(x);
            y += hj * x;
        }
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
        responses.push(y + noise);
    }
    Ok((Dataset::new(features, responses, d)?, h))
}

/// Ground truth emitted with a mixture dataset.
#[derive(Clone, Debug)]
pub struct GmmTruth {
    pub labels: Vec<usize>,
    pub means: Vec<Vec<f64>>,
}

/// Isotropic Gaussian blobs. Component means are drawn at scale
/// `separation * sqrt(dim)` and re-drawn until every pair is at least that far
/// apart; points carry their component index as the response column.
pub fn gen_gmm(
    n: usize,
    dim: usize,
    k: usize,
    separation: f64,
    seed: u64,
) -> Result<(Dataset, GmmTruth)> {
    if n < k || k == 0 || dim == 0 {
        return Err(Error::Parameter(format!("need n >= k >= 1, got n={n} k={k} dim={dim}")));
    }
    if !(separation > 0.0) {
        return Err(Error::Parameter("separation must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = separation * (dim as f64).sqrt();
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut attempts = 0;
    while means.len() < k {
        attempts += 1;
        if attempts > 10_000 {
            return Err(Error::Numeric(
                "could not place component means at the requested separation".into(),
            ));
        }
        let cand: Vec<f64> = (0..dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
            .collect();
        let ok = means.iter().all(|m| {
            let d2: f64 = m.iter().zip(&cand).map(|(a, b)| (a - b) * (a - b)).sum();
            d2.sqrt() >= scale
        });
        if ok {
            means.push(cand);
        }
    }
    let mut features = Vec::with_capacity(n * dim);
    let mut responses = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..k);
        labels.push(c);
        responses.push(c as f64);
        for j in 0..dim {
            let x: f64 = rng.sample(StandardNormal);
            features.push(means[c][j] + x);
        }
    }
    Ok((
        Dataset::new(features, responses, dim)?,
        GmmTruth { labels, means },
    ))
}
