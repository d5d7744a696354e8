//! Drawing coresets: layered sampling plus the uniform and importance
//! baselines.

use rand::prelude::*;
use rand::distr::weighted::WeightedIndex;
use rand_chacha::ChaCha8Rng;

use crate::coreset::partition::LayerPartition;
use crate::coreset::plan::SizePlan;
use crate::data::{Coreset, Dataset, Provenance};
use crate::error::{Error, Result};
use crate::models::Model;
use crate::optim::{run_host, HostConfig};
use crate::risk::pointwise_losses;
use crate::seeds::derive;
use crate::sum::fsum;

/// Sample the planned count from each non-empty layer, uniformly without
/// replacement, and weight every sampled point by
/// `layer population / sample count`. Each layer draws from its own stream
/// (`seed ^ layer index`), so the result does not depend on scheduling.
pub fn build_local_coreset(
    partition: &LayerPartition,
    plan: &SizePlan,
    seed: u64,
) -> Result<Coreset> {
    if plan.per_layer.len() != partition.num_layers() {
        return Err(Error::Parameter(format!(
            "plan covers {} layers, partition has {}",
            plan.per_layer.len(),
            partition.num_layers()
        )));
    }
    let n = partition.n();
    let mut weights = vec![0.0; n];
    for (j, layer) in partition.layers().iter().enumerate() {
        let q = plan.per_layer[j];
        if layer.is_empty() {
            if q > 0 {
                return Err(Error::Parameter(format!("plan assigns {q} draws to empty layer {j}")));
            }
            continue;
        }
        if q == 0 || q > layer.len() {
            return Err(Error::Parameter(format!(
                "plan assigns {q} draws to layer {j} of {} points",
                layer.len()
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ j as u64);
        let w = layer.len() as f64 / q as f64;
        if q == layer.len() {
            for &i in layer {
                weights[i] = w;
            }
        } else {
            for pos in rand::seq::index::sample(&mut rng, layer.len(), q) {
                weights[layer[pos]] = w;
            }
        }
    }
    Coreset::from_weights(weights, Provenance::Layered)
}

/// Plain uniform subsample without replacement, every weight `n / size`.
pub fn uniform_baseline(n: usize, size: usize, seed: u64) -> Result<Coreset> {
    if size == 0 || size > n {
        return Err(Error::Parameter(format!("size {size} outside 1..={n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = n as f64 / size as f64;
    let mut weights = vec![0.0; n];
    if size == n {
        weights.fill(1.0);
    } else {
        for i in rand::seq::index::sample(&mut rng, n, size) {
            weights[i] = w;
        }
    }
    Coreset::from_weights(weights, Provenance::Uniform)
}

/// Loss-proportional importance sampling with a uniform mixing floor.
///
/// A pilot hypothesis is fit on a small uniform subsample; points are then
/// drawn with replacement with probability proportional to
/// `loss_at_pilot + mean(loss_at_pilot)` and inverse-probability weighted,
/// duplicates accumulating. Falls back to uniform sampling when every pilot
/// loss is zero.
pub fn importance_baseline(
    data: &Dataset,
    model: &Model,
    size: usize,
    seed: u64,
) -> Result<Coreset> {
    let n = data.n();
    if size == 0 || size > n {
        return Err(Error::Parameter(format!("size {size} outside 1..={n}")));
    }
    let pilot_size = (size / 2).clamp(100.min(n), n);
    let pilot_coreset = uniform_baseline(n, pilot_size, derive(seed, "pilot-sample", 0))?;
    let beta0 =
        crate::models::default_init(model, data, Some(&pilot_coreset), derive(seed, "pilot-init", 0))?;
    let mut cfg = HostConfig::default();
    cfg.max_iters = 100;
    let pilot = run_host(data, model, &pilot_coreset, &beta0, &cfg, None, 0)
        .map(|o| o.beta)
        .unwrap_or(beta0);

    let scores = pointwise_losses(data, model, pilot.coords())?;
    let total = fsum(&scores);
    if !(total > 0.0) {
        return uniform_baseline(n, size, derive(seed, "uniform-fallback", 0));
    }
    let mean = total / n as f64;
    let probs: Vec<f64> = scores.iter().map(|&s| s + mean).collect();
    let prob_total = fsum(&probs);

    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "importance-draw", 0));
    let dist = WeightedIndex::new(&probs)
        .map_err(|e| Error::Numeric(format!("importance weights: {e}")))?;
    let mut counts = vec![0u32; n];
    for _ in 0..size {
        counts[dist.sample(&mut rng)] += 1;
    }
    let mut weights: Vec<f64> = (0..n)
        .map(|i| {
            if counts[i] == 0 {
                0.0
            } else {
                counts[i] as f64 * prob_total / (size as f64 * probs[i])
            }
        })
        .collect();
    let raw_sum = fsum(&weights);
    let scale = n as f64 / raw_sum;
    for w in weights.iter_mut() {
        *w *= scale;
    }
    Coreset::from_weights(weights, Provenance::Importance)
}

/// Partition, plan, and draw in one call; the usual entry point for solvers.
/// A zero anchor risk means the anchor already fits every point, so the exact
/// full-weight coreset is returned.
pub fn local_coreset_at<F>(
    data: &Dataset,
    model: &Model,
    anchor: &[f64],
    make_plan: F,
    seed: u64,
) -> Result<Coreset>
where
    F: FnOnce(&LayerPartition) -> Result<SizePlan>,
{
    match crate::coreset::partition_layers(data, model.as_loss_model(), anchor) {
        Ok(partition) => {
            let plan = make_plan(&partition)?;
            build_local_coreset(&partition, &plan, seed)
        }
        Err(Error::DegenerateAnchor) => Ok(Coreset::full(data.n())),
        Err(e) => Err(e),
    }
}
