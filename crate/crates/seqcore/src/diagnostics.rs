//! Audits of the coreset guarantees and the benchmark metrics.
//!
//! The loss audit probes hypotheses uniformly drawn from the local ball and
//! measures the worst relative gap between the weighted and full risks; the
//! gradient audit measures the worst coordinate-wise gap between the weighted
//! and full gradients. Both are Monte-Carlo checks of the construction's
//! contract, not proofs.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coreset::LayerPartition;
use crate::data::{Coreset, Dataset, Hypothesis};
use crate::error::{Error, Result};
use crate::model::LossModel;
use crate::risk::{full_gradient, full_risk, weighted_gradient, weighted_risk};
use crate::seeds::derive;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeRecord {
    /// Distance of the probe from the anchor.
    pub distance: f64,
    /// The deviation measured at this probe (relative for loss audits,
    /// absolute per-coordinate for gradient audits).
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditReport {
    pub samples_tested: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rel_loss_dev: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_grad_dev: Option<f64>,
    pub pass: bool,
    pub per_sample: Vec<ProbeRecord>,
}

/// Uniform draw from the ball around `anchor`: Gaussian direction, radius
/// scaled by U^(1/dim).
pub fn sample_in_ball(anchor: &[f64], radius: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let p = anchor.len();
    let dir: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let norm = crate::data::norm(&dir);
    if norm == 0.0 || radius == 0.0 {
        return anchor.to_vec();
    }
    let u: f64 = rng.random::<f64>();
    let r = radius * u.powf(1.0 / p as f64);
    anchor
        .iter()
        .zip(&dir)
        .map(|(a, d)| a + r * d / norm)
        .collect()
}

/// Check the relative-loss guarantee over `n_probes` in-ball hypotheses.
/// Probes where the full risk is zero fall back to an absolute comparison
/// against `eps * F(anchor)`.
#[allow(clippy::too_many_arguments)]
pub fn audit_coreset_loss<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    anchor: &Hypothesis,
    radius: f64,
    eps: f64,
    n_probes: usize,
    seed: u64,
) -> Result<AuditReport> {
    if n_probes == 0 {
        return Err(Error::Parameter("need at least one probe".into()));
    }
    let anchor_risk = full_risk(data, model, anchor.coords())?;
    let samples = if radius == 0.0 { 1 } else { n_probes };
    let mut per_sample = Vec::with_capacity(samples);
    let mut max_dev = 0.0f64;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "loss-probe", i as u64));
        let probe = sample_in_ball(anchor.coords(), radius, &mut rng);
        let full = full_risk(data, model, &probe)?;
        let weighted = weighted_risk(data, model, coreset, &probe)?;
        let gap = (weighted - full).abs();
        let deviation = if full > 0.0 {
            gap / full
        } else if anchor_risk > 0.0 {
            gap / anchor_risk
        } else {
            // Degenerate instance: zero risk everywhere, any gap is absolute.
            gap
        };
        max_dev = max_dev.max(deviation);
        per_sample.push(ProbeRecord {
            distance: crate::data::norm(
                &probe
                    .iter()
                    .zip(anchor.coords())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            ),
            deviation,
        });
    }
    Ok(AuditReport {
        samples_tested: samples,
        max_rel_loss_dev: Some(max_dev),
        max_abs_grad_dev: None,
        pass: max_dev <= eps,
        per_sample,
    })
}

/// Check the coordinate-wise gradient guarantee over in-ball probes.
#[allow(clippy::too_many_arguments)]
pub fn audit_gradient<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    anchor: &Hypothesis,
    radius: f64,
    sigma_grad: f64,
    n_probes: usize,
    seed: u64,
) -> Result<AuditReport> {
    if n_probes == 0 {
        return Err(Error::Parameter("need at least one probe".into()));
    }
    let samples = if radius == 0.0 { 1 } else { n_probes };
    let mut per_sample = Vec::with_capacity(samples);
    let mut max_dev = 0.0f64;
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "grad-probe", i as u64));
        let probe = sample_in_ball(anchor.coords(), radius, &mut rng);
        let full = full_gradient(data, model, &probe)?;
        let weighted = weighted_gradient(data, model, coreset, &probe)?;
        // The guarantee is per coordinate, not in norm.
        let deviation = full
            .iter()
            .zip(&weighted)
            .map(|(f, w)| (f - w).abs())
            .fold(0.0f64, f64::max);
        max_dev = max_dev.max(deviation);
        per_sample.push(ProbeRecord {
            distance: crate::data::norm(
                &probe
                    .iter()
                    .zip(anchor.coords())
                    .map(|(a, b)| a - b)
                    .collect::<Vec<_>>(),
            ),
            deviation,
        });
    }
    Ok(AuditReport {
        samples_tested: samples,
        max_rel_loss_dev: None,
        max_abs_grad_dev: Some(max_dev),
        pass: max_dev <= sigma_grad,
        per_sample,
    })
}

/// Normalized hypothesis error against a reference: `||b - b*|| / ||b*||`.
pub fn error_beta(beta: &Hypothesis, reference: &Hypothesis) -> Result<f64> {
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::UndefinedReference);
    }
    Ok(beta.distance(reference) / denom)
}

/// Majority-label purity of a clustering against ground truth.
pub fn purity(assignments: &[usize], ground_truth: &[usize]) -> Result<f64> {
    if assignments.len() != ground_truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} assignments vs {} labels",
            assignments.len(),
            ground_truth.len()
        )));
    }
    if assignments.is_empty() {
        return Err(Error::Parameter("empty label vectors".into()));
    }
    use std::collections::HashMap;
    let mut counts: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
    for (&a, &t) in assignments.iter().zip(ground_truth) {
        *counts.entry(a).or_default().entry(t).or_default() += 1;
    }
    let matched: usize = counts
        .values()
        .map(|labels| labels.values().copied().max().unwrap_or(0))
        .sum();
    Ok(matched as f64 / assignments.len() as f64)
}

/// Exact integer check of the layer-mass inequality: sum_j |P_j| 2^j <= 3 n.
pub fn check_claim1(partition: &LayerPartition) -> bool {
    let weighted: u128 = partition
        .layer_sizes()
        .iter()
        .enumerate()
        .map(|(j, &s)| (s as u128) << j)
        .sum();
    weighted <= 3 * partition.n() as u128
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coreset::partition_layers;
    use crate::data::Provenance;
    use crate::models::{Model, RidgeModel};

    fn instance(n: usize, seed: u64) -> (Dataset, Model) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        (
            Dataset::from_rows(&rows, ys).unwrap(),
            Model::Ridge(RidgeModel::new(0.01)),
        )
    }

    #[test]
    fn full_weight_coreset_audits_at_zero() {
        let (ds, model) = instance(60, 1);
        let full = Coreset::full(60);
        let anchor = Hypothesis(vec![0.5, -0.5, 0.25]);
        let loss = audit_coreset_loss(&ds, &model, &full, &anchor, 0.5, 0.1, 20, 9).unwrap();
        assert!(loss.pass);
        assert!(loss.max_rel_loss_dev.unwrap() <= 1e-12);
        let grad = audit_gradient(&ds, &model, &full, &anchor, 0.5, 0.1, 20, 9).unwrap();
        assert!(grad.pass);
        assert!(grad.max_abs_grad_dev.unwrap() <= 1e-12);
    }

    #[test]
    fn zero_radius_probes_once_at_the_anchor() {
        let (ds, model) = instance(30, 2);
        let full = Coreset::full(30);
        let anchor = Hypothesis(vec![0.1, 0.2, 0.3]);
        let report = audit_coreset_loss(&ds, &model, &full, &anchor, 0.0, 0.5, 50, 3).unwrap();
        assert_eq!(report.samples_tested, 1);
        assert_eq!(report.per_sample[0].distance, 0.0);
    }

    #[test]
    fn point_mass_gradient_deviation_is_half_the_gap() {
        // Two points with opposite gradients at beta=0: +-2. Point mass on one
        // of them deviates from the zero mean by 2 = half the gap of 4.
        let ds = Dataset::new(vec![1.0, 1.0], vec![1.0, -1.0], 1).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.0));
        let mass = Coreset::from_weights(vec![2.0, 0.0], Provenance::Uniform).unwrap();
        let anchor = Hypothesis(vec![0.0]);
        let report = audit_gradient(&ds, &model, &mass, &anchor, 0.0, 10.0, 1, 1).unwrap();
        assert!((report.max_abs_grad_dev.unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn error_beta_hand_values() {
        let star = Hypothesis(vec![3.0, 4.0]);
        assert_eq!(error_beta(&star, &star).unwrap(), 0.0);
        let double = Hypothesis(vec![6.0, 8.0]);
        assert_eq!(error_beta(&double, &star).unwrap(), 1.0);
        let zero = Hypothesis(vec![0.0, 0.0]);
        assert_eq!(error_beta(&zero, &star).unwrap(), 1.0);
        assert!(error_beta(&star, &zero).is_err());
    }

    #[test]
    fn error_beta_is_scale_covariant() {
        let beta = Hypothesis(vec![1.0, 2.0]);
        let star = Hypothesis(vec![-0.5, 1.5]);
        let base = error_beta(&beta, &star).unwrap();
        for c in [2.0, -3.0, 0.25] {
            let cb = Hypothesis(beta.coords().iter().map(|v| c * v).collect());
            let cs = Hypothesis(star.coords().iter().map(|v| c * v).collect());
            let scaled = error_beta(&cb, &cs).unwrap();
            assert!((scaled - base).abs() < 1e-12);
        }
    }

    #[test]
    fn purity_hand_values() {
        let truth = vec![0, 0, 1, 1];
        assert_eq!(purity(&truth, &truth).unwrap(), 1.0);
        // One cluster over two equal-size labels.
        assert_eq!(purity(&[0, 0, 0, 0], &truth).unwrap(), 0.5);
        // Relabeling the clusters changes nothing.
        let relabeled = vec![7, 7, 3, 3];
        assert_eq!(purity(&relabeled, &truth).unwrap(), 1.0);
        assert!(purity(&[0], &truth).is_err());
    }

    #[test]
    fn claim_inequality_hand_case_and_random_sweep() {
        let (ds, model) = instance(4, 3);
        let anchor = Hypothesis(vec![0.2, 0.1, -0.3]);
        let p = partition_layers(&ds, &model, anchor.coords()).unwrap();
        assert!(check_claim1(&p));
        for seed in 0..50 {
            let (ds, model) = instance(100 + (seed as usize * 13) % 400, seed + 10);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let anchor: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            if let Ok(p) = partition_layers(&ds, &model, &anchor) {
                assert!(check_claim1(&p), "seed {seed}");
            }
        }
    }
}
