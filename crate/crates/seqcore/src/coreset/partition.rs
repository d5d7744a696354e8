//! Loss-layer partition at an anchor hypothesis.
//!
//! With `H` the empirical risk at the anchor and `N = ceil(log2 n)`, the
//! dataset splits into `N + 1` disjoint layers: layer 0 holds points with
//! anchor loss at most `H`, layer `j >= 1` holds losses in
//! `(2^(j-1) H, 2^j H]`. Every point lands in some layer because no loss can
//! exceed `n * H <= 2^N * H` (the anchor risk is accumulated with correctly
//! rounded summation, which keeps this bound exact in floating point).

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::LossModel;
use crate::risk::pointwise_losses;
use crate::sum::fsum;

#[derive(Clone, Debug)]
pub struct LayerPartition {
    h: f64,
    thresholds: Vec<f64>, // 2^j * H for j = 0..=N
    layers: Vec<Vec<usize>>,
    anchor_losses: Vec<f64>,
}

impl LayerPartition {
    /// Anchor risk H = F(anchor).
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn n(&self) -> usize {
        self.anchor_losses.len()
    }

    /// N + 1, the layer count.
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.len()).collect()
    }

    pub fn anchor_losses(&self) -> &[f64] {
        &self.anchor_losses
    }

    /// Upper loss threshold of layer `j` (inclusive).
    pub fn threshold(&self, j: usize) -> f64 {
        self.thresholds[j]
    }

    pub fn non_empty_layers(&self) -> usize {
        self.layers.iter().filter(|l| !l.is_empty()).count()
    }
}

/// One sweep over the data at the anchor: per-point losses, the anchor risk,
/// and the layer assignment.
pub fn partition_layers<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    anchor: &[f64],
) -> Result<LayerPartition> {
    let losses = pointwise_losses(data, model, anchor)?;
    if let Some(i) = losses.iter().position(|&f| f < 0.0) {
        return Err(Error::Numeric(format!(
            "negative loss {} at index {i}; the loss contract requires nonnegative values",
            losses[i]
        )));
    }
    let n = data.n();
    let h = fsum(&losses) / n as f64;
    if h <= 0.0 {
        return Err(Error::DegenerateAnchor);
    }
    let num_layers = ceil_log2(n) + 1;
    // Scaling by a power of two is exact, so threshold comparisons reproduce
    // the layer predicate with no rounding slop.
    let thresholds: Vec<f64> = (0..num_layers).map(|j| (1u64 << j) as f64 * h).collect();
    let mut layers: Vec<Vec<usize>> = vec![Vec::new(); num_layers];
    for (i, &f) in losses.iter().enumerate() {
        let j = thresholds.partition_point(|&t| f > t);
        debug_assert!(j < num_layers, "loss {f} above top threshold");
        layers[j.min(num_layers - 1)].push(i);
    }
    Ok(LayerPartition { h, thresholds, layers, anchor_losses: losses })
}

/// Smallest N with 2^N >= n.
pub fn ceil_log2(n: usize) -> usize {
    debug_assert!(n >= 1);
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Dataset;
    use crate::models::{Model, RidgeModel};

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(4), 2);
        assert_eq!(ceil_log2(5), 3);
        assert_eq!(ceil_log2(1024), 10);
        assert_eq!(ceil_log2(1025), 11);
    }

    // Losses (1, 1, 3, 9) at beta=1 with y=0, lambda=0: x = (1, 1, sqrt3, 3).
    fn hand_instance() -> (Dataset, Model) {
        let xs = vec![1.0, 1.0, 3.0f64.sqrt(), 3.0];
        let ds = Dataset::new(xs, vec![0.0; 4], 1).unwrap();
        (ds, Model::Ridge(RidgeModel::new(0.0)))
    }

    #[test]
    fn hand_partition() {
        let (ds, model) = hand_instance();
        let p = partition_layers(&ds, &model, &[1.0]).unwrap();
        assert!((p.h() - 3.5).abs() < 1e-12);
        assert_eq!(p.num_layers(), 3); // N = ceil(log2 4) = 2
        assert_eq!(p.layers()[0], vec![0, 1, 2]); // 1, 1, 3 <= 3.5
        assert!(p.layers()[1].is_empty()); // (3.5, 7] empty
        assert_eq!(p.layers()[2], vec![3]); // 9 in (7, 14]
        // Claim check by hand: 3*1 + 0*2 + 1*4 = 7 <= 12.
        let weighted: usize = p
            .layer_sizes()
            .iter()
            .enumerate()
            .map(|(j, &s)| s << j)
            .sum();
        assert!(weighted <= 3 * ds.n());
    }

    #[test]
    fn equal_losses_collapse_to_layer_zero() {
        let ds = Dataset::new(vec![2.0, 2.0, 2.0], vec![0.0; 3], 1).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.0));
        let p = partition_layers(&ds, &model, &[1.0]).unwrap();
        assert_eq!(p.layers()[0].len(), 3);
        assert!(p.layers()[1..].iter().all(|l| l.is_empty()));
    }

    #[test]
    fn zero_anchor_risk_is_degenerate() {
        let ds = Dataset::new(vec![1.0, 2.0], vec![2.0, 4.0], 1).unwrap();
        let model = Model::Ridge(RidgeModel::new(0.0));
        // beta = 2 fits both points exactly.
        match partition_layers(&ds, &model, &[2.0]) {
            Err(Error::DegenerateAnchor) => {}
            other => panic!("expected degenerate anchor, got {other:?}"),
        }
    }
}
