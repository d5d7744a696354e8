//! Training data, hypothesis vectors, and coreset weight vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sum::fsum;

/// An immutable labeled dataset: `n` points in `d` dimensions plus a response
/// per point. Unsupervised models simply ignore the responses.
#[derive(Clone, Debug)]
pub struct Dataset {
    features: Vec<f64>, // row-major n x d
    responses: Vec<f64>,
    n: usize,
    d: usize,
}

impl Dataset {
    /// Build from a row-major feature buffer and a response vector.
    pub fn new(features: Vec<f64>, responses: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Parameter("feature dimension must be >= 1".into()));
        }
        if features.is_empty() || features.len() % d != 0 {
            return Err(Error::DimensionMismatch(format!(
                "feature buffer of length {} is not a multiple of d={}",
                features.len(),
                d
            )));
        }
        let n = features.len() / d;
        if responses.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{} responses for {} points",
                responses.len(),
                n
            )));
        }
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite feature at row {}", i / d)));
        }
        if let Some(i) = responses.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite response at row {i}")));
        }
        Ok(Self { features, responses, n, d })
    }

    pub fn from_rows(rows: &[Vec<f64>], responses: Vec<f64>) -> Result<Self> {
        let d = rows.first().map(|r| r.len()).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * d);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != d {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            flat.extend_from_slice(r);
        }
        Self::new(flat, responses, d)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn response(&self, i: usize) -> f64 {
        self.responses[i]
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    /// Largest row norm; several smoothness bounds are built from it.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| norm(self.row(i)))
            .fold(0.0, f64::max)
    }
}

/// A point in hypothesis space. For regression and classification this is the
/// coefficient vector; for mixture models it is the flattened parameter block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Hypothesis(pub Vec<f64>);

impl Hypothesis {
    pub fn zeros(p: usize) -> Self {
        Hypothesis(vec![0.0; p])
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    /// Euclidean distance in the flattened coordinate space.
    pub fn distance(&self, other: &Hypothesis) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// How a coreset was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Layered,
    Uniform,
    Importance,
    Full,
}

/// A sparse reweighting of the dataset: nonnegative weights summing to `n`,
/// with the non-zero support tracked explicitly.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Coreset {
    weights: Vec<f64>,
    support: Vec<usize>,
    provenance: Provenance,
}

impl Coreset {
    /// The trivial coreset: every weight exactly one.
    pub fn full(n: usize) -> Self {
        Coreset {
            weights: vec![1.0; n],
            support: (0..n).collect(),
            provenance: Provenance::Full,
        }
    }

    /// Validate weights (nonnegative, finite, sum n within 1e-9 relative) and
    /// derive the support.
    pub fn from_weights(weights: Vec<f64>, provenance: Provenance) -> Result<Self> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::Parameter("empty weight vector".into()));
        }
        for (i, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::Parameter(format!("weight {w} at index {i}")));
            }
        }
        let total = fsum(&weights);
        if (total - n as f64).abs() > 1e-9 * n as f64 {
            return Err(Error::Parameter(format!(
                "weights sum to {total}, expected {n}"
            )));
        }
        let support: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
        Ok(Coreset { weights, support, provenance })
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    /// Sorted indices of the non-zero weights.
    pub fn support(&self) -> &[usize] {
        &self.support
    }

    /// Coreset size: number of non-zero entries.
    pub fn size(&self) -> usize {
        self.support.len()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn weight_sum(&self) -> f64 {
        fsum(&self.weights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dataset_rejects_bad_shapes() {
        assert!(Dataset::new(vec![1.0, 2.0, 3.0], vec![0.0], 2).is_err());
        assert!(Dataset::new(vec![1.0, 2.0], vec![0.0, 1.0], 2).is_err());
        assert!(Dataset::new(vec![f64::NAN, 2.0], vec![0.0], 2).is_err());
        assert!(Dataset::new(vec![], vec![], 1).is_err());
    }

    #[test]
    fn dataset_row_access() {
        let ds = Dataset::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![10.0, 20.0], 3).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(ds.response(0), 10.0);
    }

    #[test]
    fn coreset_weight_contract() {
        let c = Coreset::from_weights(vec![2.0, 2.0, 0.0, 0.0], Provenance::Uniform).unwrap();
        assert_eq!(c.support(), &[0, 1]);
        assert_eq!(c.size(), 2);
        assert!(Coreset::from_weights(vec![1.0, 1.0, 1.5], Provenance::Uniform).is_err());
        assert!(Coreset::from_weights(vec![-1.0, 5.0], Provenance::Uniform).is_err());
    }

    #[test]
    fn full_coreset_is_all_ones() {
        let c = Coreset::full(5);
        assert_eq!(c.weights(), &[1.0; 5]);
        assert_eq!(c.size(), 5);
        assert_eq!(c.weight_sum(), 5.0);
    }

    #[test]
    fn hypothesis_distance_is_euclidean() {
        let a = Hypothesis(vec![0.0, 3.0]);
        let b = Hypothesis(vec![4.0, 0.0]);
        assert_eq!(a.distance(&b), 5.0);
    }
}
