//! Concrete loss models: ridge, lasso (lp-penalized), logistic, and GMM.

mod gmm;
mod lasso;
mod logistic;
mod ridge;

pub use gmm::{assignments, kpp_init, log_sum_exp, GmmModel, GmmParams, PreparedGmm};
pub use lasso::LassoModel;
pub use logistic::LogisticModel;
pub use ridge::RidgeModel;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::model::{LossModel, LpPenalty};

/// Closed set of built-in models, used wherever a solver or harness needs to
/// dispatch on the concrete kind (host selection, initialization, metrics).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Ridge(RidgeModel),
    Lasso(LassoModel),
    Logistic(LogisticModel),
    Gmm(GmmModel),
}

impl Model {
    pub fn is_unsupervised(&self) -> bool {
        matches!(self, Model::Gmm(_))
    }

    pub fn as_loss_model(&self) -> &dyn LossModel {
        match self {
            Model::Ridge(m) => m,
            Model::Lasso(m) => m,
            Model::Logistic(m) => m,
            Model::Gmm(m) => m,
        }
    }

    /// Model-specific data requirements (binary responses for logistic,
    /// matching dimension for mixtures).
    pub fn validate_data(&self, data: &crate::data::Dataset) -> crate::error::Result<()> {
        match self {
            Model::Logistic(_) => {
                for i in 0..data.n() {
                    let y = data.response(i);
                    if y != 0.0 && y != 1.0 {
                        return Err(crate::error::Error::Parameter(format!(
                            "logistic responses must be 0 or 1, found {y} at row {i}"
                        )));
                    }
                }
                Ok(())
            }
            Model::Gmm(g) => {
                if g.dim != data.dim() {
                    return Err(crate::error::Error::DimensionMismatch(format!(
                        "mixture dimension {} vs data dimension {}",
                        g.dim,
                        data.dim()
                    )));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Starting hypothesis for a solve: the origin for the regression and
/// classification models, distance-spread seeding for mixtures. When a
/// coreset is given, mixture seeding draws from its support with its weights.
pub fn default_init(
    model: &Model,
    data: &crate::data::Dataset,
    coreset: Option<&crate::data::Coreset>,
    seed: u64,
) -> crate::error::Result<crate::data::Hypothesis> {
    match model {
        Model::Gmm(g) => {
            let beta = match coreset {
                Some(c) => {
                    let rows: Vec<usize> = c.support().to_vec();
                    kpp_init_on(g, data, &rows, |i| c.weight(i), seed)
                }
                None => kpp_init(g, data, None, seed),
            }?;
            Ok(crate::data::Hypothesis(beta))
        }
        _ => Ok(crate::data::Hypothesis::zeros(
            model.param_dim(data.dim()),
        )),
    }
}

// Seeding restricted to an index subset (a coreset support).
fn kpp_init_on(
    g: &GmmModel,
    data: &crate::data::Dataset,
    rows: &[usize],
    weight: impl Fn(usize) -> f64,
    seed: u64,
) -> crate::error::Result<Vec<f64>> {
    let sub_rows: Vec<Vec<f64>> = rows.iter().map(|&i| data.row(i).to_vec()).collect();
    let responses = vec![0.0; rows.len()];
    let sub = crate::data::Dataset::from_rows(&sub_rows, responses)?;
    let w: Vec<f64> = rows.iter().map(|&i| weight(i)).collect();
    kpp_init(g, &sub, Some(&w), seed)
}

macro_rules! delegate {
    ($self:ident, $m:ident => $body:expr) => {
        match $self {
            Model::Ridge($m) => $body,
            Model::Lasso($m) => $body,
            Model::Logistic($m) => $body,
            Model::Gmm($m) => $body,
        }
    };
}

impl LossModel for Model {
    fn param_dim(&self, data_dim: usize) -> usize {
        delegate!(self, m => m.param_dim(data_dim))
    }

    fn loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64 {
        delegate!(self, m => m.loss(beta, x, y))
    }

    fn grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        delegate!(self, m => m.grad(beta, x, y, out))
    }

    fn smooth_loss(&self, beta: &[f64], x: &[f64], y: f64) -> f64 {
        delegate!(self, m => m.smooth_loss(beta, x, y))
    }

    fn smooth_grad(&self, beta: &[f64], x: &[f64], y: f64, out: &mut [f64]) {
        delegate!(self, m => m.smooth_grad(beta, x, y, out))
    }

    fn penalty(&self) -> Option<LpPenalty> {
        delegate!(self, m => m.penalty())
    }

    fn lipschitz_bound(&self, data: &Dataset, anchor: &[f64]) -> f64 {
        delegate!(self, m => m.lipschitz_bound(data, anchor))
    }

    fn losses_into(&self, beta: &[f64], data: &Dataset, idx: &[usize], out: &mut [f64]) {
        delegate!(self, m => m.losses_into(beta, data, idx, out))
    }

    fn grad_sum_into(
        &self,
        beta: &[f64],
        data: &Dataset,
        idx: &[usize],
        weights: Option<&[f64]>,
        acc: &mut [f64],
    ) {
        delegate!(self, m => m.grad_sum_into(beta, data, idx, weights, acc))
    }

    fn smooth_grad_sum_into(
        &self,
        beta: &[f64],
        data: &Dataset,
        idx: &[usize],
        weights: Option<&[f64]>,
        acc: &mut [f64],
    ) {
        delegate!(self, m => m.smooth_grad_sum_into(beta, data, idx, weights, acc))
    }
}
