//! Host solvers: the iterative algorithms that run on a (possibly weighted)
//! objective inside each local region. All steppers are deterministic given
//! `(beta, coreset, config)` and hold no hidden state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{norm, Coreset, Dataset, Hypothesis};
use crate::error::{Error, Result};
use crate::model::LossModel;
use crate::models::{GmmModel, GmmParams, Model, PreparedGmm};
use crate::risk::{
    weighted_gradient, weighted_risk, weighted_smooth_gradient, weighted_smooth_risk,
};

const ARMIJO_C: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Fixed learning rate or Armijo backtracking from step one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSize {
    Fixed(f64),
    Backtracking,
}

impl Serialize for StepSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSize::Fixed(v) => s.serialize_f64(*v),
            StepSize::Backtracking => s.serialize_str("backtracking"),
        }
    }
}

impl<'de> Deserialize<'de> for StepSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(StepSize::Fixed(v)),
            Raw::Name(s) if s == "backtracking" => Ok(StepSize::Backtracking),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "unknown step size {s:?}; use a number or \"backtracking\""
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct HostConfig {
    pub step_size: StepSize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub rel_loss_tol: f64,
}

impl Default for HostConfig {
    fn default() -> Self {
        HostConfig {
            step_size: StepSize::Backtracking,
            max_iters: 500,
            grad_tol: 1e-6,
            rel_loss_tol: 1e-9,
        }
    }
}

impl HostConfig {
    pub fn validate(&self) -> Result<()> {
        if let StepSize::Fixed(h) = self.step_size {
            if !(h > 0.0) {
                return Err(Error::Parameter(format!("fixed step size {h} must be positive")));
            }
        }
        if !(self.grad_tol > 0.0 && self.rel_loss_tol > 0.0) {
            return Err(Error::Parameter("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of one host step.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub beta_next: Hypothesis,
    pub loss_next: f64,
    pub grad_norm: f64,
    pub stable: bool,
    /// An EM component collapsed and was re-seeded this step.
    pub reseeded: bool,
}

/// Hard constraint keeping iterates inside the coreset's validity region.
#[derive(Clone, Copy, Debug)]
pub struct BallConstraint<'a> {
    pub center: &'a [f64],
    pub radius: f64,
}

impl BallConstraint<'_> {
    fn contains(&self, beta: &[f64]) -> bool {
        dist(beta, self.center) <= self.radius
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Extra per-step inputs owned by the surrounding loop.
#[derive(Clone, Copy, Debug, Default)]
pub struct StepContext<'a> {
    /// Global iteration index (drives diminishing subgradient steps).
    pub iter: usize,
    /// Keep the next iterate inside this ball, shrinking the step if needed.
    pub ball: Option<BallConstraint<'a>>,
    /// Objective value at `beta` when the caller already knows it.
    pub entry_loss: Option<f64>,
}

fn relative_change(next: f64, entry: f64) -> f64 {
    (next - entry).abs() / entry.abs().max(1e-300)
}

fn axpy(beta: &[f64], step: f64, dir: &[f64]) -> Vec<f64> {
    beta.iter().zip(dir).map(|(b, g)| b - step * g).collect()
}

/// One gradient-descent step on the weighted objective. With backtracking the
/// step is halved until the Armijo decrease holds; a ball constraint shrinks
/// it further until the iterate stays inside.
pub fn gd_step<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    beta: &Hypothesis,
    cfg: &HostConfig,
    ctx: StepContext,
) -> Result<StepOutcome> {
    let entry = match ctx.entry_loss {
        Some(l) => l,
        None => weighted_risk(data, model, coreset, beta.coords())?,
    };
    let g = weighted_gradient(data, model, coreset, beta.coords())?;
    let gnorm = norm(&g);
    if gnorm <= cfg.grad_tol {
        return Ok(StepOutcome {
            beta_next: beta.clone(),
            loss_next: entry,
            grad_norm: gnorm,
            stable: true,
            reseeded: false,
        });
    }
    let mut eta = match cfg.step_size {
        StepSize::Fixed(h) => h,
        StepSize::Backtracking => 1.0,
    };
    let mut accepted: Option<(Vec<f64>, f64)> = None;
    for _ in 0..MAX_HALVINGS {
        let cand = axpy(beta.coords(), eta, &g);
        if let Some(ball) = &ctx.ball {
            if !ball.contains(&cand) {
                eta *= 0.5;
                continue;
            }
        }
        let cand_loss = weighted_risk(data, model, coreset, &cand)?;
        match cfg.step_size {
            StepSize::Backtracking => {
                if cand_loss <= entry - ARMIJO_C * eta * gnorm * gnorm {
                    accepted = Some((cand, cand_loss));
                    break;
                }
                eta *= 0.5;
            }
            StepSize::Fixed(_) => {
                accepted = Some((cand, cand_loss));
                break;
            }
        }
    }
    let (next, loss_next) = match accepted {
        Some(v) => v,
        // No acceptable step at any scale: the iterate is as good as
        // stationary for this objective.
        None => {
            return Ok(StepOutcome {
                beta_next: beta.clone(),
                loss_next: entry,
                grad_norm: gnorm,
                stable: true,
                reseeded: false,
            })
        }
    };
    if !loss_next.is_finite() {
        return Err(Error::Numeric(format!("non-finite objective {loss_next} after step")));
    }
    let stable = gnorm <= cfg.grad_tol || relative_change(loss_next, entry) <= cfg.rel_loss_tol;
    Ok(StepOutcome {
        beta_next: Hypothesis(next),
        loss_next,
        grad_norm: gnorm,
        stable,
        reseeded: false,
    })
}

fn soft_threshold(v: f64, t: f64) -> f64 {
    v.signum() * (v.abs() - t).max(0.0)
}

/// One proximal-gradient (ISTA) step: gradient step on the smooth part, then
/// coordinatewise soft-thresholding at `eta * lambda`. Models with a
/// non-l1 penalty route to the subgradient step.
pub fn prox_step<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    beta: &Hypothesis,
    cfg: &HostConfig,
    ctx: StepContext,
) -> Result<StepOutcome> {
    let pen = model.penalty();
    let lambda = match pen {
        Some(p) if p.p == 1.0 => p.lambda,
        None => 0.0,
        Some(_) => return subgradient_step(data, model, coreset, beta, cfg, ctx),
    };
    let entry_smooth = weighted_smooth_risk(data, model, coreset, beta.coords())?;
    let entry_full = match ctx.entry_loss {
        Some(l) => l,
        None => entry_smooth + pen.map(|p| p.value(beta.coords())).unwrap_or(0.0),
    };
    let g = weighted_smooth_gradient(data, model, coreset, beta.coords())?;
    let mut eta = match cfg.step_size {
        StepSize::Fixed(h) => h,
        StepSize::Backtracking => 1.0,
    };
    let mut accepted: Option<(Vec<f64>, f64)> = None;
    for _ in 0..MAX_HALVINGS {
        let cand: Vec<f64> = beta
            .coords()
            .iter()
            .zip(&g)
            .map(|(b, gi)| soft_threshold(b - eta * gi, eta * lambda))
            .collect();
        if let Some(ball) = &ctx.ball {
            if !ball.contains(&cand) {
                eta *= 0.5;
                continue;
            }
        }
        match cfg.step_size {
            StepSize::Backtracking => {
                // Quadratic upper-bound check on the smooth part.
                let cand_smooth = weighted_smooth_risk(data, model, coreset, &cand)?;
                let dcand: f64 = cand
                    .iter()
                    .zip(beta.coords())
                    .zip(&g)
                    .map(|((c, b), gi)| (c - b) * gi)
                    .sum();
                let sq: f64 = cand
                    .iter()
                    .zip(beta.coords())
                    .map(|(c, b)| (c - b) * (c - b))
                    .sum();
                if cand_smooth <= entry_smooth + dcand + sq / (2.0 * eta) {
                    accepted = Some((cand, eta));
                    break;
                }
                eta *= 0.5;
            }
            StepSize::Fixed(_) => {
                accepted = Some((cand, eta));
                break;
            }
        }
    }
    let (next, used_eta) = match accepted {
        Some(v) => v,
        None => {
            return Ok(StepOutcome {
                beta_next: beta.clone(),
                loss_next: entry_full,
                grad_norm: 0.0,
                stable: true,
                reseeded: false,
            })
        }
    };
    let loss_next = weighted_risk(data, model, coreset, &next)?;
    // Gradient-mapping norm: step displacement over the step size.
    let map_norm = dist(&next, beta.coords()) / used_eta;
    let stable =
        map_norm <= cfg.grad_tol || relative_change(loss_next, entry_full) <= cfg.rel_loss_tol;
    Ok(StepOutcome {
        beta_next: Hypothesis(next),
        loss_next,
        grad_norm: map_norm,
        stable,
        reseeded: false,
    })
}

/// One subgradient step with a diminishing rate `eta / sqrt(iter + 1)`.
pub fn subgradient_step<M: LossModel + ?Sized + Sync>(
    data: &Dataset,
    model: &M,
    coreset: &Coreset,
    beta: &Hypothesis,
    cfg: &HostConfig,
    ctx: StepContext,
) -> Result<StepOutcome> {
    let entry = match ctx.entry_loss {
        Some(l) => l,
        None => weighted_risk(data, model, coreset, beta.coords())?,
    };
    let mut g = weighted_smooth_gradient(data, model, coreset, beta.coords())?;
    if let Some(pen) = model.penalty() {
        pen.add_subgradient(beta.coords(), &mut g);
    }
    let gnorm = norm(&g);
    if gnorm <= cfg.grad_tol {
        return Ok(StepOutcome {
            beta_next: beta.clone(),
            loss_next: entry,
            grad_norm: gnorm,
            stable: true,
            reseeded: false,
        });
    }
    let base = match cfg.step_size {
        StepSize::Fixed(h) => h,
        StepSize::Backtracking => 1.0,
    };
    let mut eta = base / ((ctx.iter + 1) as f64).sqrt();
    let mut next = None;
    for _ in 0..MAX_HALVINGS {
        let cand = axpy(beta.coords(), eta, &g);
        match &ctx.ball {
            Some(ball) if !ball.contains(&cand) => eta *= 0.5,
            _ => {
                next = Some(cand);
                break;
            }
        }
    }
    let next = match next {
        Some(v) => v,
        None => beta.coords().to_vec(),
    };
    let loss_next = weighted_risk(data, model, coreset, &next)?;
    let stable = relative_change(loss_next, entry) <= cfg.rel_loss_tol;
    Ok(StepOutcome {
        beta_next: Hypothesis(next),
        loss_next,
        grad_norm: gnorm,
        stable,
        reseeded: false,
    })
}

/// One weighted EM step for a Gaussian mixture: responsibilities from the
/// current parameters (coreset weights as point multiplicities), then the
/// weighted moment updates with covariance eigenvalues clamped into
/// `[eig_floor, 1/eig_floor]`. A component whose effective mass drops below
/// 1e-12 is re-seeded at the worst-fit support point.
pub fn em_step(
    data: &Dataset,
    model: &GmmModel,
    coreset: &Coreset,
    beta: &Hypothesis,
    cfg: &HostConfig,
    ctx: StepContext,
) -> Result<StepOutcome> {
    let k = model.k;
    let d = model.dim;
    let prepared = PreparedGmm::new(model, beta.coords())?;
    let entry = match ctx.entry_loss {
        Some(l) => l,
        None => weighted_risk(data, model, coreset, beta.coords())?,
    };

    let support = coreset.support();
    let mut gamma = vec![0.0; k];
    let mut mass = vec![0.0; k];
    let mut mean_acc = vec![DVector::<f64>::zeros(d); k];
    let mut total_w = 0.0;
    let mut worst: (f64, usize) = (f64::NEG_INFINITY, support[0]);
    // Two passes over the support: means first, then scatter around the new
    // means.
    let mut resp = vec![0.0; support.len() * k];
    for (s, &i) in support.iter().enumerate() {
        let w = coreset.weight(i);
        let x = data.row(i);
        let log_mix = prepared.log_mix(x, Some(&mut gamma));
        let loss_i = -log_mix;
        if loss_i > worst.0 {
            worst = (loss_i, i);
        }
        total_w += w;
        for j in 0..k {
            let wg = w * gamma[j];
            resp[s * k + j] = wg;
            mass[j] += wg;
            let xv = DVector::from_column_slice(x);
            mean_acc[j] += xv * wg;
        }
    }

    let mut params = GmmParams {
        weights: vec![0.0; k],
        means: Vec::with_capacity(k),
        precisions: Vec::with_capacity(k),
    };
    let mut reseeded = false;
    let mut collapsed = vec![false; k];
    for j in 0..k {
        if mass[j] < 1e-12 {
            collapsed[j] = true;
            reseeded = true;
            params.means.push(DVector::from_column_slice(data.row(worst.1)));
        } else {
            params.means.push(&mean_acc[j] / mass[j]);
        }
    }
    // Scatter pass.
    let mut scatter = vec![DMatrix::<f64>::zeros(d, d); k];
    for (s, &i) in support.iter().enumerate() {
        let xv = DVector::from_column_slice(data.row(i));
        for j in 0..k {
            if collapsed[j] {
                continue;
            }
            let wg = resp[s * k + j];
            if wg == 0.0 {
                continue;
            }
            let u = &xv - &params.means[j];
            scatter[j] += (&u * u.transpose()) * wg;
        }
    }
    for j in 0..k {
        if collapsed[j] {
            params.weights[j] = 1.0 / k as f64;
            params.precisions.push(DMatrix::identity(d, d));
            continue;
        }
        params.weights[j] = mass[j] / total_w;
        let cov = &scatter[j] / mass[j];
        // Clamp covariance eigenvalues and invert through the same
        // eigendecomposition, so the precision is symmetric by construction.
        let sym = (cov.clone() + cov.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let inv_clamped = DVector::from_iterator(
            d,
            eig.eigenvalues
                .iter()
                .map(|&e| 1.0 / e.clamp(model.eig_floor, 1.0 / model.eig_floor)),
        );
        params
            .precisions
            .push(&eig.eigenvectors * DMatrix::from_diagonal(&inv_clamped) * eig.eigenvectors.transpose());
    }
    if reseeded {
        let wsum: f64 = params.weights.iter().sum();
        for w in params.weights.iter_mut() {
            *w /= wsum;
        }
        let mut p = params;
        p.clamp_precisions(model.eig_floor);
        params = p;
    }

    let mut next = Hypothesis(params.to_flat());
    if let Some(ball) = &ctx.ball {
        if !ball.contains(next.coords()) {
            // EM has no step size to shrink; damp along the update segment to
            // stay inside the validity region.
            let t = max_step_inside(beta.coords(), next.coords(), ball);
            let damped: Vec<f64> = beta
                .coords()
                .iter()
                .zip(next.coords())
                .map(|(b, n)| b + t * (n - b))
                .collect();
            next = Hypothesis(damped);
        }
    }
    let loss_next = weighted_risk(data, model, coreset, next.coords())?;
    let grad = weighted_gradient(data, model, coreset, next.coords())?;
    let stable = !reseeded && relative_change(loss_next, entry) <= cfg.rel_loss_tol;
    Ok(StepOutcome {
        beta_next: next,
        loss_next,
        grad_norm: norm(&grad),
        stable,
        reseeded,
    })
}

// Largest t in [0, 1] with ||from + t (to - from) - center|| <= radius.
fn max_step_inside(from: &[f64], to: &[f64], ball: &BallConstraint) -> f64 {
    let a: f64 = from
        .iter()
        .zip(to)
        .map(|(f, t)| (t - f) * (t - f))
        .sum();
    if a == 0.0 {
        return 1.0;
    }
    let b: f64 = from
        .iter()
        .zip(to)
        .zip(ball.center)
        .map(|((f, t), c)| 2.0 * (f - c) * (t - f))
        .sum();
    let c0: f64 = from
        .iter()
        .zip(ball.center)
        .map(|(f, c)| (f - c) * (f - c))
        .sum::<f64>()
        - ball.radius * ball.radius;
    let disc = (b * b - 4.0 * a * c0).max(0.0);
    (((-b + disc.sqrt()) / (2.0 * a)).min(1.0)).max(0.0)
}

/// Which host a model is solved with by default.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HostKind {
    GradientDescent,
    Proximal,
    Subgradient,
    Em,
}

impl HostKind {
    pub fn default_for(model: &Model) -> HostKind {
        match model {
            Model::Ridge(_) | Model::Logistic(_) => HostKind::GradientDescent,
            Model::Lasso(m) if m.p == 1.0 => HostKind::Proximal,
            Model::Lasso(_) => HostKind::Subgradient,
            Model::Gmm(_) => HostKind::Em,
        }
    }
}

/// Dispatch one step of the given host kind.
pub fn host_step(
    kind: HostKind,
    data: &Dataset,
    model: &Model,
    coreset: &Coreset,
    beta: &Hypothesis,
    cfg: &HostConfig,
    ctx: StepContext,
) -> Result<StepOutcome> {
    match kind {
        HostKind::GradientDescent => gd_step(data, model, coreset, beta, cfg, ctx),
        HostKind::Proximal => prox_step(data, model, coreset, beta, cfg, ctx),
        HostKind::Subgradient => subgradient_step(data, model, coreset, beta, cfg, ctx),
        HostKind::Em => match model {
            Model::Gmm(gmm) => em_step(data, gmm, coreset, beta, cfg, ctx),
            _ => Err(Error::Parameter("EM host requires a mixture model".into())),
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HostStatus {
    Stable,
    Boundary,
    IterCap,
}

/// One host run: iterate until stable, until the boundary margin is crossed
/// (when a ball is given), or until the iteration cap.
#[derive(Clone, Debug)]
pub struct HostRun {
    pub beta: Hypothesis,
    pub status: HostStatus,
    pub iters: usize,
    pub entry_loss: f64,
    pub exit_loss: f64,
    /// Weighted objective after every step, entry value first.
    pub trace: Vec<f64>,
    pub reseeded_steps: usize,
}

/// Boundary geometry for a segment: iterates are capped at `radius`, a
/// rebuild triggers past `margin_radius` (= `(1 - sigma) * radius`).
#[derive(Clone, Copy, Debug)]
pub struct SegmentBall<'a> {
    pub center: &'a [f64],
    pub radius: f64,
    pub margin_radius: f64,
}

pub fn run_host(
    data: &Dataset,
    model: &Model,
    coreset: &Coreset,
    beta0: &Hypothesis,
    cfg: &HostConfig,
    ball: Option<SegmentBall>,
    iter_offset: usize,
) -> Result<HostRun> {
    cfg.validate()?;
    let kind = HostKind::default_for(model);
    let mut beta = beta0.clone();
    let mut loss = weighted_risk(data, model, coreset, beta.coords())?;
    let entry_loss = loss;
    let mut trace = Vec::with_capacity(cfg.max_iters.min(1024) + 1);
    trace.push(loss);
    let mut reseeded_steps = 0;
    for it in 0..cfg.max_iters {
        let ctx = StepContext {
            iter: iter_offset + it,
            ball: ball.map(|b| BallConstraint { center: b.center, radius: b.radius }),
            entry_loss: Some(loss),
        };
        let out = host_step(kind, data, model, coreset, &beta, cfg, ctx)?;
        beta = out.beta_next;
        loss = out.loss_next;
        trace.push(loss);
        if out.reseeded {
            reseeded_steps += 1;
        }
        // Stability wins over the boundary check: a converged iterate is
        // returned even from the margin zone.
        if out.stable {
            return Ok(HostRun {
                beta,
                status: HostStatus::Stable,
                iters: it + 1,
                entry_loss,
                exit_loss: loss,
                trace,
                reseeded_steps,
            });
        }
        if let Some(b) = &ball {
            if dist(beta.coords(), b.center) > b.margin_radius {
                return Ok(HostRun {
                    beta,
                    status: HostStatus::Boundary,
                    iters: it + 1,
                    entry_loss,
                    exit_loss: loss,
                    trace,
                    reseeded_steps,
                });
            }
        }
    }
    Ok(HostRun {
        beta,
        status: HostStatus::IterCap,
        iters: cfg.max_iters,
        entry_loss,
        exit_loss: loss,
        trace,
        reseeded_steps,
    })
}
