//! The sequential coreset driver.
//!
//! Starting from an initial hypothesis, build a local coreset at the current
//! anchor, run the host solver on it while the iterate stays within the
//! boundary margin, then either stop (host stabilized inside the ball) or
//! re-anchor at the crossing iterate and rebuild. Every iterate is kept inside
//! the closed ball of the current anchor, where the coreset's guarantee holds,
//! so consecutive anchors are never farther apart than the radius.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coreset::{budget_plan, local_coreset_at, theoretical_plan, TheoreticalParams};
use crate::data::{Coreset, Dataset, Hypothesis};
use crate::error::{Error, Result};
use crate::model::{smoothness_constants, LossModel};
use crate::models::Model;
use crate::optim::{run_host, HostConfig, HostRun, HostStatus, SegmentBall};
use crate::risk::full_risk;
use crate::seeds::derive;

/// Coreset sizing for each segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SizeSpec {
    /// Fixed total size, split across layers proportionally.
    Budget { budget: usize },
    /// Concentration-bound sizes (usually larger than the data at small eps;
    /// they are capped at the layer populations).
    Theoretical,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequentialConfig {
    /// Local region radius R.
    pub radius: f64,
    /// Target coreset accuracy, used by theoretical sizing.
    pub eps: f64,
    /// Boundary margin: a rebuild triggers past (1 - sigma) R.
    pub sigma: f64,
    pub size_mode: SizeSpec,
    pub max_segments: usize,
    pub host: HostConfig,
    pub seed: u64,
    /// Restrict hypotheses to k non-zero coordinates in theoretical sizing.
    #[serde(default)]
    pub sparsity_k: Option<usize>,
    /// Record the full-data loss at segment entry/exit (one extra sweep each).
    #[serde(default)]
    pub track_full_loss: bool,
    /// Keep the per-step weighted-objective trace of every segment.
    #[serde(default)]
    pub record_traces: bool,
}

impl SequentialConfig {
    pub fn budget(budget: usize, radius: f64, seed: u64) -> Self {
        SequentialConfig {
            radius,
            eps: 0.25,
            sigma: 0.05,
            size_mode: SizeSpec::Budget { budget },
            max_segments: 200,
            host: HostConfig::default(),
            seed,
            sparsity_k: None,
            track_full_loss: false,
            record_traces: false,
        }
    }

    fn validate(&self, need_radius: bool) -> Result<()> {
        if need_radius && !(self.radius > 0.0) {
            return Err(Error::Parameter(format!("radius {} must be positive", self.radius)));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::Parameter(format!("sigma {} outside (0,1)", self.sigma)));
        }
        if self.max_segments == 0 {
            return Err(Error::Parameter("max_segments must be at least 1".into()));
        }
        self.host.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Stable,
    SegmentCap,
    IterCap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SegmentStat {
    pub coreset_size: usize,
    pub host_iters: usize,
    pub ftilde_entry: f64,
    pub ftilde_exit: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_loss_entry: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_loss_exit: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ftilde_trace: Option<Vec<f64>>,
    pub reseeded_steps: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveResult {
    pub beta_final: Hypothesis,
    /// Anchor chain beta_0 .. beta_T.
    pub anchors: Vec<Hypothesis>,
    pub segments: Vec<SegmentStat>,
    /// Full-data risk of the final hypothesis, computed once at the end.
    pub full_loss: f64,
    pub wall_time_s: f64,
    pub terminated_by: Termination,
    pub host_iters_total: usize,
}

/// The boundary rule: the iterate has left the margin zone of the current
/// anchor when its distance exceeds `(1 - sigma) R`.
pub fn boundary_reached(anchor: &Hypothesis, beta: &Hypothesis, radius: f64, sigma: f64) -> bool {
    anchor.distance(beta) > (1.0 - sigma) * radius
}

fn segment_coreset(
    data: &Dataset,
    model: &Model,
    anchor: &Hypothesis,
    config: &SequentialConfig,
    segment: usize,
) -> Result<Coreset> {
    let seed = derive(config.seed, "coreset", segment as u64);
    local_coreset_at(data, model, anchor.coords(), |partition| {
        let constants = smoothness_constants(model, data, anchor.coords(), config.radius)?;
        match config.size_mode {
            SizeSpec::Budget { budget } => budget_plan(partition, &constants, budget, config.radius),
            SizeSpec::Theoretical => theoretical_plan(
                partition,
                &constants,
                model.param_dim(data.dim()),
                TheoreticalParams {
                    eps: config.eps,
                    lambda_fail: None,
                    sparsity_k: config.sparsity_k,
                    m_lower: None,
                },
            ),
        }
    }, seed)
}

fn make_stat(data: &Dataset, model: &Model, run: &HostRun, size: usize, config: &SequentialConfig, entry: &Hypothesis) -> Result<SegmentStat> {
    let (full_entry, full_exit) = if config.track_full_loss {
        (
            Some(full_risk(data, model, entry.coords())?),
            Some(full_risk(data, model, run.beta.coords())?),
        )
    } else {
        (None, None)
    };
    Ok(SegmentStat {
        coreset_size: size,
        host_iters: run.iters,
        ftilde_entry: run.entry_loss,
        ftilde_exit: run.exit_loss,
        full_loss_entry: full_entry,
        full_loss_exit: full_exit,
        ftilde_trace: config.record_traces.then(|| run.trace.clone()),
        reseeded_steps: run.reseeded_steps,
    })
}

/// Run the sequential driver to termination.
pub fn run_sequential(
    data: &Dataset,
    model: &Model,
    beta0: &Hypothesis,
    config: &SequentialConfig,
) -> Result<SolveResult> {
    config.validate(true)?;
    check_init(data, model, beta0)?;
    let start = Instant::now();
    let mut beta = beta0.clone();
    let mut anchors = vec![beta.clone()];
    let mut segments = Vec::new();
    let mut iter_offset = 0;
    let mut terminated = Termination::SegmentCap;

    for segment in 0..config.max_segments {
        let coreset =
            segment_coreset(data, model, &beta, config, segment).map_err(|e| e.in_segment(segment))?;
        let ball = SegmentBall {
            center: anchors[anchors.len() - 1].coords(),
            radius: config.radius,
            margin_radius: (1.0 - config.sigma) * config.radius,
        };
        let entry = beta.clone();
        let run = run_host(data, model, &coreset, &beta, &config.host, Some(ball), iter_offset)
            .map_err(|e| e.in_segment(segment))?;
        segments.push(make_stat(data, model, &run, coreset.size(), config, &entry)?);
        iter_offset += run.iters;
        beta = run.beta;
        match run.status {
            HostStatus::Stable => {
                terminated = Termination::Stable;
                break;
            }
            HostStatus::IterCap => {
                terminated = Termination::IterCap;
                break;
            }
            HostStatus::Boundary => {
                anchors.push(beta.clone());
            }
        }
    }

    let full_loss = full_risk(data, model, beta.coords())?;
    Ok(SolveResult {
        beta_final: beta,
        anchors,
        segments,
        full_loss,
        wall_time_s: start.elapsed().as_secs_f64(),
        terminated_by: terminated,
        host_iters_total: iter_offset,
    })
}

/// One local coreset at the starting hypothesis, host run to convergence,
/// never rebuilt. Sizing ignores the ball geometry (pass radius 0 to drop the
/// range terms entirely); no boundary is enforced.
pub fn one_shot_solve(
    data: &Dataset,
    model: &Model,
    beta0: &Hypothesis,
    config: &SequentialConfig,
) -> Result<SolveResult> {
    config.validate(false)?;
    check_init(data, model, beta0)?;
    let start = Instant::now();
    let coreset = segment_coreset(data, model, beta0, config, 0)?;
    let run = run_host(data, model, &coreset, beta0, &config.host, None, 0)?;
    let stat = make_stat(data, model, &run, coreset.size(), config, beta0)?;
    let full_loss = full_risk(data, model, run.beta.coords())?;
    Ok(SolveResult {
        beta_final: run.beta,
        anchors: vec![beta0.clone()],
        segments: vec![stat],
        full_loss,
        wall_time_s: start.elapsed().as_secs_f64(),
        terminated_by: match run.status {
            HostStatus::Stable => Termination::Stable,
            _ => Termination::IterCap,
        },
        host_iters_total: run.iters,
    })
}

/// Host run on the untouched full dataset (the "no compression" reference).
pub fn run_host_direct(
    data: &Dataset,
    model: &Model,
    beta0: &Hypothesis,
    host: &HostConfig,
) -> Result<SolveResult> {
    check_init(data, model, beta0)?;
    let start = Instant::now();
    let full = Coreset::full(data.n());
    let run = run_host(data, model, &full, beta0, host, None, 0)?;
    let full_loss = full_risk(data, model, run.beta.coords())?;
    Ok(SolveResult {
        beta_final: run.beta.clone(),
        anchors: vec![beta0.clone()],
        segments: vec![SegmentStat {
            coreset_size: data.n(),
            host_iters: run.iters,
            ftilde_entry: run.entry_loss,
            ftilde_exit: run.exit_loss,
            full_loss_entry: None,
            full_loss_exit: None,
            ftilde_trace: None,
            reseeded_steps: run.reseeded_steps,
        }],
        full_loss,
        wall_time_s: start.elapsed().as_secs_f64(),
        terminated_by: match run.status {
            HostStatus::Stable => Termination::Stable,
            _ => Termination::IterCap,
        },
        host_iters_total: run.iters,
    })
}

fn check_init(data: &Dataset, model: &Model, beta0: &Hypothesis) -> Result<()> {
    let expected = model.param_dim(data.dim());
    if beta0.dim() != expected {
        return Err(Error::DimensionMismatch(format!(
            "initial hypothesis has {} coordinates, model expects {expected}",
            beta0.dim()
        )));
    }
    if !beta0.is_finite() {
        return Err(Error::Parameter("initial hypothesis has non-finite coordinates".into()));
    }
    Ok(())
}
