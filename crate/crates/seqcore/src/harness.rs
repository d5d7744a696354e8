//! Benchmark orchestration: experiment specs in, JSON-lines records out.
//!
//! Each trial materializes its dataset from the trial seed, initializes one
//! shared starting hypothesis, then runs every configured method with a
//! method-derived seed. The full-data run defines the reference hypothesis for
//! the normalized error and the unit runtime for normalization.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coreset::{importance_baseline, uniform_baseline};
use crate::csvio::load_csv;
use crate::data::{Dataset, Hypothesis};
use crate::diagnostics::{error_beta, purity};
use crate::error::{Error, Result};
use crate::models::{assignments, default_init, Model};
use crate::optim::{run_host, HostConfig};
use crate::risk::full_risk;
use crate::seeds::derive;
use crate::sequential::{
    one_shot_solve, run_host_direct, run_sequential, SequentialConfig,
};
use crate::synth::{gen_gmm, gen_linear};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
    },
    Linear {
        #[serde(default = "default_linear_n")]
        n: usize,
        #[serde(default = "default_linear_d")]
        d: usize,
        #[serde(default = "default_coef_range")]
        coef_range: (f64, f64),
        #[serde(default = "default_noise_var")]
        noise_var: f64,
    },
    Gmm {
        #[serde(default = "default_gmm_n")]
        n: usize,
        dim: usize,
        k: usize,
        #[serde(default = "default_separation")]
        separation: f64,
    },
}

fn default_linear_n() -> usize {
    1_000_000
}
fn default_linear_d() -> usize {
    50
}
fn default_coef_range() -> (f64, f64) {
    (-5.0, 5.0)
}
fn default_noise_var() -> f64 {
    4.0
}
fn default_gmm_n() -> usize {
    100_000
}
fn default_separation() -> f64 {
    4.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodName {
    Original,
    UniSamp,
    ImpSamp,
    SeqCore,
    OneShot,
}

impl MethodName {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodName::Original => "original",
            MethodName::UniSamp => "unisamp",
            MethodName::ImpSamp => "impsamp",
            MethodName::SeqCore => "seqcore",
            MethodName::OneShot => "oneshot",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodSpec {
    pub name: MethodName,
    #[serde(default)]
    pub budget: Option<usize>,
    /// Region radius (sequential method only).
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub sigma: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub max_segments: Option<usize>,
    #[serde(default)]
    pub label: Option<String>,
}

impl MethodSpec {
    pub fn of(name: MethodName) -> Self {
        MethodSpec {
            name,
            budget: None,
            r: None,
            sigma: None,
            eps: None,
            max_segments: None,
            label: None,
        }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match (self.name, self.r) {
            (MethodName::SeqCore, Some(r)) => format!("seqcore-r{r}"),
            _ => self.name.as_str().to_string(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub model: Model,
    pub data: DataSource,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub host: HostConfig,
}

fn default_trials() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResultRecord {
    pub method: String,
    pub coreset_size: usize,
    pub trial: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub full_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub purity: Option<f64>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub normalized_runtime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A materialized trial dataset plus whatever ground truth came with it.
pub struct TrialData {
    pub data: Dataset,
    pub labels: Option<Vec<usize>>,
    pub truth_coefficients: Option<Vec<f64>>,
}

pub fn materialize(source: &DataSource, seed: u64) -> Result<TrialData> {
    match source {
        DataSource::Csv { path, has_header } => {
            let data = load_csv(path, *has_header)?;
            let labels = integral_labels(&data);
            Ok(TrialData { data, labels, truth_coefficients: None })
        }
        DataSource::Linear { n, d, coef_range, noise_var } => {
            let (data, h) = gen_linear(*n, *d, *coef_range, *noise_var, seed)?;
            Ok(TrialData { data, labels: None, truth_coefficients: Some(h) })
        }
        DataSource::Gmm { n, dim, k, separation } => {
            let (data, truth) = gen_gmm(*n, *dim, *k, *separation, seed)?;
            Ok(TrialData { data, labels: Some(truth.labels), truth_coefficients: None })
        }
    }
}

// Responses that are small nonnegative integers can serve as cluster labels.
fn integral_labels(data: &Dataset) -> Option<Vec<usize>> {
    let mut labels = Vec::with_capacity(data.n());
    for i in 0..data.n() {
        let y = data.response(i);
        if y < 0.0 || y.fract() != 0.0 || y > 1e6 {
            return None;
        }
        labels.push(y as usize);
    }
    Some(labels)
}

struct MethodOutcome {
    beta: Hypothesis,
    full_loss: f64,
    coreset_size: usize,
    segments: Option<usize>,
}

fn run_method(
    spec: &MethodSpec,
    model: &Model,
    data: &Dataset,
    beta0: &Hypothesis,
    host: &HostConfig,
    seed: u64,
) -> Result<MethodOutcome> {
    let n = data.n();
    let need_budget = || {
        spec.budget.ok_or_else(|| {
            Error::Parameter(format!("method {} needs a budget", spec.name.as_str()))
        })
    };
    match spec.name {
        MethodName::Original => {
            let result = run_host_direct(data, model, beta0, host)?;
            Ok(MethodOutcome {
                beta: result.beta_final,
                full_loss: result.full_loss,
                coreset_size: n,
                segments: None,
            })
        }
        MethodName::UniSamp | MethodName::ImpSamp => {
            let budget = need_budget()?;
            let coreset = match spec.name {
                MethodName::UniSamp => uniform_baseline(n, budget, seed)?,
                _ => importance_baseline(data, model, budget, seed)?,
            };
            let run = run_host(data, model, &coreset, beta0, host, None, 0)?;
            Ok(MethodOutcome {
                full_loss: full_risk(data, model, run.beta.coords())?,
                beta: run.beta,
                coreset_size: budget,
                segments: None,
            })
        }
        MethodName::SeqCore => {
            let budget = need_budget()?;
            let r = spec.r.ok_or_else(|| {
                Error::Parameter("sequential method needs a region radius r".into())
            })?;
            let mut config = SequentialConfig::budget(budget, r, seed);
            config.host = *host;
            if let Some(s) = spec.sigma {
                config.sigma = s;
            }
            if let Some(e) = spec.eps {
                config.eps = e;
            }
            if let Some(m) = spec.max_segments {
                config.max_segments = m;
            }
            let result = run_sequential(data, model, beta0, &config)?;
            Ok(MethodOutcome {
                beta: result.beta_final,
                full_loss: result.full_loss,
                coreset_size: budget,
                segments: Some(result.segments.len()),
            })
        }
        MethodName::OneShot => {
            let budget = need_budget()?;
            // One-shot sizing ignores the region geometry entirely.
            let mut config = SequentialConfig::budget(budget, 0.0, seed);
            config.host = *host;
            let result = one_shot_solve(data, model, beta0, &config)?;
            Ok(MethodOutcome {
                beta: result.beta_final,
                full_loss: result.full_loss,
                coreset_size: budget,
                segments: None,
            })
        }
    }
}

/// Run every (method, trial) pair, returning the records and appending them as
/// JSON lines to `output` (spec's path unless overridden). Method failures are
/// recorded with an `error` field; remaining methods still run.
pub fn run_experiment(spec: &ExperimentSpec, output: Option<&Path>) -> Result<Vec<ResultRecord>> {
    if spec.trials == 0 {
        return Err(Error::Parameter("trials must be at least 1".into()));
    }
    if spec.methods.is_empty() {
        return Err(Error::Parameter("no methods configured".into()));
    }
    if let DataSource::Csv { path, .. } = &spec.data {
        if !path.exists() {
            return Err(Error::Parameter(format!("data file {} does not exist", path.display())));
        }
    }
    let out_path = output.or(spec.output.as_deref());
    let mut writer = match out_path {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    };
    let mut records = Vec::with_capacity(spec.trials * spec.methods.len());

    for trial in 0..spec.trials {
        let trial_seed = derive(spec.seed, "trial", trial as u64);
        let trial_data = materialize(&spec.data, trial_seed)?;
        let data = &trial_data.data;
        spec.model.validate_data(data)?;
        let beta0 = default_init(&spec.model, data, None, derive(trial_seed, "init", 0))?;

        let mut outcomes: Vec<(MethodSpec, std::result::Result<(MethodOutcome, f64), Error>)> =
            Vec::new();
        let mut original: Option<(Hypothesis, f64)> = None;
        for (idx, method) in spec.methods.iter().enumerate() {
            let seed = derive(trial_seed, method.label().as_str(), idx as u64);
            let started = Instant::now();
            let run = run_method(method, &spec.model, data, &beta0, &spec.host, seed);
            let wall = started.elapsed().as_secs_f64();
            if let (MethodName::Original, Ok(out)) = (method.name, &run) {
                original = Some((out.beta.clone(), wall));
            }
            outcomes.push((method.clone(), run.map(|o| (o, wall))));
        }

        let mut trial_lines = String::new();
        for (method, run) in outcomes {
            let record = match run {
                Ok((outcome, wall)) => {
                    let (err_beta, pur) = metrics_for(
                        &spec.model,
                        data,
                        &outcome.beta,
                        original.as_ref().map(|(b, _)| b),
                        trial_data.labels.as_deref(),
                    );
                    let normalized = match (&method.name, &original) {
                        (MethodName::Original, _) => Some(1.0),
                        (_, Some((_, orig_wall))) if *orig_wall > 0.0 => Some(wall / orig_wall),
                        _ => None,
                    };
                    ResultRecord {
                        method: method.label(),
                        coreset_size: outcome.coreset_size,
                        trial,
                        seed: trial_seed,
                        full_loss: Some(outcome.full_loss),
                        error_beta: err_beta,
                        purity: pur,
                        wall_time_s: wall,
                        normalized_runtime: normalized,
                        segments: outcome.segments,
                        error: None,
                    }
                }
                Err(e) => ResultRecord {
                    method: method.label(),
                    coreset_size: method.budget.unwrap_or(data.n()),
                    trial,
                    seed: trial_seed,
                    full_loss: None,
                    error_beta: None,
                    purity: None,
                    wall_time_s: 0.0,
                    normalized_runtime: None,
                    segments: None,
                    error: Some(e.to_string()),
                },
            };
            trial_lines.push_str(&serde_json::to_string(&record)?);
            trial_lines.push('\n');
            records.push(record);
        }
        // One write per trial keeps lines from interleaving.
        if let Some(w) = writer.as_mut() {
            w.write_all(trial_lines.as_bytes())?;
            w.flush()?;
        }
    }
    Ok(records)
}

fn metrics_for(
    model: &Model,
    data: &Dataset,
    beta: &Hypothesis,
    reference: Option<&Hypothesis>,
    labels: Option<&[usize]>,
) -> (Option<f64>, Option<f64>) {
    match model {
        Model::Gmm(g) => {
            let pur = labels.and_then(|truth| {
                assignments(g, data, beta.coords())
                    .ok()
                    .and_then(|assign| purity(&assign, truth).ok())
            });
            (None, pur)
        }
        _ => {
            let err = reference.and_then(|r| error_beta(beta, r).ok());
            (err, None)
        }
    }
}
