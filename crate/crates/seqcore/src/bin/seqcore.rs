//! Command-line benchmark harness.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use seqcore::coreset::{
    budget_plan, build_local_coreset, partition_layers, theoretical_plan, uniform_baseline,
    TheoreticalParams,
};
use seqcore::csvio::{load_csv, save_csv};
use seqcore::diagnostics::{audit_coreset_loss, audit_gradient, check_claim1};
use seqcore::harness::{run_experiment, ExperimentSpec, MethodName, MethodSpec};
use seqcore::model::{smoothness_constants, LossModel};
use seqcore::models::{default_init, GmmModel, LassoModel, LogisticModel, Model, RidgeModel};
use seqcore::optim::{run_host, HostConfig};
use seqcore::seeds::derive;
use seqcore::sequential::{one_shot_solve, run_host_direct, run_sequential, SequentialConfig};
use seqcore::synth::{gen_gmm, gen_linear};
use seqcore::{full_risk, weighted_risk, Coreset, Dataset};

#[derive(Parser)]
#[command(
    name = "seqcore",
    about = "Coreset-compressed empirical risk minimization benchmark harness",
    version
)]
struct Cli {
    /// Worker threads (default: SEQCORE_THREADS env var, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets.
    Gen {
        #[command(subcommand)]
        what: GenCommand,
    },
    /// Run a benchmark described by a JSON spec file.
    Bench {
        /// Path to the experiment spec (JSON).
        spec: PathBuf,
        /// Override the spec's output path for JSON-lines records.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve one instance with one method; prints the result as JSON.
    Solve(SolveArgs),
    /// Build a coreset and audit its loss/gradient guarantees.
    Audit(AuditArgs),
    /// Run the invariant suite against a dataset.
    Check(CheckArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Linear data: x ~ N(0, I), y = <h, x> + noise.
    Linear {
        #[arg(long, default_value_t = 1_000_000)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        d: usize,
        /// Coefficient range "lo,hi" for the generating hypothesis.
        #[arg(long, default_value = "-5,5")]
        coef_range: String,
        #[arg(long, default_value_t = 4.0)]
        noise_var: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV path.
        #[arg(long, short)]
        output: PathBuf,
        /// Also write the generating coefficients as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Gaussian blobs with the component index as the response column.
    Gmm {
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 4.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ModelArgs {
    /// Model kind: ridge | lasso | logistic | gmm.
    #[arg(long)]
    model: String,
    /// Regularization strength (ridge/lasso/logistic).
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Penalty exponent for lasso, in (0, 2].
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Component count (gmm).
    #[arg(long)]
    k: Option<usize>,
    /// Eigenvalue clamp bound for gmm precisions.
    #[arg(long, default_value_t = 0.01)]
    eig_floor: f64,
}

impl ModelArgs {
    fn build(&self, data_dim: usize) -> Result<Model, String> {
        match self.model.as_str() {
            "ridge" => Ok(Model::Ridge(RidgeModel::new(self.lambda))),
            "lasso" => LassoModel::with_exponent(self.lambda, self.p)
                .map(Model::Lasso)
                .map_err(|e| e.to_string()),
            "logistic" => Ok(Model::Logistic(LogisticModel::with_penalty(self.lambda))),
            "gmm" => {
                let k = self.k.ok_or("gmm needs --k")?;
                let mut g = GmmModel::new(k, data_dim);
                g.eig_floor = self.eig_floor;
                Ok(Model::Gmm(g))
            }
            other => Err(format!("unknown model {other:?}")),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Input CSV (features first, response last).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    has_header: bool,
    #[command(flatten)]
    model: ModelArgs,
    /// Method: original | unisamp | impsamp | seqcore | oneshot.
    #[arg(long, default_value = "seqcore")]
    method: String,
    #[arg(long)]
    budget: Option<usize>,
    /// Region radius for the sequential method.
    #[arg(long)]
    r: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Write the result JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    has_header: bool,
    #[command(flatten)]
    model: ModelArgs,
    /// Budget-mode coreset size; omit to use the theoretical plan.
    #[arg(long)]
    budget: Option<usize>,
    /// Target accuracy for the theoretical plan and the loss audit.
    #[arg(long, default_value_t = 0.25)]
    eps: f64,
    /// Region radius; defaults to half the anchor norm.
    #[arg(long)]
    r: Option<f64>,
    /// Coordinate tolerance for the gradient audit; audit skipped when absent.
    #[arg(long)]
    sigma_grad: Option<f64>,
    #[arg(long, default_value_t = 100)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    has_header: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("SEQCORE_THREADS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("could not size the thread pool: {e}");
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<(), String> {
    match command {
        Command::Gen { what } => gen(what),
        Command::Bench { spec, output, seed } => bench(&spec, output, seed),
        Command::Solve(args) => solve(args),
        Command::Audit(args) => audit(args),
        Command::Check(args) => check(args),
    }
}

fn gen(what: GenCommand) -> Result<(), String> {
    match what {
        GenCommand::Linear { n, d, coef_range, noise_var, seed, output, truth } => {
            let range = parse_range(&coef_range)?;
            let (data, h) = gen_linear(n, d, range, noise_var, seed).map_err(|e| e.to_string())?;
            save_csv(&output, &data, false).map_err(|e| e.to_string())?;
            if let Some(path) = truth {
                let json = serde_json::to_string_pretty(&h).map_err(|e| e.to_string())?;
                std::fs::write(path, json).map_err(|e| e.to_string())?;
            }
            eprintln!("wrote {n} x {d} linear dataset to {}", output.display());
            Ok(())
        }
        GenCommand::Gmm { n, dim, k, separation, seed, output } => {
            let (data, _) = gen_gmm(n, dim, k, separation, seed).map_err(|e| e.to_string())?;
            save_csv(&output, &data, false).map_err(|e| e.to_string())?;
            eprintln!(
                "wrote {n} x {dim} mixture dataset ({k} components) to {}",
                output.display()
            );
            Ok(())
        }
    }
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("coef range {s:?} is not \"lo,hi\""));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| format!("bad number {:?}", parts[0]))?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| format!("bad number {:?}", parts[1]))?;
    Ok((lo, hi))
}

fn bench(spec_path: &PathBuf, output: Option<PathBuf>, seed: Option<u64>) -> Result<(), String> {
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| format!("{}: {e}", spec_path.display()))?;
    let mut spec: ExperimentSpec = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let records = run_experiment(&spec, output.as_deref()).map_err(|e| e.to_string())?;
    let failures = records.iter().filter(|r| r.error.is_some()).count();
    eprintln!(
        "{} records across {} trials ({failures} failures)",
        records.len(),
        spec.trials
    );
    if spec.output.is_none() && output.is_none() {
        for r in &records {
            println!("{}", serde_json::to_string(&r).map_err(|e| e.to_string())?);
        }
    }
    Ok(())
}

fn solve(args: SolveArgs) -> Result<(), String> {
    let data = load_csv(&args.data, args.has_header).map_err(|e| e.to_string())?;
    let model = args.model.build(data.dim())?;
    let host = HostConfig { max_iters: args.max_iters, ..HostConfig::default() };
    let beta0 = default_init(&model, &data, None, derive(args.seed, "init", 0))
        .map_err(|e| e.to_string())?;
    let method = MethodSpec {
        name: match args.method.as_str() {
            "original" => MethodName::Original,
            "unisamp" => MethodName::UniSamp,
            "impsamp" => MethodName::ImpSamp,
            "seqcore" => MethodName::SeqCore,
            "oneshot" => MethodName::OneShot,
            other => return Err(format!("unknown method {other:?}")),
        },
        budget: args.budget,
        r: args.r,
        sigma: Some(args.sigma),
        eps: None,
        max_segments: None,
        label: None,
    };
    let result = match method.name {
        MethodName::Original => run_host_direct(&data, &model, &beta0, &host),
        MethodName::SeqCore => {
            let budget = args.budget.ok_or("seqcore needs --budget")?;
            let r = args.r.ok_or("seqcore needs --r")?;
            let mut config = SequentialConfig::budget(budget, r, args.seed);
            config.host = host;
            config.sigma = args.sigma;
            run_sequential(&data, &model, &beta0, &config)
        }
        MethodName::OneShot => {
            let budget = args.budget.ok_or("oneshot needs --budget")?;
            let mut config = SequentialConfig::budget(budget, 0.0, args.seed);
            config.host = host;
            one_shot_solve(&data, &model, &beta0, &config)
        }
        MethodName::UniSamp | MethodName::ImpSamp => {
            let started = std::time::Instant::now();
            let budget = args.budget.ok_or("sampling baselines need --budget")?;
            let coreset = match method.name {
                MethodName::UniSamp => uniform_baseline(data.n(), budget, args.seed),
                _ => seqcore::coreset::importance_baseline(&data, &model, budget, args.seed),
            }
            .map_err(|e| e.to_string())?;
            let run = run_host(&data, &model, &coreset, &beta0, &host, None, 0)
                .map_err(|e| e.to_string())?;
            let full = full_risk(&data, &model, run.beta.coords()).map_err(|e| e.to_string())?;
            let result = seqcore::sequential::SolveResult {
                beta_final: run.beta,
                anchors: vec![beta0.clone()],
                segments: vec![],
                full_loss: full,
                wall_time_s: started.elapsed().as_secs_f64(),
                terminated_by: match run.status {
                    seqcore::optim::HostStatus::Stable => seqcore::sequential::Termination::Stable,
                    _ => seqcore::sequential::Termination::IterCap,
                },
                host_iters_total: run.iters,
            };
            emit(&result, args.output.as_deref())?;
            return Ok(());
        }
    }
    .map_err(|e| e.to_string())?;
    emit(&result, args.output.as_deref())
}

fn emit<T: serde::Serialize>(value: &T, output: Option<&std::path::Path>) -> Result<(), String> {
    let json = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    match output {
        Some(path) => std::fs::write(path, json).map_err(|e| e.to_string()),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn audit(args: AuditArgs) -> Result<(), String> {
    let data = load_csv(&args.data, args.has_header).map_err(|e| e.to_string())?;
    let model = args.model.build(data.dim())?;
    // Anchor: host solution on a small uniform pilot sample.
    let pilot_size = (data.n() / 10).clamp(1, 500.min(data.n()));
    let pilot = uniform_baseline(data.n(), pilot_size, derive(args.seed, "pilot", 0))
        .map_err(|e| e.to_string())?;
    let beta0 = default_init(&model, &data, Some(&pilot), derive(args.seed, "init", 0))
        .map_err(|e| e.to_string())?;
    let host = HostConfig { max_iters: 200, ..HostConfig::default() };
    let anchor = run_host(&data, &model, &pilot, &beta0, &host, None, 0)
        .map(|r| r.beta)
        .map_err(|e| e.to_string())?;
    let radius = args.r.unwrap_or(0.5 * anchor.norm().max(1e-6));

    let partition =
        partition_layers(&data, model.as_loss_model(), anchor.coords()).map_err(|e| e.to_string())?;
    let constants = smoothness_constants(&model, &data, anchor.coords(), radius)
        .map_err(|e| e.to_string())?;
    let plan = match args.budget {
        Some(b) => budget_plan(&partition, &constants, b, radius),
        None => theoretical_plan(
            &partition,
            &constants,
            model.param_dim(data.dim()),
            TheoreticalParams {
                eps: args.eps,
                lambda_fail: None,
                sparsity_k: None,
                m_lower: None,
            },
        ),
    }
    .map_err(|e| e.to_string())?;
    let coreset = build_local_coreset(&partition, &plan, derive(args.seed, "coreset", 0))
        .map_err(|e| e.to_string())?;

    let loss_report = audit_coreset_loss(
        &data, &model, &coreset, &anchor, radius, args.eps, args.probes,
        derive(args.seed, "audit", 0),
    )
    .map_err(|e| e.to_string())?;
    let grad_report = args
        .sigma_grad
        .map(|s| {
            audit_gradient(
                &data, &model, &coreset, &anchor, radius, s, args.probes,
                derive(args.seed, "audit", 1),
            )
        })
        .transpose()
        .map_err(|e| e.to_string())?;

    #[derive(serde::Serialize)]
    struct AuditOutput {
        anchor_risk: f64,
        radius: f64,
        coreset_size: usize,
        plan_total: usize,
        plan_uncapped_total: u64,
        claim1_holds: bool,
        loss_audit: seqcore::diagnostics::AuditReport,
        #[serde(skip_serializing_if = "Option::is_none")]
        gradient_audit: Option<seqcore::diagnostics::AuditReport>,
    }
    let out = AuditOutput {
        anchor_risk: partition.h(),
        radius,
        coreset_size: coreset.size(),
        plan_total: plan.total,
        plan_uncapped_total: plan.uncapped_total,
        claim1_holds: check_claim1(&partition),
        loss_audit: loss_report,
        gradient_audit: grad_report,
    };
    emit(&out, args.output.as_deref())
}

fn check(args: CheckArgs) -> Result<(), String> {
    let data = load_csv(&args.data, args.has_header).map_err(|e| e.to_string())?;
    let model = args.model.build(data.dim())?;
    let mut failures = 0;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("{}  {name}{}", if ok { "PASS" } else { "FAIL" }, if detail.is_empty() { String::new() } else { format!("  ({detail})") });
        if !ok {
            failures += 1;
        }
    };

    let beta0 = default_init(&model, &data, None, derive(args.seed, "init", 0))
        .map_err(|e| e.to_string())?;
    let anchor = match &model {
        Model::Gmm(_) => beta0.clone(),
        _ => {
            // A loose anchor away from the origin exercises every layer.
            let mut b = beta0.clone();
            if let Some(first) = b.0.first_mut() {
                *first += 1.0;
            }
            b
        }
    };

    match partition_layers(&data, model.as_loss_model(), anchor.coords()) {
        Ok(p) => {
            let sizes = p.layer_sizes();
            let cover: usize = sizes.iter().sum();
            report("layers partition the dataset", cover == data.n(), format!("{cover} of {}", data.n()));
            let mut predicate_ok = true;
            for (j, layer) in p.layers().iter().enumerate() {
                for &i in layer {
                    let f = p.anchor_losses()[i];
                    let ok = if j == 0 {
                        f <= p.threshold(0)
                    } else {
                        f > p.threshold(j - 1) && f <= p.threshold(j)
                    };
                    predicate_ok &= ok;
                }
            }
            report("layer thresholds hold exactly", predicate_ok, String::new());
            report("layer-mass inequality", check_claim1(&p), String::new());
            let max_loss = p.anchor_losses().iter().cloned().fold(0.0, f64::max);
            report(
                "max loss below the top threshold",
                max_loss <= p.threshold(p.num_layers() - 1),
                format!("{max_loss:.6}"),
            );

            let constants = smoothness_constants(&model, &data, anchor.coords(), 0.5)
                .map_err(|e| e.to_string())?;
            let budget = (data.n() / 5).max(p.non_empty_layers()).min(data.n());
            let plan = budget_plan(&p, &constants, budget, 0.5).map_err(|e| e.to_string())?;
            let cs = build_local_coreset(&p, &plan, derive(args.seed, "coreset", 0))
                .map_err(|e| e.to_string())?;
            let sum = cs.weight_sum();
            report(
                "layered weights sum to n",
                (sum - data.n() as f64).abs() <= 1e-9 * data.n() as f64,
                format!("{sum:.9}"),
            );
            let full = Coreset::full(data.n());
            let a = full_risk(&data, &model, anchor.coords()).map_err(|e| e.to_string())?;
            let b = weighted_risk(&data, &model, &full, anchor.coords()).map_err(|e| e.to_string())?;
            report("identity weights reproduce the full risk", a == b, format!("{a} vs {b}"));
        }
        Err(seqcore::Error::DegenerateAnchor) => {
            report("anchor risk is positive", false, "every loss is zero at the anchor".into());
        }
        Err(e) => return Err(e.to_string()),
    }

    // Analytic gradients against central differences at a few random points.
    let fd_ok = gradient_fd_check(&data, &model, args.seed);
    report("gradients match finite differences", fd_ok, String::new());

    if failures == 0 {
        Ok(())
    } else {
        Err(format!("{failures} checks failed"))
    }
}

fn gradient_fd_check(data: &Dataset, model: &Model, seed: u64) -> bool {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, "fd", 0));
    let p = model.param_dim(data.dim());
    for _ in 0..20 {
        let i = rng.random_range(0..data.n());
        let beta: Vec<f64> = match model {
            Model::Gmm(_) => match default_init(model, data, None, rng.random()) {
                Ok(mut h) => {
                    for v in h.0.iter_mut() {
                        *v += rng.random_range(-0.01..0.01);
                    }
                    h.0
                }
                Err(_) => return false,
            },
            _ => (0..p).map(|_| rng.random_range(-1.0..1.0)).collect(),
        };
        let x = data.row(i);
        let y = data.response(i);
        let mut analytic = vec![0.0; p];
        model.grad(&beta, x, y, &mut analytic);
        let h = 1e-5;
        let mut b = beta.clone();
        for l in 0..p {
            let orig = b[l];
            b[l] = orig + h;
            let up = model.loss(&b, x, y);
            b[l] = orig - h;
            let down = model.loss(&b, x, y);
            b[l] = orig;
            let fd = (up - down) / (2.0 * h);
            let scale = fd.abs().max(analytic[l].abs()).max(1.0);
            if (analytic[l] - fd).abs() > 1e-4 * scale {
                return false;
            }
        }
    }
    true
}
