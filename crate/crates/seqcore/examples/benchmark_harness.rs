//! Drive the benchmark harness from code: every compression method against
//! the uncompressed reference, metrics as JSON-lines records.
//!
//! Run with: cargo run --release --example benchmark_harness

use seqcore::harness::{
    run_experiment, DataSource, ExperimentSpec, MethodName, MethodSpec,
};
use seqcore::models::{Model, RidgeModel};
use seqcore::optim::HostConfig;

fn main() -> seqcore::Result<()> {
    let spec = ExperimentSpec {
        model: Model::Ridge(RidgeModel::new(0.01)),
        data: DataSource::Linear { n: 100_000, d: 50, coef_range: (-5.0, 5.0), noise_var: 4.0 },
        methods: vec![
            MethodSpec::of(MethodName::Original),
            MethodSpec { budget: Some(500), ..MethodSpec::of(MethodName::UniSamp) },
            MethodSpec { budget: Some(500), ..MethodSpec::of(MethodName::ImpSamp) },
            MethodSpec {
                budget: Some(500),
                r: Some(0.5),
                max_segments: Some(60),
                ..MethodSpec::of(MethodName::SeqCore)
            },
            MethodSpec { budget: Some(500), ..MethodSpec::of(MethodName::OneShot) },
        ],
        trials: 3,
        seed: 17,
        output: None,
        host: HostConfig { max_iters: 200, ..HostConfig::default() },
    };
    let records = run_experiment(&spec, None)?;

    println!(
        "{:<14} {:>8} {:>10} {:>12} {:>9}",
        "method", "size", "loss", "error", "runtime"
    );
    for label in ["original", "unisamp", "impsamp", "seqcore-r0.5", "oneshot"] {
        let rs: Vec<_> = records.iter().filter(|r| r.method == label).collect();
        if rs.is_empty() {
            continue;
        }
        let mean = |f: &dyn Fn(&&seqcore::harness::ResultRecord) -> f64| {
            rs.iter().map(f).sum::<f64>() / rs.len() as f64
        };
        println!(
            "{label:<14} {:>8} {:>10.5} {:>12.5} {:>8.2}x",
            rs[0].coreset_size,
            mean(&|r| r.full_loss.unwrap()),
            mean(&|r| r.error_beta.unwrap_or(0.0)),
            mean(&|r| r.normalized_runtime.unwrap_or(1.0)),
        );
    }
    Ok(())
}
