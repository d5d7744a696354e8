//! Solve a large ridge instance through the sequential driver and compare it
//! against the uncompressed run: same quality at a fraction of the per-step
//! cost once the data is large.
//!
//! Run with: cargo run --release --example sequential_ridge

use std::time::Instant;

use seqcore::data::Hypothesis;
use seqcore::diagnostics::error_beta;
use seqcore::models::{Model, RidgeModel};
use seqcore::sequential::{run_host_direct, run_sequential, SequentialConfig};
use seqcore::synth::gen_linear;

fn main() -> seqcore::Result<()> {
    let n = 200_000;
    let d = 30;
    let (data, _truth) = gen_linear(n, d, (-5.0, 5.0), 4.0, 21)?;
    let model = Model::Ridge(RidgeModel::new(0.01));
    let beta0 = Hypothesis::zeros(d);

    let t0 = Instant::now();
    let direct = run_host_direct(&data, &model, &beta0, &Default::default())?;
    let direct_time = t0.elapsed().as_secs_f64();
    println!(
        "direct host: loss {:.5} after {} iterations in {direct_time:.2}s",
        direct.full_loss, direct.host_iters_total
    );

    for radius in [0.5, 1.0, 2.0] {
        let mut config = SequentialConfig::budget(2000, radius, 9);
        config.host.max_iters = 200;
        let t1 = Instant::now();
        let seq = run_sequential(&data, &model, &beta0, &config)?;
        let seq_time = t1.elapsed().as_secs_f64();
        println!(
            "sequential R={radius}: loss {:.5}, {} segments, {} host iterations, \
             {seq_time:.2}s ({:.2}x direct), error vs direct {:.4}, ended {:?}",
            seq.full_loss,
            seq.segments.len(),
            seq.host_iters_total,
            seq_time / direct_time,
            error_beta(&seq.beta_final, &direct.beta_final)?,
            seq.terminated_by
        );
    }
    Ok(())
}
