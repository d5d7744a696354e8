//! Gaussian-mixture training with EM as the host: the sequential coreset
//! compresses 100k points to 1000 weighted ones with no purity loss.
//!
//! Run with: cargo run --release --example gmm_clustering

use std::time::Instant;

use seqcore::coreset::uniform_baseline;
use seqcore::diagnostics::purity;
use seqcore::models::{assignments, default_init, GmmModel, Model};
use seqcore::optim::run_host;
use seqcore::sequential::{run_sequential, SequentialConfig};
use seqcore::synth::gen_gmm;

fn main() -> seqcore::Result<()> {
    let (data, truth) = gen_gmm(100_000, 5, 4, 3.0, 13)?;
    let gmm = GmmModel::new(4, 5);
    let model = Model::Gmm(gmm);
    let beta0 = default_init(&model, &data, None, 1)?;

    let t0 = Instant::now();
    let mut config = SequentialConfig::budget(1000, 10.0, 2);
    config.host.max_iters = 200;
    let seq = run_sequential(&data, &model, &beta0, &config)?;
    let seq_time = t0.elapsed().as_secs_f64();
    let seq_assign = assignments(&gmm, &data, seq.beta_final.coords())?;
    println!(
        "sequential EM: loss {:.4}, purity {:.4}, {} segments, {:.2}s",
        seq.full_loss,
        purity(&seq_assign, &truth.labels)?,
        seq.segments.len(),
        seq_time
    );

    let t1 = Instant::now();
    let uni = uniform_baseline(data.n(), 1000, 3)?;
    let uni_run = run_host(&data, &model, &uni, &beta0, &config.host, None, 0)?;
    let uni_assign = assignments(&gmm, &data, uni_run.beta.coords())?;
    println!(
        "uniform-sample EM: purity {:.4}, {:.2}s",
        purity(&uni_assign, &truth.labels)?,
        t1.elapsed().as_secs_f64()
    );

    // Component weights recovered by the sequential run.
    let params = seqcore::models::GmmParams::from_flat(4, 5, seq.beta_final.coords())?;
    println!("recovered mixture weights: {:?}", params.weights);
    Ok(())
}
