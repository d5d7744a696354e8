//! Lasso through the proximal host, plus the sparse-hypothesis size plan:
//! restricting to k non-zero coordinates shrinks the theoretical sample
//! demand from a d-dependence to roughly k log d.
//!
//! Run with: cargo run --release --example lasso_sparse

use seqcore::coreset::{partition_layers, theoretical_plan, TheoreticalParams};
use seqcore::data::Hypothesis;
use seqcore::model::smoothness_constants;
use seqcore::models::{LassoModel, Model};
use seqcore::sequential::{run_sequential, SequentialConfig};
use seqcore::synth::gen_linear;

fn main() -> seqcore::Result<()> {
    // A wide instance where only the planner's dimension dependence matters.
    let d = 1000;
    let (wide, _) = gen_linear(2000, d, (-1.0, 1.0), 1.0, 5)?;
    let model = Model::Lasso(LassoModel::new(0.1));
    let anchor = vec![0.0; d];
    let partition = partition_layers(&wide, &model, &anchor)?;
    let constants = smoothness_constants(&model, &wide, &anchor, 0.5)?;
    let dense = theoretical_plan(
        &partition,
        &constants,
        d,
        TheoreticalParams { eps: 0.25, lambda_fail: None, sparsity_k: None, m_lower: None },
    )?;
    for k in [2, 10, 50] {
        let sparse = theoretical_plan(
            &partition,
            &constants,
            d,
            TheoreticalParams { eps: 0.25, lambda_fail: None, sparsity_k: Some(k), m_lower: None },
        )?;
        println!(
            "k = {k:>3}: sparse demand {:.3e} vs dense {:.3e} ({:.1}x smaller)",
            sparse.uncapped_total as f64,
            dense.uncapped_total as f64,
            dense.uncapped_total as f64 / sparse.uncapped_total as f64
        );
    }

    // Sequential solve of a smaller lasso instance; the driver picks the
    // proximal host automatically and the solution comes out sparse.
    let (data, truth) = gen_linear(20_000, 20, (-5.0, 5.0), 4.0, 8)?;
    let model = Model::Lasso(LassoModel::new(1.0));
    let mut config = SequentialConfig::budget(1000, 2.0, 3);
    config.host.max_iters = 400;
    let result = run_sequential(&data, &model, &Hypothesis::zeros(20), &config)?;
    let zeros = result.beta_final.coords().iter().filter(|&&b| b == 0.0).count();
    println!(
        "lasso solve: loss {:.4}, {} of 20 coordinates exactly zero, {} segments",
        result.full_loss,
        zeros,
        result.segments.len()
    );
    let worst_truth_gap = result
        .beta_final
        .coords()
        .iter()
        .zip(&truth)
        .map(|(b, h)| (b - h).abs())
        .fold(0.0f64, f64::max)
        / truth.iter().map(|h| h.abs()).fold(0.0f64, f64::max);
    println!("largest coefficient gap vs the generator: {:.3} (shrinkage included)", worst_truth_gap);
    Ok(())
}
