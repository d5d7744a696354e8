//! Build one local coreset by hand: partition the data into loss layers at an
//! anchor, plan per-layer sample counts for a fixed budget, draw the weighted
//! sample, and compare the compressed risk against the full risk.
//!
//! Run with: cargo run --release --example layered_coreset

use seqcore::coreset::{budget_plan, build_local_coreset, partition_layers};
use seqcore::diagnostics::check_claim1;
use seqcore::model::smoothness_constants;
use seqcore::models::{Model, RidgeModel};
use seqcore::synth::gen_linear;
use seqcore::{full_risk, weighted_risk};

fn main() -> seqcore::Result<()> {
    let (data, truth) = gen_linear(20_000, 8, (-5.0, 5.0), 4.0, 7)?;
    let model = Model::Ridge(RidgeModel::new(0.01));

    // Anchor: a deliberately rough hypothesis (half the generating one).
    let anchor: Vec<f64> = truth.iter().map(|h| 0.5 * h).collect();
    let radius = 1.0;

    let partition = partition_layers(&data, &model, &anchor)?;
    println!("anchor risk H = {:.4}, layers = {}", partition.h(), partition.num_layers());
    for (j, layer) in partition.layers().iter().enumerate() {
        if !layer.is_empty() {
            println!(
                "  layer {j:>2}: {:>6} points, losses <= {:.3}",
                layer.len(),
                partition.threshold(j)
            );
        }
    }
    println!("layer-mass inequality holds: {}", check_claim1(&partition));

    let constants = smoothness_constants(&model, &data, &anchor, radius)?;
    println!(
        "smoothness at the anchor: L = {:.2}, M = {:.2}, mean grad norm = {:.2}",
        constants.l, constants.m_max, constants.m_mean
    );

    let budget = 500;
    let plan = budget_plan(&partition, &constants, budget, radius)?;
    println!("budget {budget} split across layers: {:?}", plan.per_layer);

    let coreset = build_local_coreset(&partition, &plan, 42)?;
    println!(
        "coreset: {} non-zero weights summing to {:.6}",
        coreset.size(),
        coreset.weight_sum()
    );

    let full = full_risk(&data, &model, &anchor)?;
    let compressed = weighted_risk(&data, &model, &coreset, &anchor)?;
    println!(
        "risk at the anchor: full {:.5} vs compressed {:.5} ({:+.3}%)",
        full,
        compressed,
        100.0 * (compressed - full) / full
    );
    Ok(())
}
