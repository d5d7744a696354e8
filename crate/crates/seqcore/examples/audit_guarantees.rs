//! Audit the approximation guarantees of a local coreset: relative loss
//! preservation and coordinate-wise gradient preservation over random
//! hypotheses inside the trust ball.
//!
//! Run with: cargo run --release --example audit_guarantees

use seqcore::coreset::{
    budget_plan, build_local_coreset, partition_layers, theoretical_plan, uniform_baseline,
    TheoreticalParams,
};
use seqcore::data::Hypothesis;
use seqcore::diagnostics::{audit_coreset_loss, audit_gradient};
use seqcore::model::smoothness_constants;
use seqcore::models::{Model, RidgeModel};
use seqcore::optim::{run_host, HostConfig};
use seqcore::synth::gen_linear;

fn main() -> seqcore::Result<()> {
    let (data, _) = gen_linear(5000, 5, (-5.0, 5.0), 4.0, 3)?;
    let model = Model::Ridge(RidgeModel::new(0.01));

    // Anchor from a pilot fit on a small uniform sample.
    let pilot = uniform_baseline(data.n(), 250, 1)?;
    let anchor = run_host(
        &data,
        &model,
        &pilot,
        &Hypothesis::zeros(5),
        &HostConfig::default(),
        None,
        0,
    )?
    .beta;
    let radius = 0.5 * anchor.norm();
    let eps = 0.25;

    let partition = partition_layers(&data, &model, anchor.coords())?;
    let constants = smoothness_constants(&model, &data, anchor.coords(), radius)?;

    // The concentration-bound plan demands far more than n at this accuracy;
    // the caps report how much of that demand the data can actually satisfy.
    let plan = theoretical_plan(
        &partition,
        &constants,
        5,
        TheoreticalParams { eps, lambda_fail: None, sparsity_k: None, m_lower: None },
    )?;
    println!(
        "theoretical plan at eps {eps}: demanded {} samples, capped to {}",
        plan.uncapped_total, plan.total
    );
    let coreset = build_local_coreset(&partition, &plan, 11)?;
    let report = audit_coreset_loss(&data, &model, &coreset, &anchor, radius, eps, 100, 5)?;
    println!(
        "loss audit: {} probes, max relative deviation {:.4} -> {}",
        report.samples_tested,
        report.max_rel_loss_dev.unwrap(),
        if report.pass { "pass" } else { "fail" }
    );

    // A small budgeted coreset shows the real deviation profile: a 12x
    // compression cannot meet the same eps over the same ball, and the audit
    // quantifies by how much.
    let small_plan = budget_plan(&partition, &constants, 400, radius)?;
    let small = build_local_coreset(&partition, &small_plan, 13)?;
    let small_loss = audit_coreset_loss(&data, &model, &small, &anchor, radius, eps, 100, 5)?;
    println!(
        "budget-400 coreset: max relative loss deviation {:.4} over the same ball \
         (meets eps {eps}: {})",
        small_loss.max_rel_loss_dev.unwrap(),
        small_loss.pass
    );
    let small_grad = audit_gradient(&data, &model, &small, &anchor, radius, f64::INFINITY, 100, 6)?;
    println!(
        "budget-400 coreset: max coordinate gradient deviation {:.4}",
        small_grad.max_abs_grad_dev.unwrap()
    );
    Ok(())
}
