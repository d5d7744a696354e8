//! Coreset-accelerated empirical risk minimization.
//!
//! Large training sets are compressed into sparse reweightings ("coresets")
//! that preserve the empirical risk — and its gradient — inside a ball around
//! an anchor hypothesis. Points are bucketed into geometric loss layers at the
//! anchor and sampled uniformly within each layer, so no sensitivity scores or
//! pseudo-dimension bounds are ever needed. A sequential driver then chains
//! such local coresets along the optimization trajectory: the host solver runs
//! on the current coreset until it either stabilizes or reaches the ball
//! boundary, at which point the coreset is rebuilt at the new anchor.
//!
//! The crate ships four built-in models (ridge, lasso, logistic, Gaussian
//! mixtures), gradient-descent / proximal / subgradient / EM hosts, uniform
//! and importance-sampling baselines, audits for the approximation guarantees,
//! and a benchmark harness with deterministic seeding. See the `examples/`
//! directory for runnable walkthroughs of each capability, and the `seqcore`
//! binary for the command-line harness.

pub mod coreset;
pub mod csvio;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod models;
pub mod optim;
pub mod risk;
pub mod seeds;
pub mod sequential;
pub mod sum;
pub mod synth;

pub use coreset::{
    budget_plan, build_local_coreset, importance_baseline, partition_layers, theoretical_plan,
    uniform_baseline, LayerPartition, SizePlan, TheoreticalParams,
};
pub use data::{Coreset, Dataset, Hypothesis, Provenance};
pub use diagnostics::{audit_coreset_loss, audit_gradient, check_claim1, error_beta, purity};
pub use error::{Error, Result};
pub use model::{smoothness_constants, LossModel, LpPenalty, SmoothnessConstants};
pub use models::{GmmModel, LassoModel, LogisticModel, Model, RidgeModel};
pub use optim::{HostConfig, StepSize};
pub use risk::{full_gradient, full_risk, weighted_gradient, weighted_risk};
pub use sequential::{
    boundary_reached, one_shot_solve, run_host_direct, run_sequential, SequentialConfig, SizeSpec,
    SolveResult, Termination,
};
