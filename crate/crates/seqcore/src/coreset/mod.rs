//! Local coreset construction: layer partitions, sample-size plans, and the
//! layered / uniform / importance samplers.

mod partition;
mod plan;
mod sample;

pub use partition::{ceil_log2, partition_layers, LayerPartition};
pub use plan::{
    budget_plan, ln_binomial, theoretical_layer_size, theoretical_plan, PlanParams, SizeMode,
    SizePlan, TheoreticalParams,
};
pub use sample::{
    build_local_coreset, importance_baseline, local_coreset_at, uniform_baseline,
};
