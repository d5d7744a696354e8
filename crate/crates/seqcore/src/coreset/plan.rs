//! Per-layer sample-size plans.
//!
//! Two modes: `theoretical` evaluates the concentration-bound sample sizes
//! (Hoeffding per layer, union bound over layers and a grid discretization of
//! the ball, with the sparse-hypothesis variant counting only k-dimensional
//! subspaces), `budget` splits a user-fixed total across layers proportionally
//! to the same per-layer range factors.

use serde::{Deserialize, Serialize};

use crate::coreset::partition::LayerPartition;
use crate::error::{Error, Result};
use crate::model::SmoothnessConstants;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeMode {
    Theoretical,
    Budget,
}

/// Parameters the plan was derived from, kept for reporting.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PlanParams {
    pub eps: Option<f64>,
    pub radius: f64,
    pub l: f64,
    pub m: f64,
    pub m_lower: Option<f64>,
    pub lambda_fail: Option<f64>,
    pub sparsity_k: Option<usize>,
    pub budget: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SizePlan {
    pub mode: SizeMode,
    /// Target count per layer, empty layers get zero. Already capped at the
    /// layer population.
    pub per_layer: Vec<usize>,
    pub total: usize,
    /// Sum of the uncapped theoretical sizes (saturating); equals `total` in
    /// budget mode.
    pub uncapped_total: u64,
    pub params: PlanParams,
}

/// Hoeffding sample size for layer `j`: half the squared per-layer value range
/// over delta^2, times ln(2/lambda). Layer 0 ranges over [0, H + MR + LR^2/2];
/// layer j >= 1 over (2^(j-1)H - MR - LR^2/2, 2^j H + MR + LR^2/2].
pub fn theoretical_layer_size(
    j: usize,
    h: f64,
    l: f64,
    m: f64,
    radius: f64,
    delta: f64,
    lambda_fail: f64,
) -> u64 {
    layer_size_with_log(j, h, l, m, radius, delta, (2.0 / lambda_fail).ln())
}

fn layer_range(j: usize, h: f64, l: f64, m: f64, radius: f64) -> f64 {
    if j == 0 {
        h + 0.5 * l * radius * radius + m * radius
    } else {
        exp2i(j as i32 - 1) * h + l * radius * radius + 2.0 * m * radius
    }
}

fn layer_size_with_log(
    j: usize,
    h: f64,
    l: f64,
    m: f64,
    radius: f64,
    delta: f64,
    ln_two_over_lambda: f64,
) -> u64 {
    let range = layer_range(j, h, l, m, radius);
    let value = 0.5 * (range / delta) * (range / delta) * ln_two_over_lambda;
    if !value.is_finite() || value >= u64::MAX as f64 {
        u64::MAX
    } else {
        value.ceil() as u64
    }
}

// 2^e as f64 (exact for |e| < 1023).
fn exp2i(e: i32) -> f64 {
    f64::from_bits(((1023 + e) as u64) << 52)
}

/// ln C(n, k) via a product-free running sum; exact enough for size plans.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    (1..=k).map(|i| (((n - k + i) as f64) / i as f64).ln()).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct TheoreticalParams {
    pub eps: f64,
    /// Failure probability; defaults to 1/n when `None`.
    pub lambda_fail: Option<f64>,
    /// Restrict hypotheses to k non-zero coordinates (sparse optimization).
    pub sparsity_k: Option<usize>,
    /// Lower bound on the in-ball risk minimum; derived from the anchor
    /// envelope when absent.
    pub m_lower: Option<f64>,
}

/// Evaluate the full theoretical plan for a partition.
///
/// Per-layer deltas are `eps1 * 2^(j-1) * H` with
/// `eps1 = 2 m_lower eps / (7 H)`; the failure probability is divided by
/// `(N+1) |G|` where `|G|` is the grid count `(2 sqrt(pi e) / eps2)^dim`
/// (dense) or `C(dim, k) (2 sqrt(pi e)/eps2)^k` (sparse). Sizes are capped at
/// the layer populations.
pub fn theoretical_plan(
    partition: &LayerPartition,
    constants: &SmoothnessConstants,
    dim: usize,
    params: TheoreticalParams,
) -> Result<SizePlan> {
    let h = partition.h();
    let n = partition.n();
    let radius = constants.radius;
    let (l, m) = (constants.l, constants.m_max);

    if !(params.eps > 0.0 && params.eps < 1.0) {
        return Err(Error::Parameter(format!("eps {} outside (0,1)", params.eps)));
    }
    let lambda_fail = params.lambda_fail.unwrap_or(1.0 / n as f64);
    if !(lambda_fail > 0.0 && lambda_fail < 1.0) {
        return Err(Error::Parameter(format!("lambda_fail {lambda_fail} outside (0,1)")));
    }
    if let Some(k) = params.sparsity_k {
        if k == 0 || k > dim {
            return Err(Error::Parameter(format!("sparsity k={k} outside 1..={dim}")));
        }
    }
    let m_lower = match params.m_lower {
        Some(v) if v > 0.0 => v,
        Some(v) => return Err(Error::Parameter(format!("m_lower {v} must be positive"))),
        // Envelope lower bound on the in-ball risk, floored at a tenth of the
        // anchor risk.
        None => (h - constants.m_mean * radius - 0.5 * l * radius * radius).max(0.1 * h),
    };

    let eps1 = 2.0 * m_lower * params.eps / (7.0 * h);
    let m_prime = constants.m_prime_bound;
    // Grid cell scale eps2: solves eps2 M' R + L eps2^2 R^2 / 2 = eps1 H.
    let ln_cell = if radius > 0.0 {
        let disc = (m_prime * m_prime + 2.0 * l * eps1 * h).sqrt();
        if disc + m_prime > 0.0 {
            let eps2 = 2.0 * eps1 * h / (radius * (disc + m_prime));
            (2.0 * (std::f64::consts::PI * std::f64::consts::E).sqrt() / eps2)
                .ln()
                .max(0.0)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let ln_grid = match params.sparsity_k {
        None => dim as f64 * ln_cell,
        Some(k) => ln_binomial(dim, k) + k as f64 * ln_cell,
    };
    let layers = partition.num_layers();
    let ln_two_over_lambda =
        std::f64::consts::LN_2 - lambda_fail.ln() + (layers as f64).ln() + ln_grid;

    let mut per_layer = vec![0usize; layers];
    let mut uncapped_total: u64 = 0;
    for (j, layer) in partition.layers().iter().enumerate() {
        if layer.is_empty() {
            continue;
        }
        let delta = eps1 * exp2i(j as i32 - 1) * h;
        let raw = layer_size_with_log(j, h, l, m, radius, delta, ln_two_over_lambda);
        uncapped_total = uncapped_total.saturating_add(raw);
        per_layer[j] = (raw.min(layer.len() as u64) as usize).max(1);
    }
    let total = per_layer.iter().sum();
    Ok(SizePlan {
        mode: SizeMode::Theoretical,
        per_layer,
        total,
        uncapped_total,
        params: PlanParams {
            eps: Some(params.eps),
            radius,
            l,
            m,
            m_lower: Some(m_lower),
            lambda_fail: Some(lambda_fail),
            sparsity_k: params.sparsity_k,
            budget: None,
        },
    })
}

/// Split a fixed budget across non-empty layers proportionally to the squared
/// per-layer range factors, respecting one-per-layer floors and population
/// caps; overflow redistributes to the remaining layers.
pub fn budget_plan(
    partition: &LayerPartition,
    constants: &SmoothnessConstants,
    budget: usize,
    radius: f64,
) -> Result<SizePlan> {
    let n = partition.n();
    if budget == 0 || budget > n {
        return Err(Error::Parameter(format!("budget {budget} outside 1..={n}")));
    }
    let non_empty = partition.non_empty_layers();
    if budget < non_empty {
        return Err(Error::InfeasibleBudget { budget, layers: non_empty });
    }
    let h = partition.h();
    let (l, m) = (constants.l, constants.m_max);
    let layers = partition.num_layers();

    let caps: Vec<usize> = partition.layer_sizes();
    let ratios: Vec<f64> = (0..layers)
        .map(|j| {
            if caps[j] == 0 {
                0.0
            } else {
                let r = layer_range(j, h, l, m, radius);
                (r * r).max(f64::MIN_POSITIVE)
            }
        })
        .collect();

    let per_layer = allocate_proportional(budget, &caps, &ratios);
    debug_assert_eq!(per_layer.iter().sum::<usize>(), budget);
    Ok(SizePlan {
        mode: SizeMode::Budget,
        per_layer,
        total: budget,
        uncapped_total: budget as u64,
        params: PlanParams {
            eps: None,
            radius,
            l,
            m,
            m_lower: None,
            lambda_fail: None,
            sparsity_k: None,
            budget: Some(budget),
        },
    })
}

/// Proportional allocation with floors of one and caps, exact total.
/// Repeatedly fixes layers whose ideal share violates a bound, then
/// integerizes the rest by largest remainder (ties to the lower index).
fn allocate_proportional(budget: usize, caps: &[usize], ratios: &[f64]) -> Vec<usize> {
    let m = caps.len();
    let mut alloc = vec![0usize; m];
    let mut fixed = vec![false; m];
    for j in 0..m {
        if caps[j] == 0 {
            fixed[j] = true;
        }
    }
    let mut remaining = budget;
    loop {
        let active: Vec<usize> = (0..m).filter(|&j| !fixed[j]).collect();
        if active.is_empty() {
            break;
        }
        let total_ratio: f64 = active.iter().map(|&j| ratios[j]).sum();
        let share = |j: usize| -> f64 {
            if total_ratio > 0.0 {
                remaining as f64 * ratios[j] / total_ratio
            } else {
                remaining as f64 / active.len() as f64
            }
        };
        // Cap violations first: pin them and hand the rest to other layers.
        let over: Vec<usize> = active.iter().copied().filter(|&j| share(j) > caps[j] as f64).collect();
        if !over.is_empty() {
            for j in over {
                alloc[j] = caps[j];
                remaining -= caps[j];
                fixed[j] = true;
            }
            continue;
        }
        let under: Vec<usize> = active.iter().copied().filter(|&j| share(j) < 1.0).collect();
        if !under.is_empty() {
            for j in under {
                alloc[j] = 1;
                remaining -= 1;
                fixed[j] = true;
            }
            continue;
        }
        // All shares within [1, cap]: integerize by largest remainder.
        let mut base_total = 0usize;
        let mut fracs: Vec<(usize, f64)> = Vec::with_capacity(active.len());
        for &j in &active {
            let s = share(j);
            let b = (s.floor() as usize).clamp(1, caps[j]);
            alloc[j] = b;
            base_total += b;
            fracs.push((j, s - b as f64));
        }
        let mut leftover = remaining.saturating_sub(base_total);
        // Hand out remainder units, biggest fraction first, while caps allow.
        fracs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        while leftover > 0 {
            let mut progressed = false;
            for &(j, _) in &fracs {
                if leftover == 0 {
                    break;
                }
                if alloc[j] < caps[j] {
                    alloc[j] += 1;
                    leftover -= 1;
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        break;
    }
    alloc
}
