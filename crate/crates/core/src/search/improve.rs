use crate::error::Result;
use crate::instance::Instance;
use crate::reconstruct::greedy_insert;
use crate::solution::{remove_customers, Solution};
use crate::SearchRng;

use super::{sa_accept, DeconstructionPolicy, InsertionOrder};

#[derive(Debug, Clone, Copy)]
pub struct StepParams {
    pub removals: usize,
    pub lambda: f64,
    pub rollouts: usize,
    pub reconstructions: usize,
    pub order: InsertionOrder,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    /// `s_K`, the solution after the last acceptance decision.
    pub current: Solution,
    /// Cheapest solution held at any point during the step.
    pub best: Solution,
}

/// One improvement step: all `K` plans are drawn from `s0` in a single
/// policy call, then applied one after another, each followed by `R`
/// reconstructions and an acceptance decision at temperature `lambda`.
pub fn improvement_step(
    inst: &Instance,
    s0: &Solution,
    policy: &dyn DeconstructionPolicy,
    params: &StepParams,
    rng: &mut SearchRng,
) -> Result<StepOutcome> {
    let mut current = s0.clone();
    let mut best = s0.clone();
    let m = params.removals.min(policy.selectable(inst, s0));
    if params.rollouts == 0 || m == 0 {
        return Ok(StepOutcome { current, best });
    }
    let plans = policy.propose(inst, s0, m, params.rollouts, rng)?;
    let reconstructions = params.reconstructions.max(1);
    for plan in &plans {
        let mut partial = remove_customers(inst, &current, &plan.customers)?;
        let mut candidate: Option<Solution> = None;
        for r in 0..reconstructions {
            if r > 0 || params.order == InsertionOrder::RandomOnly {
                partial.shuffle_order(rng);
            }
            let rebuilt = greedy_insert(inst, &partial);
            if candidate.as_ref().is_none_or(|c| rebuilt.cost() < c.cost()) {
                candidate = Some(rebuilt);
            }
        }
        let candidate = candidate.expect("at least one reconstruction");
        if sa_accept(current.cost(), candidate.cost(), params.lambda, rng) {
            current = candidate;
            if current.cost() < best.cost() {
                best = current.clone();
            }
        }
    }
    Ok(StepOutcome { current, best })
}
