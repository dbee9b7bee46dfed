//! Test-time search: Metropolis acceptance, the K-plan improvement step,
//! isometric instance augmentations and the augmented simulated annealing
//! loop that exchanges solutions between augmentation replicas.

mod asa;
mod augment;
mod improve;

pub use asa::{asa_search, SearchOutcome, TraceRow};
pub use augment::{create_augmentations, dihedral};
pub use improve::{improvement_step, StepOutcome, StepParams};

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::deconstruct::{heuristic_deconstruct, random_deconstruct, RemovalPlan, DEFAULT_MAX_STRING};
use crate::error::{CoreError, Result};
use crate::instance::Instance;
use crate::solution::Solution;
use crate::SearchRng;

/// Source of removal plans for the improvement step.
pub trait DeconstructionPolicy: Sync {
    fn name(&self) -> &str;

    /// How many customers this policy may select from `sol`.
    fn selectable(&self, _inst: &Instance, sol: &Solution) -> usize {
        sol.n_visited()
    }

    /// Produce `k` removal plans of `m` customers each, all conditioned on `sol`.
    fn propose(
        &self,
        inst: &Instance,
        sol: &Solution,
        m: usize,
        k: usize,
        rng: &mut SearchRng,
    ) -> Result<Vec<RemovalPlan>>;
}

/// Adjacent string removal.
#[derive(Debug, Clone)]
pub struct HeuristicPolicy {
    pub max_string: usize,
}

impl Default for HeuristicPolicy {
    fn default() -> Self {
        HeuristicPolicy { max_string: DEFAULT_MAX_STRING }
    }
}

impl DeconstructionPolicy for HeuristicPolicy {
    fn name(&self) -> &str {
        "heuristic"
    }

    fn propose(&self, inst: &Instance, sol: &Solution, m: usize, k: usize, rng: &mut SearchRng) -> Result<Vec<RemovalPlan>> {
        (0..k).map(|_| heuristic_deconstruct(inst, sol, m, self.max_string, rng)).collect()
    }
}

/// Uniform random removal.
#[derive(Debug, Clone, Default)]
pub struct RandomPolicy;

impl DeconstructionPolicy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn propose(&self, inst: &Instance, sol: &Solution, m: usize, k: usize, rng: &mut SearchRng) -> Result<Vec<RemovalPlan>> {
        (0..k).map(|_| random_deconstruct(inst, sol, m, rng)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum PolicyChoice {
    Neural { checkpoint: PathBuf },
    Heuristic,
    Random,
}

/// Order in which removed customers are reinserted across the `R`
/// reconstructions of one deconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InsertionOrder {
    /// First reconstruction follows the plan order, the rest are shuffled.
    PolicyThenRandom,
    /// All reconstructions use shuffled orders.
    RandomOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchConfig {
    pub max_iter: usize,
    pub augmentations: usize,
    pub rollouts: usize,
    pub reconstructions: usize,
    pub removals: usize,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub delta: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub seed: u64,
    pub policy: PolicyChoice,
    pub insertion_order: InsertionOrder,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_iter: 1000,
            augmentations: 8,
            rollouts: 200,
            reconstructions: 5,
            removals: 15,
            lambda_start: 0.1,
            lambda_end: 0.001,
            delta: 15.0,
            time_limit: None,
            seed: 0,
            policy: PolicyChoice::Heuristic,
            insertion_order: InsertionOrder::PolicyThenRandom,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(CoreError::Config(m.to_string()));
        if self.augmentations == 0 {
            return bad("augmentations must be at least 1");
        }
        if self.reconstructions == 0 {
            return bad("reconstructions must be at least 1");
        }
        if !(self.lambda_start >= 0.0 && self.lambda_end >= 0.0) {
            return bad("temperatures must be non-negative");
        }
        if self.lambda_end > self.lambda_start {
            return bad("lambda_end must not exceed lambda_start");
        }
        if !(self.delta >= 0.0) {
            return bad("delta must be non-negative");
        }
        if let Some(t) = self.time_limit {
            if !(t >= 0.0) {
                return bad("time limit must be non-negative");
            }
        }
        Ok(())
    }

    /// Per-iteration factor taking `lambda_start` to `lambda_end` in `max_iter` steps.
    pub fn lambda_decay(&self) -> f64 {
        if self.lambda_start <= 0.0 || self.max_iter == 0 {
            return 1.0;
        }
        (self.lambda_end / self.lambda_start).powf(1.0 / self.max_iter as f64)
    }
}

/// Metropolis acceptance: improvements and ties always pass, a worsening
/// by `d` passes with probability `exp(-d / lambda)`.
pub fn sa_accept<R: Rng + ?Sized>(current: f64, candidate: f64, lambda: f64, rng: &mut R) -> bool {
    if candidate <= current {
        return true;
    }
    if lambda <= 0.0 {
        return false;
    }
    rng.random::<f64>() < (-(candidate - current) / lambda).exp()
}
