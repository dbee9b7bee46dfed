//! Core routing model and search machinery for neural deconstruction search.
//!
//! The crate covers the three supported problem variants (CVRP, VRPTW and
//! the prize-collecting PCVRP), greedy reconstruction of partial solutions,
//! handcrafted deconstruction policies and the augmented simulated annealing
//! driver that runs any [`DeconstructionPolicy`].

pub mod deconstruct;
pub mod error;
pub mod generate;
pub mod instance;
pub mod io;
pub mod reconstruct;
pub mod search;
pub mod solution;

pub use deconstruct::{heuristic_deconstruct, random_deconstruct, PlanSource, RemovalPlan};
pub use error::{CoreError, Result};
pub use generate::{CapacityProfile, GeneratorSpec, LocationMode};
pub use instance::{Instance, Variant};
pub use reconstruct::{best_insertion, greedy_insert, initial_solution, Insertion};
pub use search::{
    asa_search, create_augmentations, improvement_step, sa_accept, DeconstructionPolicy,
    HeuristicPolicy, RandomPolicy, SearchConfig, SearchOutcome, TraceRow,
};
pub use solution::{
    check_feasibility, objective, remove_customers, PartialSolution, Solution, Violation,
};

use rand::SeedableRng;

/// Random stream used throughout the solver. ChaCha keeps streams stable
/// across platforms and crate releases.
pub type SearchRng = rand_chacha::ChaCha8Rng;

/// Tolerance applied to capacity and time window comparisons.
pub const FEAS_EPS: f64 = 1e-9;

/// Derive an independent rng stream from a base seed and a stream index.
pub fn stream_rng(seed: u64, index: u64) -> SearchRng {
    SearchRng::seed_from_u64(mix_seed(seed, index))
}

/// SplitMix64 finalizer over the pair, so nearby (seed, index) pairs land far apart.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
