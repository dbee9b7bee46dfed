use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::instance::Instance;
use crate::reconstruct::initial_solution;
use crate::solution::{check_feasibility, Solution};
use crate::{stream_rng, SearchRng};

use super::{create_augmentations, improvement_step, DeconstructionPolicy, SearchConfig, StepParams};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub lambda: f64,
    pub best_cost: f64,
    pub mean_cost: f64,
    pub elapsed_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    /// Best feasible solution observed, costed on the original instance.
    pub best: Solution,
    pub trace: Vec<TraceRow>,
    pub iterations: usize,
    /// Number of replica replacements performed by the exchange step.
    pub exchanges: usize,
    pub final_lambda: f64,
    pub elapsed_seconds: f64,
}

struct Replica {
    view: Instance,
    solution: Solution,
    rng: SearchRng,
}

const EXCHANGE_STREAM: u64 = 0;
const AUGMENT_STREAM: u64 = 1;
const REPLICA_STREAM_BASE: u64 = 16;

/// Augmented simulated annealing over `config.augmentations` isometric views.
///
/// Each iteration runs one improvement step per replica, then replaces every
/// replica costlier than `cost* + lambda * delta` with a uniformly chosen
/// replica below that threshold (the incumbent minimum always qualifies).
/// The temperature decays geometrically from `lambda_start` to `lambda_end`
/// over `max_iter` iterations, independent of any wall-clock limit.
pub fn asa_search(inst: &Instance, config: &SearchConfig, policy: &dyn DeconstructionPolicy) -> Result<SearchOutcome> {
    config.validate()?;
    let start = Instant::now();
    let mut exchange_rng = stream_rng(config.seed, EXCHANGE_STREAM);
    let views = create_augmentations(inst, config.augmentations, &mut stream_rng(config.seed, AUGMENT_STREAM));
    let mut replicas: Vec<Replica> = views
        .into_iter()
        .enumerate()
        .map(|(a, view)| {
            let solution = initial_solution(&view);
            Replica { view, solution, rng: stream_rng(config.seed, REPLICA_STREAM_BASE + a as u64) }
        })
        .collect();

    let mut best = initial_solution(inst);
    let mut lambda = config.lambda_start;
    let decay = config.lambda_decay();
    let mut trace = Vec::with_capacity(config.max_iter.min(1 << 16));
    let mut exchanges = 0;
    let mut iterations = 0;

    for iteration in 1..=config.max_iter {
        if let Some(limit) = config.time_limit {
            if start.elapsed().as_secs_f64() >= limit {
                break;
            }
        }
        let params = StepParams {
            removals: config.removals,
            lambda,
            rollouts: config.rollouts,
            reconstructions: config.reconstructions,
            order: config.insertion_order,
        };
        let step_bests: Vec<Solution> = replicas
            .par_iter_mut()
            .map(|r| {
                let out = improvement_step(&r.view, &r.solution, policy, &params, &mut r.rng)?;
                r.solution = out.current;
                Ok(out.best)
            })
            .collect::<Result<_>>()?;

        for mut cand in step_bests {
            cand.refresh_cost(inst);
            if cand.cost() < best.cost() && check_feasibility(inst, &cand).is_empty() {
                best = cand;
            }
        }

        let costs: Vec<f64> = replicas
            .iter()
            .map(|r| {
                let mut s = r.solution.clone();
                s.refresh_cost(inst);
                s.cost()
            })
            .collect();
        for (r, &c) in replicas.iter().zip(&costs) {
            if c < best.cost() && check_feasibility(inst, &r.solution).is_empty() {
                best = r.solution.clone();
                best.refresh_cost(inst);
            }
        }
        let (argmin, cost_star) = costs
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, c)| if c < acc.1 { (i, c) } else { acc });
        let mean_cost = costs.iter().sum::<f64>() / costs.len() as f64;
        let thresh = cost_star + lambda * config.delta;
        let donors: Vec<usize> = (0..costs.len()).filter(|&i| costs[i] < thresh || i == argmin).collect();
        let snapshot: Vec<Solution> = donors.iter().map(|&i| replicas[i].solution.clone()).collect();
        for (a, replica) in replicas.iter_mut().enumerate() {
            if costs[a] > thresh {
                let pick = exchange_rng.random_range(0..snapshot.len());
                replica.solution = snapshot[pick].clone();
                replica.solution.refresh_cost(&replica.view);
                exchanges += 1;
            }
        }

        trace.push(TraceRow {
            iteration,
            lambda,
            best_cost: best.cost(),
            mean_cost,
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
        iterations = iteration;
        lambda *= decay;
    }

    Ok(SearchOutcome {
        best,
        trace,
        iterations,
        exchanges,
        final_lambda: lambda,
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}
