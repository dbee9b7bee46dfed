#![allow(dead_code)]

use nds_core::{greedy_insert, initial_solution, remove_customers, GeneratorSpec, Instance, Solution, Variant};
use nds_policy::{Model, ModelConfig};

pub fn mini(variant: Variant, removals: usize) -> ModelConfig {
    ModelConfig { variant, embed_dim: 8, heads: 2, ff_dim: 16, removals, ..Default::default() }
}

/// A solution with multi-customer routes: every customer greedily
/// reinserted into an empty plan.
pub fn packed_solution(inst: &Instance) -> Solution {
    let start = initial_solution(inst);
    let all: Vec<usize> = (1..=inst.n_customers()).collect();
    greedy_insert(inst, &remove_customers(inst, &start, &all).unwrap())
}

pub fn instance(variant: Variant, n: usize, seed: u64) -> Instance {
    GeneratorSpec::new(variant, n, seed).generate().unwrap()
}

/// Central-difference check of `f`'s gradient over the parameter indices in
/// `range`; returns the largest relative error.
pub fn max_fd_error(
    params: &[f64],
    grad: &[f64],
    range: std::ops::Range<usize>,
    f: impl Fn(&[f64]) -> f64,
) -> f64 {
    let eps = 1e-6;
    let mut worst = 0.0f64;
    let mut p = params.to_vec();
    for i in range {
        let keep = p[i];
        p[i] = keep + eps;
        let hi = f(&p);
        p[i] = keep - eps;
        let lo = f(&p);
        p[i] = keep;
        let num = (hi - lo) / (2.0 * eps);
        let denom = grad[i].abs().max(num.abs()).max(1e-5);
        worst = worst.max((grad[i] - num).abs() / denom);
    }
    worst
}

pub fn view_range(model: &Model, name: &str) -> std::ops::Range<usize> {
    let v = model.view(name).unwrap_or_else(|| panic!("no view {name}"));
    v.offset..v.offset + v.len()
}
