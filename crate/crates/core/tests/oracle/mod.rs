//! Independent reference implementations used to cross-check the solver.
//! Everything here is written from the textual problem rules and shares no
//! code with the library beyond reading instance fields.

#![allow(dead_code)]

use nds_core::{
    greedy_insert, initial_solution, random_deconstruct, remove_customers, Instance, PartialSolution,
    SearchRng, Solution, Variant,
};
use rand::seq::SliceRandom;
use rand::Rng;

pub const EPS: f64 = 1e-9;

pub fn naive_distance(inst: &Instance, i: usize, j: usize) -> f64 {
    let a = inst.coords()[i];
    let b = inst.coords()[j];
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    (dx * dx + dy * dy).sqrt()
}

pub fn route_length(inst: &Instance, route: &[usize]) -> f64 {
    if route.is_empty() {
        return 0.0;
    }
    let mut nodes = vec![0];
    nodes.extend_from_slice(route);
    nodes.push(0);
    nodes.windows(2).map(|w| naive_distance(inst, w[0], w[1])).sum()
}

pub fn objective(inst: &Instance, routes: &[Vec<usize>]) -> f64 {
    let travel: f64 = routes.iter().map(|r| route_length(inst, r)).sum();
    match inst.variant() {
        Variant::Pcvrp => travel - routes.iter().flatten().map(|&c| inst.prize(c)).sum::<f64>(),
        _ => travel,
    }
}

/// Kinds of rule breaks, in the order the route simulator finds them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Breach {
    Load,
    Late(usize),
    Return,
}

pub fn route_breaches(inst: &Instance, route: &[usize]) -> Vec<Breach> {
    let mut found = Vec::new();
    let load: f64 = route.iter().map(|&c| inst.demand(c)).sum();
    if load > inst.capacity() + EPS {
        found.push(Breach::Load);
    }
    if inst.variant() != Variant::Vrptw {
        return found;
    }
    let mut clock = inst.tw_open(0);
    let mut at = 0;
    for &c in route {
        clock += naive_distance(inst, at, c);
        if clock < inst.tw_open(c) {
            clock = inst.tw_open(c);
        }
        if clock > inst.tw_close(c) + EPS {
            found.push(Breach::Late(c));
        }
        clock += inst.service(c);
        at = c;
    }
    clock += naive_distance(inst, at, 0);
    if clock > inst.tw_close(0) + EPS {
        found.push(Breach::Return);
    }
    found
}

pub fn breaches(inst: &Instance, routes: &[Vec<usize>]) -> Vec<(usize, Breach)> {
    routes
        .iter()
        .enumerate()
        .flat_map(|(r, route)| route_breaches(inst, route).into_iter().map(move |b| (r, b)))
        .collect()
}

pub fn library_breaches(inst: &Instance, sol: &Solution) -> Vec<(usize, Breach)> {
    nds_core::check_feasibility(inst, sol)
        .into_iter()
        .map(|v| match v {
            nds_core::Violation::Capacity { route, .. } => (route, Breach::Load),
            nds_core::Violation::TimeWindow { route, customer, .. } => (route, Breach::Late(customer)),
            nds_core::Violation::DepotReturn { route, .. } => (route, Breach::Return),
        })
        .collect()
}

/// Try every gap of every route by building the new route and simulating it
/// in full. Returns (route, position, delta) of the cheapest feasible one.
pub fn best_insertion(inst: &Instance, routes: &[Vec<usize>], customer: usize) -> Option<(usize, usize, f64)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (r, route) in routes.iter().enumerate() {
        for pos in 0..=route.len() {
            let mut trial = route.clone();
            trial.insert(pos, customer);
            if !route_breaches(inst, &trial).is_empty() {
                continue;
            }
            let delta = route_length(inst, &trial) - route_length(inst, route);
            if best.is_none_or(|b| delta < b.2) {
                best = Some((r, pos, delta));
            }
        }
    }
    best
}

/// Random arrangement of all customers: a shuffled sequence cut at random
/// points. For PCVRP a random subset is left unvisited. No feasibility is
/// enforced.
pub fn random_arrangement(inst: &Instance, rng: &mut SearchRng) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = inst.n_customers();
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut unvisited = Vec::new();
    if inst.variant() == Variant::Pcvrp {
        let keep = rng.random_range(0..=n);
        unvisited = order.split_off(keep);
        unvisited.sort_unstable();
    }
    let mut routes = Vec::new();
    let mut cur = Vec::new();
    for c in order {
        cur.push(c);
        if rng.random_bool(0.3) {
            routes.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        routes.push(cur);
    }
    (routes, unvisited)
}

/// A feasible solution with multi-customer routes, produced by repeated
/// random removal and greedy reinsertion from the singleton start.
pub fn feasible_solution(inst: &Instance, rounds: usize, m: usize, rng: &mut SearchRng) -> Solution {
    let mut s = initial_solution(inst);
    for _ in 0..rounds {
        let m = m.min(s.n_visited());
        if m == 0 {
            break;
        }
        let plan = random_deconstruct(inst, &s, m, rng).unwrap();
        let next = greedy_insert(inst, &remove_customers(inst, &s, &plan.customers).unwrap());
        if next.cost() <= s.cost() {
            s = next;
        }
    }
    s
}

pub fn random_partial(inst: &Instance, sol: &Solution, m: usize, rng: &mut SearchRng) -> PartialSolution {
    let plan = random_deconstruct(inst, sol, m.min(sol.n_visited()), rng).unwrap();
    remove_customers(inst, sol, &plan.customers).unwrap()
}

/// Minimum CVRP cost by enumerating every set of routes: each customer in
/// turn either opens a new route or is placed at any position of an
/// existing one, which generates each arrangement exactly once.
pub fn enumerate_optimum(inst: &Instance) -> (Vec<Vec<usize>>, f64) {
    fn rec(inst: &Instance, c: usize, routes: &mut Vec<Vec<usize>>, best: &mut (Vec<Vec<usize>>, f64)) {
        if c > inst.n_customers() {
            if routes.iter().all(|r| route_breaches(inst, r).is_empty()) {
                let cost = objective(inst, routes);
                if cost < best.1 {
                    *best = (routes.clone(), cost);
                }
            }
            return;
        }
        routes.push(vec![c]);
        rec(inst, c + 1, routes, best);
        routes.pop();
        for r in 0..routes.len() {
            for pos in 0..=routes[r].len() {
                routes[r].insert(pos, c);
                rec(inst, c + 1, routes, best);
                routes[r].remove(pos);
            }
        }
    }
    let mut best = (Vec::new(), f64::INFINITY);
    rec(inst, 1, &mut Vec::new(), &mut best);
    best
}

/// Multiset check: every customer appears exactly once across the parts.
pub fn is_partition(n: usize, parts: &[&[usize]]) -> bool {
    let mut all: Vec<usize> = parts.iter().flat_map(|p| p.iter().copied()).collect();
    all.sort_unstable();
    all == (1..=n).collect::<Vec<_>>()
}
