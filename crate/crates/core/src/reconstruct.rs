//! Start solutions and sequential greedy reinsertion.

use crate::instance::{Instance, Variant};
use crate::solution::{objective_parts, route_load, schedule, PartialSolution, Solution};
use crate::FEAS_EPS;

/// Where a customer goes during reconstruction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InsertionTarget {
    /// Insert before stop `position` of route `route` (`position == len`
    /// appends after the last stop).
    Route { route: usize, position: usize },
    NewTour,
    /// Leave the customer unvisited (PCVRP only).
    Skip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Insertion {
    pub target: InsertionTarget,
    pub delta: f64,
}

/// One singleton route per customer.
pub fn initial_solution(inst: &Instance) -> Solution {
    let routes: Vec<Vec<usize>> = (1..=inst.n_customers()).map(|c| vec![c]).collect();
    let cost = objective_parts(inst, &routes, &[]);
    Solution::from_raw(routes, Vec::new(), cost)
}

/// Cheapest feasible position for `customer` across all existing routes.
///
/// Every gap of every route is tried, including before the first and after
/// the last stop. Ties resolve to the lowest `(route, position)`. Returns
/// `None` when no route can take the customer.
pub fn best_insertion(inst: &Instance, routes: &[Vec<usize>], customer: usize) -> Option<Insertion> {
    let q = inst.demand(customer);
    let tw = inst.variant() == Variant::Vrptw;
    let mut best: Option<Insertion> = None;
    let mut starts = Vec::new();
    for (r, route) in routes.iter().enumerate() {
        if route_load(inst, route) + q > inst.capacity() + FEAS_EPS {
            continue;
        }
        if tw {
            schedule(inst, route, &mut starts);
        }
        for pos in 0..=route.len() {
            let prev = if pos == 0 { 0 } else { route[pos - 1] };
            let next = if pos == route.len() { 0 } else { route[pos] };
            let delta = inst.distance(prev, customer) + inst.distance(customer, next)
                - inst.distance(prev, next);
            if best.is_some_and(|b| delta >= b.delta) {
                continue;
            }
            if tw && !time_feasible(inst, route, &starts, pos, customer) {
                continue;
            }
            best = Some(Insertion { target: InsertionTarget::Route { route: r, position: pos }, delta });
        }
    }
    best
}

/// Re-simulate the route from the insertion point onward. Once a stop's
/// service start is no later than in the original schedule, the remainder
/// of the (feasible) route is unchanged and the check can stop.
fn time_feasible(inst: &Instance, route: &[usize], starts: &[f64], pos: usize, customer: usize) -> bool {
    let (prev, mut t) = if pos == 0 {
        (0, inst.tw_open(0))
    } else {
        let p = route[pos - 1];
        (p, starts[pos - 1] + inst.service(p))
    };
    let start = (t + inst.distance(prev, customer)).max(inst.tw_open(customer));
    if start > inst.tw_close(customer) + FEAS_EPS {
        return false;
    }
    t = start + inst.service(customer);
    let mut last = customer;
    for (j, &c) in route.iter().enumerate().skip(pos) {
        let start = (t + inst.distance(last, c)).max(inst.tw_open(c));
        if start <= starts[j] {
            return true;
        }
        if start > inst.tw_close(c) + FEAS_EPS {
            return false;
        }
        t = start + inst.service(c);
        last = c;
    }
    t + inst.distance(last, 0) <= inst.tw_close(0) + FEAS_EPS
}

/// Decide the placement of one customer given the current routes.
pub fn choose_insertion(inst: &Instance, routes: &[Vec<usize>], customer: usize) -> Insertion {
    let best = best_insertion(inst, routes, customer);
    let new_tour = 2.0 * inst.distance(0, customer);
    if inst.variant() == Variant::Pcvrp {
        let cheapest = best.map_or(new_tour, |b| b.delta.min(new_tour));
        if cheapest > inst.prize(customer) {
            return Insertion { target: InsertionTarget::Skip, delta: 0.0 };
        }
    }
    best.unwrap_or(Insertion { target: InsertionTarget::NewTour, delta: new_tour })
}

/// Reinsert the removed customers one by one in list order.
pub fn greedy_insert(inst: &Instance, partial: &PartialSolution) -> Solution {
    let mut routes = partial.routes.clone();
    let mut unvisited = partial.unvisited.clone();
    let mut cost = partial.cost;
    for &c in &partial.removed {
        let ins = choose_insertion(inst, &routes, c);
        match ins.target {
            InsertionTarget::Route { route, position } => routes[route].insert(position, c),
            InsertionTarget::NewTour => routes.push(vec![c]),
            InsertionTarget::Skip => {
                unvisited.push(c);
                continue;
            }
        }
        cost += ins.delta - inst.prize(c);
    }
    unvisited.sort_unstable();
    Solution::from_raw(routes, unvisited, cost)
}
