use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::instance::{Instance, Variant};
use crate::FEAS_EPS;

/// A complete solution: routes over customers `1..=N` plus, for PCVRP, the
/// customers left unvisited. The objective is cached on construction and
/// kept current by every operation that produces a new solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    routes: Vec<Vec<usize>>,
    unvisited: Vec<usize>,
    cost: f64,
}

impl Solution {
    /// Validate the partition invariants and evaluate the objective.
    pub fn new(inst: &Instance, routes: Vec<Vec<usize>>, mut unvisited: Vec<usize>) -> Result<Self> {
        unvisited.sort_unstable();
        validate_partition(inst, &routes, &unvisited, &[])
            .map_err(CoreError::InvalidSolution)?;
        let cost = objective_parts(inst, &routes, &unvisited);
        Ok(Solution { routes, unvisited, cost })
    }

    pub(crate) fn from_raw(routes: Vec<Vec<usize>>, unvisited: Vec<usize>, cost: f64) -> Self {
        Solution { routes, unvisited, cost }
    }

    pub fn routes(&self) -> &[Vec<usize>] {
        &self.routes
    }

    /// Unvisited customers in ascending order (always empty for CVRP/VRPTW).
    pub fn unvisited(&self) -> &[usize] {
        &self.unvisited
    }

    /// Cached objective value.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn n_visited(&self) -> usize {
        self.routes.iter().map(Vec::len).sum()
    }

    /// Customers currently on a route, in route order.
    pub fn visited(&self) -> impl Iterator<Item = usize> + '_ {
        self.routes.iter().flatten().copied()
    }

    /// Recompute the cached objective from scratch.
    pub fn refresh_cost(&mut self, inst: &Instance) {
        self.cost = objective_parts(inst, &self.routes, &self.unvisited);
    }
}

/// A solution with some customers pulled out of their routes, waiting to be
/// reinserted in `removed` order.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialSolution {
    pub(crate) routes: Vec<Vec<usize>>,
    pub(crate) unvisited: Vec<usize>,
    pub(crate) removed: Vec<usize>,
    pub(crate) cost: f64,
}

impl PartialSolution {
    pub fn routes(&self) -> &[Vec<usize>] {
        &self.routes
    }

    pub fn unvisited(&self) -> &[usize] {
        &self.unvisited
    }

    pub fn removed(&self) -> &[usize] {
        &self.removed
    }

    /// Objective of the routes currently in place (removed customers
    /// contribute neither travel nor prize).
    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// Replace the reinsertion order. `order` must be a permutation of the
    /// current removed list.
    pub fn set_order(&mut self, order: &[usize]) -> Result<()> {
        let mut a = order.to_vec();
        let mut b = self.removed.clone();
        a.sort_unstable();
        b.sort_unstable();
        if a != b {
            return Err(CoreError::Contract(
                "reinsertion order is not a permutation of the removed customers".into(),
            ));
        }
        self.removed = order.to_vec();
        Ok(())
    }

    pub fn shuffle_order<R: rand::Rng + ?Sized>(&mut self, rng: &mut R) {
        use rand::seq::SliceRandom;
        self.removed.shuffle(rng);
    }
}

/// Feasibility violation found by [`check_feasibility`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    Capacity { route: usize, load: f64, capacity: f64 },
    TimeWindow { route: usize, customer: usize, start: f64, close: f64 },
    DepotReturn { route: usize, time: f64, close: f64 },
}

fn route_travel(inst: &Instance, route: &[usize]) -> f64 {
    let Some((&first, _)) = route.split_first() else {
        return 0.0;
    };
    let mut total = inst.distance(0, first);
    for w in route.windows(2) {
        total += inst.distance(w[0], w[1]);
    }
    total + inst.distance(*route.last().unwrap(), 0)
}

pub(crate) fn objective_parts(inst: &Instance, routes: &[Vec<usize>], _unvisited: &[usize]) -> f64 {
    let travel: f64 = routes.iter().map(|r| route_travel(inst, r)).sum();
    if inst.variant() == Variant::Pcvrp {
        let collected: f64 = routes.iter().flatten().map(|&c| inst.prize(c)).sum();
        travel - collected
    } else {
        travel
    }
}

/// Objective in minimization form: total Euclidean travel, minus collected
/// prizes for PCVRP. Waiting and service time never contribute.
pub fn objective(inst: &Instance, sol: &Solution) -> f64 {
    objective_parts(inst, &sol.routes, &sol.unvisited)
}

pub(crate) fn route_load(inst: &Instance, route: &[usize]) -> f64 {
    route.iter().map(|&c| inst.demand(c)).sum()
}

/// Forward schedule of a route: service start times per stop and the depot
/// return time. Departure from the depot happens at its window opening.
pub(crate) fn schedule(inst: &Instance, route: &[usize], starts: &mut Vec<f64>) -> f64 {
    starts.clear();
    let mut t = inst.tw_open(0);
    let mut prev = 0;
    for &c in route {
        let arrival = t + inst.distance(prev, c);
        let start = arrival.max(inst.tw_open(c));
        starts.push(start);
        t = start + inst.service(c);
        prev = c;
    }
    t + inst.distance(prev, 0)
}

/// Report every capacity violation and, for VRPTW, every late service start
/// and late depot return. An empty report means the solution is feasible.
pub fn check_feasibility(inst: &Instance, sol: &Solution) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut starts = Vec::new();
    for (r, route) in sol.routes.iter().enumerate() {
        let load = route_load(inst, route);
        if load > inst.capacity() + FEAS_EPS {
            out.push(Violation::Capacity { route: r, load, capacity: inst.capacity() });
        }
        if inst.variant() == Variant::Vrptw {
            let back = schedule(inst, route, &mut starts);
            for (&c, &start) in route.iter().zip(&starts) {
                if start > inst.tw_close(c) + FEAS_EPS {
                    out.push(Violation::TimeWindow {
                        route: r,
                        customer: c,
                        start,
                        close: inst.tw_close(c),
                    });
                }
            }
            if back > inst.tw_close(0) + FEAS_EPS {
                out.push(Violation::DepotReturn { route: r, time: back, close: inst.tw_close(0) });
            }
        }
    }
    out
}

pub(crate) fn validate_partition(
    inst: &Instance,
    routes: &[Vec<usize>],
    unvisited: &[usize],
    removed: &[usize],
) -> std::result::Result<(), String> {
    let n = inst.n_customers();
    let mut seen = vec![false; n + 1];
    let mut mark = |c: usize, what: &str| -> std::result::Result<(), String> {
        if c == 0 || c > n {
            return Err(format!("{what} references customer {c} outside 1..={n}"));
        }
        if seen[c] {
            return Err(format!("customer {c} appears more than once"));
        }
        seen[c] = true;
        Ok(())
    };
    for (r, route) in routes.iter().enumerate() {
        if route.is_empty() {
            return Err(format!("route {r} is empty"));
        }
        for &c in route {
            mark(c, "route")?;
        }
    }
    for &c in unvisited {
        mark(c, "unvisited set")?;
    }
    for &c in removed {
        mark(c, "removed list")?;
    }
    if let Some(c) = (1..=n).find(|&c| !seen[c]) {
        return Err(format!("customer {c} is missing"));
    }
    if !unvisited.is_empty() && inst.variant() != Variant::Pcvrp {
        return Err("only PCVRP solutions may leave customers unvisited".into());
    }
    Ok(())
}

/// Pull the listed customers out of `sol`. Neighbours are spliced together,
/// emptied routes are dropped and the removed list keeps the given order.
/// For PCVRP an unvisited customer may be listed; it moves to the removed
/// list so that reconstruction reconsiders it.
pub fn remove_customers(inst: &Instance, sol: &Solution, removal: &[usize]) -> Result<PartialSolution> {
    let n = inst.n_customers();
    let mut flagged = vec![false; n + 1];
    for &c in removal {
        if c == 0 || c > n {
            return Err(CoreError::InvalidRemoval(format!("customer {c} outside 1..={n}")));
        }
        if flagged[c] {
            return Err(CoreError::InvalidRemoval(format!("customer {c} listed twice")));
        }
        flagged[c] = true;
    }

    let mut cost = sol.cost;
    let pcvrp = inst.variant() == Variant::Pcvrp;
    let mut routes = Vec::with_capacity(sol.routes.len());
    let mut hits = 0;
    for route in &sol.routes {
        if !route.iter().any(|&c| flagged[c]) {
            routes.push(route.clone());
            continue;
        }
        let kept: Vec<usize> = route.iter().copied().filter(|&c| !flagged[c]).collect();
        hits += route.len() - kept.len();
        cost += route_travel(inst, &kept) - route_travel(inst, route);
        if pcvrp {
            cost += route.iter().filter(|&&c| flagged[c]).map(|&c| inst.prize(c)).sum::<f64>();
        }
        if !kept.is_empty() {
            routes.push(kept);
        }
    }
    let mut unvisited = Vec::with_capacity(sol.unvisited.len());
    for &c in &sol.unvisited {
        if flagged[c] {
            hits += 1;
        } else {
            unvisited.push(c);
        }
    }
    if hits != removal.len() {
        let set: BTreeSet<usize> = sol.visited().chain(sol.unvisited.iter().copied()).collect();
        let missing: Vec<usize> = removal.iter().copied().filter(|c| !set.contains(c)).collect();
        return Err(CoreError::InvalidRemoval(format!(
            "customers {missing:?} are not present in the solution"
        )));
    }
    Ok(PartialSolution { routes, unvisited, removed: removal.to_vec(), cost })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::InstanceParts;

    fn line_instance(variant: Variant) -> Instance {
        let n = 4;
        let coords = (0..=n).map(|i| [i as f64, 0.0]).collect();
        Instance::new(InstanceParts {
            variant,
            id: "line".into(),
            coords,
            demand: vec![1.0; n],
            capacity: 3.0,
            tw_open: None,
            tw_close: None,
            service: None,
            prize: (variant == Variant::Pcvrp).then(|| vec![1.5; n]),
        })
        .unwrap()
    }

    #[test]
    fn out_and_back() {
        let inst = Instance::new(InstanceParts {
            variant: Variant::Cvrp,
            id: "x".into(),
            coords: vec![[0.0, 0.0], [3.0, 4.0]],
            demand: vec![1.0],
            capacity: 1.0,
            tw_open: None,
            tw_close: None,
            service: None,
            prize: None,
        })
        .unwrap();
        let sol = Solution::new(&inst, vec![vec![1]], vec![]).unwrap();
        assert_eq!(sol.cost(), 10.0);
        assert_eq!(objective(&inst, &sol), 10.0);
    }

    #[test]
    fn pcvrp_all_unvisited_is_zero() {
        let inst = line_instance(Variant::Pcvrp);
        let sol = Solution::new(&inst, vec![], vec![1, 2, 3, 4]).unwrap();
        assert_eq!(sol.cost(), 0.0);
    }

    #[test]
    fn pcvrp_subtracts_prizes() {
        let inst = line_instance(Variant::Pcvrp);
        let sol = Solution::new(&inst, vec![vec![1, 2]], vec![3, 4]).unwrap();
        assert!((sol.cost() - (4.0 - 3.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_partitions() {
        let inst = line_instance(Variant::Cvrp);
        assert!(Solution::new(&inst, vec![vec![1, 2], vec![2, 3, 4]], vec![]).is_err());
        assert!(Solution::new(&inst, vec![vec![1, 2, 3]], vec![]).is_err());
        assert!(Solution::new(&inst, vec![vec![1, 2], vec![], vec![3, 4]], vec![]).is_err());
        assert!(Solution::new(&inst, vec![vec![1, 2]], vec![3, 4]).is_err());
        assert!(Solution::new(&inst, vec![vec![1, 2, 3, 4, 5]], vec![]).is_err());
    }

    #[test]
    fn capacity_violation_names_route() {
        let inst = line_instance(Variant::Cvrp);
        // route 1 carries demand 3 = Q
        let sol = Solution::new(&inst, vec![vec![1], vec![2, 3, 4]], vec![]).unwrap();
        assert!(check_feasibility(&inst, &sol).is_empty());
        let sol = Solution::new(&inst, vec![vec![1, 2, 3, 4]], vec![]).unwrap();
        let v = check_feasibility(&inst, &sol);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::Capacity { route: 0, load, .. } if load == 4.0));
    }

    #[test]
    fn time_window_forced_arithmetic() {
        // customer at distance 5, window [10, 12], service 1:
        // arrive 5, wait to 10, depart 11, back at 16.
        let build = |horizon: f64| {
            Instance::new(InstanceParts {
                variant: Variant::Vrptw,
                id: "tw".into(),
                coords: vec![[0.0, 0.0], [3.0, 4.0]],
                demand: vec![1.0],
                capacity: 1.0,
                tw_open: Some(vec![0.0, 10.0]),
                tw_close: Some(vec![horizon, 12.0]),
                service: Some(vec![1.0]),
                prize: None,
            })
            .unwrap()
        };
        let ok = build(16.0);
        let sol = Solution::new(&ok, vec![vec![1]], vec![]).unwrap();
        assert!(check_feasibility(&ok, &sol).is_empty());
        let late = build(15.9);
        let sol = Solution::new(&late, vec![vec![1]], vec![]).unwrap();
        let v = check_feasibility(&late, &sol);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::DepotReturn { time, .. } if (time - 16.0).abs() < 1e-12));
    }

    #[test]
    fn remove_middle_and_singleton() {
        let inst = line_instance(Variant::Cvrp);
        let sol = Solution::new(&inst, vec![vec![1, 2, 3], vec![4]], vec![]).unwrap();
        let p = remove_customers(&inst, &sol, &[2]).unwrap();
        assert_eq!(p.routes(), &[vec![1, 3], vec![4]]);
        assert_eq!(p.removed(), &[2]);
        let p = remove_customers(&inst, &sol, &[4]).unwrap();
        assert_eq!(p.routes(), &[vec![1, 2, 3]]);
        assert_eq!(p.removed(), &[4]);
        let expect = objective_parts(&inst, p.routes(), &[]);
        assert!((p.cost() - expect).abs() < 1e-12);
    }

    #[test]
    fn remove_rejects_duplicates_and_unknown() {
        let inst = line_instance(Variant::Cvrp);
        let sol = Solution::new(&inst, vec![vec![1, 2, 3, 4]], vec![]).unwrap();
        assert!(matches!(remove_customers(&inst, &sol, &[2, 2]), Err(CoreError::InvalidRemoval(_))));
        assert!(matches!(remove_customers(&inst, &sol, &[9]), Err(CoreError::InvalidRemoval(_))));
        assert!(matches!(remove_customers(&inst, &sol, &[0]), Err(CoreError::InvalidRemoval(_))));
    }

    #[test]
    fn pcvrp_remove_unvisited_moves_to_removed() {
        let inst = line_instance(Variant::Pcvrp);
        let sol = Solution::new(&inst, vec![vec![1, 2]], vec![3, 4]).unwrap();
        let p = remove_customers(&inst, &sol, &[4, 1]).unwrap();
        assert_eq!(p.unvisited(), &[3]);
        assert_eq!(p.removed(), &[4, 1]);
        assert_eq!(p.routes(), &[vec![2]]);
        let expect = 4.0 - 1.5;
        assert!((p.cost() - expect).abs() < 1e-12);
    }
}
