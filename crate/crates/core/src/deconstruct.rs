//! Handcrafted deconstruction: adjacent string removal and uniform random
//! removal.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::instance::Instance;
use crate::solution::Solution;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanSource {
    Heuristic,
    Random,
    Neural,
}

/// An ordered list of distinct customers to remove.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RemovalPlan {
    pub customers: Vec<usize>,
    pub source: PlanSource,
}

/// Default maximum string length for [`heuristic_deconstruct`].
pub const DEFAULT_MAX_STRING: usize = 10;

fn check_count(sol: &Solution, m: usize) -> Result<()> {
    let visited = sol.n_visited();
    if m > visited {
        return Err(CoreError::Contract(format!(
            "cannot remove {m} customers from a solution visiting {visited}"
        )));
    }
    Ok(())
}

/// String removal around a random seed customer.
///
/// Customers are scanned by increasing distance from the seed. The first
/// time a route is reached, a contiguous string of uniform length in
/// `[1, min(max_string, len)]` containing the reached customer is marked.
/// The last string is cut down to hit exactly `m` removals. If every route
/// has been touched and fewer than `m` customers are marked, the marked
/// blocks grow at their ends until `m` is reached, so each touched route
/// always loses one contiguous block.
pub fn heuristic_deconstruct<R: Rng + ?Sized>(
    inst: &Instance,
    sol: &Solution,
    m: usize,
    max_string: usize,
    rng: &mut R,
) -> Result<RemovalPlan> {
    check_count(sol, m)?;
    let source = PlanSource::Heuristic;
    if m == 0 {
        return Ok(RemovalPlan { customers: Vec::new(), source });
    }
    let max_string = max_string.max(1);
    let n = inst.n_customers();
    // (route, position) of every visited customer
    let mut loc = vec![None; n + 1];
    for (r, route) in sol.routes().iter().enumerate() {
        for (p, &c) in route.iter().enumerate() {
            loc[c] = Some((r, p));
        }
    }
    let visited: Vec<usize> = sol.visited().collect();
    let seed = visited[rng.random_range(0..visited.len())];
    let mut order = visited.clone();
    order.sort_by(|&a, &b| {
        inst.distance(seed, a)
            .total_cmp(&inst.distance(seed, b))
            .then(a.cmp(&b))
    });

    let routes = sol.routes();
    // block[r] = Some((start, end_exclusive)) for ruined routes
    let mut block: Vec<Option<(usize, usize)>> = vec![None; routes.len()];
    let mut touched = Vec::new();
    let mut out = Vec::with_capacity(m);
    for &c in &order {
        if out.len() >= m {
            break;
        }
        let (r, pos) = loc[c].expect("visited customer has a location");
        if block[r].is_some() {
            continue;
        }
        let len = routes[r].len();
        let l = rng.random_range(1..=max_string.min(len));
        // string [s, s + l) must contain pos
        let lo = pos.saturating_sub(l - 1);
        let hi = pos.min(len - l);
        let mut s = rng.random_range(lo..=hi);
        let mut take = l;
        let need = m - out.len();
        if take > need {
            // shrink to `need` while still covering pos
            let lo2 = s.max(pos.saturating_sub(need - 1));
            let hi2 = pos.min(s + l - need);
            s = rng.random_range(lo2..=hi2);
            take = need;
        }
        out.extend_from_slice(&routes[r][s..s + take]);
        block[r] = Some((s, s + take));
        touched.push(r);
    }

    // grow touched blocks at their ends if every route was ruined too early
    while out.len() < m {
        let mut grew = false;
        for &r in &touched {
            if out.len() >= m {
                break;
            }
            let (s, e) = block[r].unwrap();
            let len = routes[r].len();
            if e < len {
                out.push(routes[r][e]);
                block[r] = Some((s, e + 1));
                grew = true;
            } else if s > 0 {
                out.push(routes[r][s - 1]);
                block[r] = Some((s - 1, e));
                grew = true;
            }
        }
        if !grew {
            break;
        }
    }
    debug_assert_eq!(out.len(), m);
    Ok(RemovalPlan { customers: out, source })
}

/// `m` distinct visited customers drawn uniformly, in uniform random order.
pub fn random_deconstruct<R: Rng + ?Sized>(
    _inst: &Instance,
    sol: &Solution,
    m: usize,
    rng: &mut R,
) -> Result<RemovalPlan> {
    check_count(sol, m)?;
    let visited: Vec<usize> = sol.visited().collect();
    let customers = sample(rng, visited.len(), m).into_iter().map(|i| visited[i]).collect();
    Ok(RemovalPlan { customers, source: PlanSource::Random })
}
