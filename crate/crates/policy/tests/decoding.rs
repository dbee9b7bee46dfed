mod common;

use common::{instance, mini, packed_solution, view_range};
use nds_core::{stream_rng, Instance, Solution, Variant};
use nds_policy::{Model, NeuralPolicy};

#[test]
fn zero_pointer_weights_give_uniform_choices() {
    let inst = instance(Variant::Cvrp, 10, 4);
    let sol = packed_solution(&inst);
    let model = Model::new(mini(Variant::Cvrp, 1)).unwrap();
    let mut params = model.init_params(3);
    for i in view_range(&model, "dec.pointer.wk.w") {
        params[i] = 0.0;
    }
    let draws = 100_000;
    let mut counts = [0usize; 11];
    for r in model.sample(&params, &inst, &sol, 1, draws, &mut stream_rng(6, 0), None).unwrap() {
        counts[r.actions[0]] += 1;
    }
    assert_eq!(counts[0], 0);
    let p = 0.1;
    let mean = draws as f64 * p;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    for (c, &n) in counts.iter().enumerate().skip(1) {
        assert!((n as f64 - mean).abs() <= 3.0 * sigma, "customer {c}: {n} draws");
    }
}

#[test]
fn step_distributions_normalize_and_respect_masks() {
    for variant in [Variant::Cvrp, Variant::Vrptw, Variant::Pcvrp] {
        let inst = instance(variant, 15, 8);
        let sol = packed_solution(&inst);
        let policy = NeuralPolicy::new(mini(variant, 6), 2).unwrap();
        let (rollouts, trace) = policy.sample_traced(&inst, &sol, 6, 20, &mut stream_rng(1, 1)).unwrap();
        assert_eq!(trace.len(), 6);
        for (step, d) in trace.iter().enumerate() {
            for k in 0..20 {
                let row = &d.probs[k * d.nodes..(k + 1) * d.nodes];
                let mask = &d.masked[k * d.nodes..(k + 1) * d.nodes];
                let total: f64 = row.iter().zip(mask).filter(|(_, &m)| !m).map(|(p, _)| p).sum();
                assert!((total - 1.0).abs() < 1e-6);
                assert!(row.iter().zip(mask).all(|(&p, &m)| !m || p == 0.0));
                assert!(mask[0]);
                for &earlier in &rollouts[k].actions[..step] {
                    assert!(mask[earlier]);
                }
                assert!(!mask[rollouts[k].actions[step]]);
            }
        }
    }
}

#[test]
fn visited_only_unless_prize_collecting() {
    let inst = instance(Variant::Pcvrp, 20, 5);
    let sol = packed_solution(&inst);
    assert!(!sol.unvisited().is_empty(), "fixture should leave customers unvisited");
    let policy = NeuralPolicy::new(mini(Variant::Pcvrp, 5), 2).unwrap();
    let (_, trace) = policy.sample_traced(&inst, &sol, 5, 4, &mut stream_rng(0, 0)).unwrap();
    assert!(sol.unvisited().iter().all(|&u| !trace[0].masked[u]));
}

/// Relabel customers with `perm` (old customer `i` becomes `perm[i-1]`).
fn relabel(inst: &Instance, sol: &Solution, perm: &[usize]) -> (Instance, Solution) {
    let parts = inst.to_parts();
    let n = inst.n_customers();
    let mut q = parts.clone();
    for old in 1..=n {
        let new = perm[old - 1];
        q.coords[new] = parts.coords[old];
        q.demand[new - 1] = parts.demand[old - 1];
        if let (Some(a), Some(b)) = (&mut q.tw_open, &parts.tw_open) {
            a[new] = b[old];
        }
        if let (Some(a), Some(b)) = (&mut q.tw_close, &parts.tw_close) {
            a[new] = b[old];
        }
        if let (Some(a), Some(b)) = (&mut q.service, &parts.service) {
            a[new - 1] = b[old - 1];
        }
        if let (Some(a), Some(b)) = (&mut q.prize, &parts.prize) {
            a[new - 1] = b[old - 1];
        }
    }
    let inst2 = Instance::new(q).unwrap();
    let routes = sol.routes().iter().map(|r| r.iter().map(|&c| perm[c - 1]).collect()).collect();
    let unvisited = sol.unvisited().iter().map(|&c| perm[c - 1]).collect();
    let sol2 = Solution::new(&inst2, routes, unvisited).unwrap();
    (inst2, sol2)
}

#[test]
fn encoder_is_permutation_equivariant() {
    for variant in [Variant::Cvrp, Variant::Vrptw, Variant::Pcvrp] {
        let inst = instance(variant, 10, 21);
        let sol = packed_solution(&inst);
        let perm = [4, 9, 1, 7, 10, 2, 5, 3, 8, 6];
        let (inst2, sol2) = relabel(&inst, &sol, &perm);
        let model = Model::new(mini(variant, 3)).unwrap();
        let params = model.init_params(4);
        let a = model.embeddings(&params, &inst, &sol).unwrap();
        let b = model.embeddings(&params, &inst2, &sol2).unwrap();
        assert_eq!((a.rows, a.cols), (11, 8));
        let close = |x: &[f64], y: &[f64]| x.iter().zip(y).all(|(u, v)| (u - v).abs() < 1e-9);
        assert!(close(a.row(0), b.row(0)), "{variant}: depot row");
        for old in 1..=10 {
            assert!(close(a.row(old), b.row(perm[old - 1])), "{variant}: customer {old}");
        }
    }
}

#[test]
fn tour_membership_change_moves_embeddings() {
    let inst = instance(Variant::Cvrp, 12, 7);
    let sol = packed_solution(&inst);
    let routes = sol.routes().to_vec();
    assert!(routes.len() >= 2);
    let mut moved = routes.clone();
    let c = moved[0].pop().unwrap();
    moved[1].push(c);
    moved.retain(|r| !r.is_empty());
    let other = Solution::new(&inst, moved, vec![]).unwrap();
    let model = Model::new(mini(Variant::Cvrp, 3)).unwrap();
    let params = model.init_params(9);
    let a = model.embeddings(&params, &inst, &sol).unwrap();
    let b = model.embeddings(&params, &inst, &other).unwrap();
    let diff = |i: usize| a.row(i).iter().zip(b.row(i)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff(c) > 0.0);
    assert!(diff(routes[1][0]) > 0.0);
}

#[test]
fn sampling_is_reproducible() {
    let inst = instance(Variant::Vrptw, 12, 1);
    let sol = packed_solution(&inst);
    let policy = NeuralPolicy::new(mini(Variant::Vrptw, 4), 0).unwrap();
    let a = policy.sample(&inst, &sol, 4, 8, &mut stream_rng(2, 2)).unwrap();
    let b = policy.sample(&inst, &sol, 4, 8, &mut stream_rng(2, 2)).unwrap();
    assert_eq!(a, b);
    for r in &a {
        let lp = policy.rollout_logp(&inst, &sol, r).unwrap();
        assert!((lp - r.total_logp).abs() < 1e-9);
        assert!(r.total_logp <= 0.0);
    }
}
