mod oracle;

use nds_core::search::{InsertionOrder, StepParams};
use nds_core::{
    create_augmentations, greedy_insert, heuristic_deconstruct, improvement_step, initial_solution,
    random_deconstruct, remove_customers, stream_rng, GeneratorSpec, HeuristicPolicy, Solution, Variant,
};
use proptest::prelude::*;
use rand::Rng;

fn variant_strategy() -> impl Strategy<Value = Variant> {
    prop_oneof![Just(Variant::Cvrp), Just(Variant::Vrptw), Just(Variant::Pcvrp)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_invariant_under_rigid_maps(
        v in variant_strategy(),
        n in 2usize..25,
        seed in 0u64..10_000,
        theta in 0.0f64..std::f64::consts::TAU,
        shift in (-2.0f64..2.0, -2.0f64..2.0),
        reflect in any::<bool>(),
    ) {
        let inst = GeneratorSpec::new(v, n, seed).generate().unwrap();
        let mut rng = stream_rng(seed, 1);
        let (routes, unvisited) = oracle::random_arrangement(&inst, &mut rng);
        let sol = Solution::new(&inst, routes.clone(), unvisited.clone()).unwrap();
        let (s, c) = theta.sin_cos();
        let coords = inst
            .coords()
            .iter()
            .map(|&[x, y]| {
                let x = if reflect { -x } else { x };
                [c * x - s * y + shift.0, s * x + c * y + shift.1]
            })
            .collect();
        let moved = inst.with_coords(coords);
        let sol2 = Solution::new(&moved, routes, unvisited).unwrap();
        prop_assert!((sol.cost() - sol2.cost()).abs() < 1e-9);
    }

    #[test]
    fn remove_then_restore_positions_keeps_objective(
        v in variant_strategy(),
        n in 3usize..30,
        seed in 0u64..10_000,
        m in 1usize..8,
    ) {
        let inst = GeneratorSpec::new(v, n, seed).generate().unwrap();
        let mut rng = stream_rng(seed, 2);
        let sol = oracle::feasible_solution(&inst, 10, 4, &mut rng);
        let m = m.min(sol.n_visited());
        let plan = random_deconstruct(&inst, &sol, m, &mut rng).unwrap();
        let partial = remove_customers(&inst, &sol, &plan.customers).unwrap();
        prop_assert!((partial.cost() - oracle::objective(&inst, partial.routes())).abs() < 1e-9);
        prop_assert!(oracle::is_partition(n, &[&partial.routes().concat(), partial.unvisited(), partial.removed()]));
        let restored = Solution::new(&inst, sol.routes().to_vec(), sol.unvisited().to_vec()).unwrap();
        prop_assert!((restored.cost() - sol.cost()).abs() < 1e-9);
        let rebuilt = greedy_insert(&inst, &partial);
        prop_assert!((rebuilt.cost() - oracle::objective(&inst, rebuilt.routes())).abs() < 1e-9);
        prop_assert!(nds_core::check_feasibility(&inst, &rebuilt).is_empty());
    }

    #[test]
    fn greedy_insert_is_deterministic(n in 3usize..25, seed in 0u64..10_000) {
        let inst = GeneratorSpec::new(Variant::Vrptw, n, seed).generate().unwrap();
        let mut rng = stream_rng(seed, 3);
        let sol = oracle::feasible_solution(&inst, 5, 3, &mut rng);
        let partial = oracle::random_partial(&inst, &sol, 3, &mut rng);
        let a = greedy_insert(&inst, &partial);
        let b = greedy_insert(&inst, &partial);
        prop_assert_eq!(a.routes(), b.routes());
        prop_assert_eq!(a.cost().to_bits(), b.cost().to_bits());
    }
}

#[test]
fn conservation_over_many_cycles() {
    for (vi, v) in [Variant::Cvrp, Variant::Vrptw, Variant::Pcvrp].into_iter().enumerate() {
        let inst = GeneratorSpec::new(v, 40, 17).generate().unwrap();
        let mut rng = stream_rng(17, vi as u64);
        let mut s = initial_solution(&inst);
        for cycle in 0..3_400 {
            let m = rng.random_range(1..=10).min(s.n_visited());
            if m == 0 {
                s = initial_solution(&inst);
                continue;
            }
            let plan = if cycle % 2 == 0 {
                heuristic_deconstruct(&inst, &s, m, 10, &mut rng).unwrap()
            } else {
                random_deconstruct(&inst, &s, m, &mut rng).unwrap()
            };
            let partial = remove_customers(&inst, &s, &plan.customers).unwrap();
            assert!(oracle::is_partition(40, &[&partial.routes().concat(), partial.unvisited(), partial.removed()]));
            s = greedy_insert(&inst, &partial);
            assert!(oracle::is_partition(40, &[&s.routes().concat(), s.unvisited()]));
            assert!(s.routes().iter().all(|r| !r.is_empty()));
            assert!(nds_core::check_feasibility(&inst, &s).is_empty());
            assert!((s.cost() - oracle::objective(&inst, s.routes())).abs() < 1e-7);
            if v != Variant::Pcvrp {
                assert!(s.unvisited().is_empty());
            }
        }
    }
}

#[test]
fn greedy_rarely_loses_to_restored_positions() {
    let mut not_worse = 0;
    for case in 0..100u64 {
        let inst = GeneratorSpec::new(Variant::Cvrp, 20, 500 + case).generate().unwrap();
        let mut rng = stream_rng(500 + case, 0);
        let sol = oracle::feasible_solution(&inst, 3, 4, &mut rng);
        let plan = random_deconstruct(&inst, &sol, 4, &mut rng).unwrap();
        let partial = remove_customers(&inst, &sol, &plan.customers).unwrap();
        let rebuilt = greedy_insert(&inst, &partial);
        if rebuilt.cost() <= sol.cost() + 1e-9 {
            not_worse += 1;
        }
    }
    assert!(not_worse >= 95, "greedy not worse in only {not_worse} of 100 cases");
}

fn contiguous_in(route: &[usize], removed: &[usize]) -> bool {
    let idx: Vec<usize> = route.iter().enumerate().filter(|(_, c)| removed.contains(c)).map(|(i, _)| i).collect();
    idx.windows(2).all(|w| w[1] == w[0] + 1)
}

#[test]
fn heuristic_plans_are_contiguous_strings() {
    let inst = GeneratorSpec::new(Variant::Cvrp, 100, 3).generate().unwrap();
    let mut rng = stream_rng(3, 0);
    let sol = oracle::feasible_solution(&inst, 200, 10, &mut rng);
    assert!(sol.routes().iter().any(|r| r.len() > 3));
    for _ in 0..1000 {
        let plan = heuristic_deconstruct(&inst, &sol, 15, 10, &mut rng).unwrap();
        let mut sorted = plan.customers.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 15);
        for route in sol.routes() {
            assert!(contiguous_in(route, &plan.customers));
        }
    }
}

#[test]
fn heuristic_single_route_yields_one_block() {
    let inst = GeneratorSpec::new(Variant::Cvrp, 20, 4).generate().unwrap();
    let route: Vec<usize> = (1..=20).collect();
    let parts = inst.to_parts();
    let big = nds_core::instance::InstanceParts { capacity: 1000.0, ..parts };
    let inst = nds_core::Instance::new(big).unwrap();
    let sol = Solution::new(&inst, vec![route.clone()], vec![]).unwrap();
    let mut rng = stream_rng(4, 0);
    for _ in 0..200 {
        let plan = heuristic_deconstruct(&inst, &sol, 5, 10, &mut rng).unwrap();
        assert_eq!(plan.customers.len(), 5);
        assert!(contiguous_in(&route, &plan.customers));
    }
    let all = heuristic_deconstruct(&inst, &sol, 20, 10, &mut rng).unwrap();
    let mut sorted = all.customers.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, route);
}

#[test]
fn random_single_removal_is_uniform() {
    let inst = GeneratorSpec::new(Variant::Cvrp, 100, 6).generate().unwrap();
    let sol = initial_solution(&inst);
    let mut rng = stream_rng(6, 0);
    let draws = 100_000;
    let mut counts = vec![0usize; 101];
    for _ in 0..draws {
        counts[random_deconstruct(&inst, &sol, 1, &mut rng).unwrap().customers[0]] += 1;
    }
    let p = 0.01;
    let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
    let expected = draws as f64 * p;
    let outside = counts[1..].iter().filter(|&&c| (c as f64 - expected).abs() > 3.0 * sigma).count();
    // with 100 cells about 0.27 land beyond 3 sigma on average
    assert!(outside <= 2, "{outside} customers outside 3 sigma");
    let chi2: f64 = counts[1..].iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    assert!(chi2 < 148.2, "chi-square {chi2} above the 0.1% critical value for 99 dof");
}

#[test]
fn random_full_removal_is_permutation() {
    let inst = GeneratorSpec::new(Variant::Cvrp, 30, 6).generate().unwrap();
    let sol = initial_solution(&inst);
    let a = random_deconstruct(&inst, &sol, 30, &mut stream_rng(1, 1)).unwrap();
    let b = random_deconstruct(&inst, &sol, 30, &mut stream_rng(1, 1)).unwrap();
    assert_eq!(a, b);
    let mut sorted = a.customers.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (1..=30).collect::<Vec<_>>());
}

#[test]
fn one_heuristic_step_cuts_singleton_cost() {
    for seed in 0..3 {
        let inst = GeneratorSpec::new(Variant::Cvrp, 100, 900 + seed).generate().unwrap();
        let s0 = initial_solution(&inst);
        let params = StepParams {
            removals: 15,
            lambda: 0.0,
            rollouts: 200,
            reconstructions: 5,
            order: InsertionOrder::PolicyThenRandom,
        };
        let out = improvement_step(&inst, &s0, &HeuristicPolicy::default(), &params, &mut stream_rng(seed, 0)).unwrap();
        let gain = 1.0 - out.current.cost() / s0.cost();
        assert!(gain >= 0.30, "seed {seed}: improvement {gain:.3}");
    }
}

#[test]
fn augmentation_views_preserve_objective() {
    let inst = GeneratorSpec::new(Variant::Pcvrp, 25, 8).generate().unwrap();
    let views = create_augmentations(&inst, 20, &mut stream_rng(8, 0));
    let mut rng = stream_rng(8, 1);
    for _ in 0..100 {
        let (routes, unvisited) = oracle::random_arrangement(&inst, &mut rng);
        let base = Solution::new(&inst, routes.clone(), unvisited.clone()).unwrap();
        for v in &views {
            let s = Solution::new(v, routes.clone(), unvisited.clone()).unwrap();
            assert!((s.cost() - base.cost()).abs() < 1e-9);
        }
    }
}
