mod oracle;

use nds_core::instance::InstanceParts;
use nds_core::reconstruct::InsertionTarget;
use nds_core::{
    best_insertion, initial_solution, objective, stream_rng, GeneratorSpec, Instance, Solution, Variant,
};

const VARIANTS: [Variant; 3] = [Variant::Cvrp, Variant::Vrptw, Variant::Pcvrp];

#[test]
fn distance_three_four_five() {
    let inst = Instance::new(InstanceParts {
        variant: Variant::Cvrp,
        id: "t".into(),
        coords: vec![[0.0, 0.0], [3.0, 4.0]],
        demand: vec![1.0],
        capacity: 1.0,
        tw_open: None,
        tw_close: None,
        service: None,
        prize: None,
    })
    .unwrap();
    assert_eq!(inst.distance(0, 1), 5.0);
    assert_eq!(inst.distance(1, 0), 5.0);
    assert_eq!(inst.distance(1, 1), 0.0);
}

#[test]
fn distance_matches_naive_recomputation() {
    for (seed, matrix) in [(1, true), (2, false)] {
        let base = GeneratorSpec::new(Variant::Cvrp, 5, seed).generate().unwrap();
        let inst = Instance::with_matrix(base.to_parts(), matrix).unwrap();
        assert_eq!(inst.has_distance_matrix(), matrix);
        for i in 0..=5 {
            for j in 0..=5 {
                assert!((inst.distance(i, j) - oracle::naive_distance(&inst, i, j)).abs() < 1e-12);
            }
        }
    }
}

#[test]
#[should_panic(expected = "out of range")]
fn distance_index_out_of_range() {
    let inst = GeneratorSpec::new(Variant::Cvrp, 5, 1).generate().unwrap();
    inst.distance(0, 6);
}

#[test]
fn objective_and_feasibility_match_oracle() {
    for (vi, v) in VARIANTS.into_iter().enumerate() {
        let mut rng = stream_rng(11, vi as u64);
        for case in 0..200u64 {
            let n = 2 + (case as usize % 19);
            let inst = GeneratorSpec::new(v, n, 1000 + case).generate().unwrap();
            let (routes, unvisited) = oracle::random_arrangement(&inst, &mut rng);
            let sol = Solution::new(&inst, routes.clone(), unvisited).unwrap();
            let expect = oracle::objective(&inst, &routes);
            assert!((objective(&inst, &sol) - expect).abs() < 1e-9);
            assert!((sol.cost() - expect).abs() < 1e-9);
            assert_eq!(oracle::library_breaches(&inst, &sol), oracle::breaches(&inst, &routes));
        }
    }
}

#[test]
fn feasibility_verdicts_on_seeded_vrptw() {
    let inst = GeneratorSpec::new(Variant::Vrptw, 20, 5).generate().unwrap();
    let mut rng = stream_rng(5, 0);
    let mut infeasible = 0;
    for _ in 0..20 {
        let (routes, _) = oracle::random_arrangement(&inst, &mut rng);
        let sol = Solution::new(&inst, routes.clone(), vec![]).unwrap();
        let got = oracle::library_breaches(&inst, &sol);
        assert_eq!(got, oracle::breaches(&inst, &routes));
        infeasible += usize::from(!got.is_empty());
    }
    assert!(infeasible > 0, "sample should exercise violations");
}

#[test]
fn enumerated_optimum_cost_is_reproduced() {
    for seed in 0..3 {
        let inst = GeneratorSpec::new(Variant::Cvrp, 6, 40 + seed).generate().unwrap();
        let (routes, best) = oracle::enumerate_optimum(&inst);
        let sol = Solution::new(&inst, routes, vec![]).unwrap();
        assert!((objective(&inst, &sol) - best).abs() < 1e-9);
        assert!(nds_core::check_feasibility(&inst, &sol).is_empty());
        assert!(best <= initial_solution(&inst).cost() + 1e-12);
    }
}

#[test]
fn initial_cost_is_out_and_back_sum() {
    for v in VARIANTS {
        let inst = GeneratorSpec::new(v, 5, 9).generate().unwrap();
        let s = initial_solution(&inst);
        let travel: f64 = (1..=5).map(|i| 2.0 * oracle::naive_distance(&inst, 0, i)).sum();
        let prizes: f64 = if v == Variant::Pcvrp { (1..=5).map(|i| inst.prize(i)).sum() } else { 0.0 };
        assert!((s.cost() - (travel - prizes)).abs() < 1e-12);
        assert!(s.unvisited().is_empty());
        if v == Variant::Cvrp {
            assert!(nds_core::check_feasibility(&inst, &s).is_empty());
        }
    }
}

#[test]
fn best_insertion_matches_exhaustive_oracle() {
    for (vi, v) in VARIANTS.into_iter().enumerate() {
        let mut rng = stream_rng(21, vi as u64);
        for case in 0..50u64 {
            let inst = GeneratorSpec::new(v, 30, 300 + case).generate().unwrap();
            let sol = oracle::feasible_solution(&inst, 30, 6, &mut rng);
            let partial = oracle::random_partial(&inst, &sol, 6, &mut rng);
            for &c in partial.removed() {
                let got = best_insertion(&inst, partial.routes(), c);
                let want = oracle::best_insertion(&inst, partial.routes(), c);
                match (got, want) {
                    (None, None) => {}
                    (Some(g), Some((_, _, d))) => {
                        assert!((g.delta - d).abs() < 1e-9, "{v}: delta {} vs {d}", g.delta);
                        let InsertionTarget::Route { route, position } = g.target else {
                            panic!("route target expected");
                        };
                        let mut trial = partial.routes()[route].clone();
                        trial.insert(position, c);
                        assert!(oracle::route_breaches(&inst, &trial).is_empty());
                    }
                    (g, w) => panic!("{v}: verdict mismatch {g:?} vs {w:?}"),
                }
            }
        }
    }
}
