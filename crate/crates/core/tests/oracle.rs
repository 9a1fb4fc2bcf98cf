mod common;

use std::time::Instant;

use oos_core::horizon::first_plan;
use oos_core::solve::verify::check_point;
use oos_core::solve::{solve_exhaustive, solve_external, ExhaustiveLimits, SolveRequest, SolverConfig, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const KINDS: [&str; 2] = ["inspection", "refueling"];

fn instance(seed: u64) -> serde_json::Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sats = rng.random_range(1..=3);
    let longitudes: Vec<f64> = (0..n_sats).map(|_| rng.random_range(-160..=-100) as f64).collect();
    let n_needs = rng.random_range(1..=3);
    let needs: Vec<(usize, &str, i64)> = (0..n_needs)
        .map(|_| (rng.random_range(0..n_sats), KINDS[rng.random_range(0..2)], 10 * rng.random_range(0..=2)))
        .collect();
    let mut v = common::tiny(&longitudes, &needs, 40);
    v["servicers"][0]["initial_cargo"]["monopropellant_kg"] = rng.random_range(0..=400).into();
    v["servicers"][0]["initial_propellant_kg"] = rng.random_range(300..=1000).into();
    v
}

#[test]
fn external_solver_matches_exhaustive_enumeration() {
    if !common::solver_available() {
        eprintln!("skipped: no MILP backend");
        return;
    }
    let started = Instant::now();
    let req = SolveRequest { gap: 1e-4, time_limit_s: 60.0, seed: 0 };
    let mut compared = 0;
    for seed in 0..24 {
        let s = common::load(&instance(seed));
        let model = first_plan(&s, &s.needs(0)).unwrap();
        let exact = solve_exhaustive(&model, &ExhaustiveLimits::default()).unwrap();
        let ext = solve_external(&model.milp, &req, &SolverConfig::default()).unwrap();
        assert_eq!(exact.status, SolveStatus::Optimal, "seed {seed}");
        assert_eq!(ext.status, SolveStatus::Optimal, "seed {seed}");
        check_point(&model.milp, &ext.values).unwrap();
        let (a, b) = (exact.objective.unwrap(), ext.objective.unwrap());
        assert!(b <= a + 1e-6 * a.abs().max(1.0), "seed {seed}: solver {b} beats enumeration {a}");
        assert!(a - b <= req.gap * a.abs().max(1.0) + 1e-6, "seed {seed}: solver {b} vs enumeration {a}");
        println!("seed {seed}: {} needs, {} served, objective {a:.1}", model.needs.len(), model.services(&ext.values).len());
        compared += 1;
    }
    assert!(compared >= 20);
    assert!(started.elapsed().as_secs() < 300);
}

#[test]
fn enumeration_refuses_unmodelled_meetings() {
    let mut v = common::tiny(&[-140.0], &[(0, "inspection", 0)], 30);
    let mut s2 = v["servicers"][0].clone();
    s2["name"] = "S2".into();
    v["servicers"].as_array_mut().unwrap().push(s2);
    let s = common::load(&v);
    let model = first_plan(&s, &s.needs(0)).unwrap();
    match solve_exhaustive(&model, &ExhaustiveLimits::default()) {
        Err(oos_core::solve::SolveError::InstanceTooLarge(m)) => assert!(m.contains("without a depot"), "{m}"),
        other => panic!("expected a scope refusal, got {other:?}"),
    }
}
