//! Exit-gate checks. Each test prints one `criterion N: PASS|FAIL` line.

mod common;

use std::f64::consts::TAU;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use oos_core::astro::{solve_phasing, OrbitGeometry, DEFAULT_R_CRIT_KM, G0_M_S2, GEO_RADIUS_KM, MU_EARTH_KM3_S2};
use oos_core::demand::{build_occupancy, build_window, PoissonStream};
use oos_core::horizon::{compare_architectures, first_plan, run, EventLog, ExternalSolver, NeedStatus};
use oos_core::model::OosModel;
use oos_core::network::TimeGrid;
use oos_core::scenario::{load_scenario, Scenario};
use oos_core::schedule::{plan_once, reaccount};
use oos_core::solve::mps::{parse_mps, write_mps};
use oos_core::solve::verify::check_point;
use oos_core::solve::{solve_exhaustive, solve_external, ExhaustiveLimits, SolveRequest, SolveStatus, SolverConfig};
use oos_core::state::InfrastructureState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

// Written past the test harness's output capture so the line shows up without
// `--nocapture`.
fn say(line: &str) {
    match std::fs::OpenOptions::new().append(true).open("/dev/stdout") {
        Ok(mut f) => {
            let _ = writeln!(f, "{line}");
        }
        Err(_) => println!("{line}"),
    }
}

fn report(n: u32, ok: bool, detail: &str) {
    say(&format!("criterion {n}: {} {detail}", if ok { "PASS" } else { "FAIL" }));
    assert!(ok, "criterion {n} failed: {detail}");
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn bundled(name: &str) -> Scenario {
    load_scenario(scenario_dir().join(name)).expect("bundled scenario")
}

fn skip_without_solver(n: u32) -> bool {
    if common::solver_available() {
        return false;
    }
    say(&format!("criterion {n}: FAIL no MILP backend (python3 with highspy) available"));
    true
}

// Brute-force phasing: scan a fixed box of revolution counts, recover the phasing
// orbit from its period and keep the lexicographic minimum of (dv, time, k1).
fn phasing_oracle(alpha: f64, tof_max: f64) -> Option<(f64, f64, f64)> {
    let (r, mu) = (GEO_RADIUS_KM, MU_EARTH_KM3_S2);
    let a_floor = (r + DEFAULT_R_CRIT_KM) / 2.0;
    let omega = (mu / (r * r * r)).sqrt();
    let v_c = (mu / r).sqrt();
    let mut best: Option<(f64, f64, u32, f64)> = None;
    for k2 in 0..400u32 {
        let t = (alpha + TAU * k2 as f64) / omega;
        if t > tof_max * (1.0 + 1e-12) {
            continue;
        }
        for k1 in 1..400u32 {
            let period = t / k1 as f64;
            let a = (mu * (period / TAU).powi(2)).cbrt();
            if a < a_floor {
                continue;
            }
            let dv = 2.0 * (v_c - (mu * (2.0 / r - 1.0 / a)).sqrt()).abs();
            let cand = (dv, t, k1, a);
            let take = match best {
                None => true,
                Some(b) => (cand.0, cand.1, cand.2).partial_cmp(&(b.0, b.1, b.2)) == Some(std::cmp::Ordering::Less),
            };
            if take {
                best = Some(cand);
            }
        }
    }
    best.map(|(dv, t, _, a)| (a, dv, t))
}

#[test]
fn criterion_01_phasing_matches_enumeration() {
    let geom = OrbitGeometry::new(GEO_RADIUS_KM, DEFAULT_R_CRIT_KM, MU_EARTH_KM3_S2, G0_M_S2).unwrap();
    let day = 86_400.0;
    let tofs = [2.0 * day, 5.0 * day, 10.0 * day];
    let alphas: Vec<f64> = (1..=100).map(|i| TAU * i as f64 / 100.0).collect();
    let started = Instant::now();
    let mut solved = Vec::new();
    for &tof in &tofs {
        for &alpha in &alphas {
            solved.push(solve_phasing(alpha, &geom, tof).ok());
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    let mut i = 0;
    for &tof in &tofs {
        for &alpha in &alphas {
            match (&solved[i], phasing_oracle(alpha, tof)) {
                (Some(s), Some((a, dv, t))) => {
                    let e = rel(s.semi_major_axis_km, a).max(rel(s.delta_v_km_s, dv)).max(rel(s.travel_time_s, t));
                    worst = worst.max(e);
                    if e > 1e-9 {
                        mismatches += 1;
                    }
                }
                (None, None) => {}
                _ => mismatches += 1,
            }
            i += 1;
        }
    }
    report(
        1,
        mismatches == 0 && elapsed < 1.0,
        &format!("300 cases, worst relative error {worst:.2e}, {mismatches} mismatches, {elapsed:.3} s"),
    );
}

#[test]
fn criterion_02_window_and_occupancy_fixtures() {
    let grid = TimeGrid::new(1, 10, 2, 80).unwrap();
    let times = grid.time_nodes(0);
    let window = build_window(20, 10, &grid);
    let row22 = build_occupancy(22, 40, &grid, &times);
    let row32 = build_occupancy(32, 40, &grid, &times);
    let ok = window == vec![22, 32]
        && row22 == vec![22, 30, 31, 32, 40, 41, 42, 50, 51, 52]
        && row32 == vec![32, 40, 41, 42, 50, 51, 52, 60, 61, 62];
    report(2, ok, &format!("window {window:?}, rows {row22:?} / {row32:?}"));
}

const KINDS: [&str; 2] = ["inspection", "refueling"];

/// Up to two servicers, four needs and three intervals.
fn tiny_instance(seed: u64) -> Value {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_sats = rng.random_range(1..=3);
    let longitudes: Vec<f64> = (0..n_sats).map(|_| rng.random_range(-160..=-100) as f64).collect();
    let n_needs = rng.random_range(1..=4);
    let needs: Vec<(usize, &str, i64)> = (0..n_needs)
        .map(|_| (rng.random_range(0..n_sats), KINDS[rng.random_range(0..2)], 10 * rng.random_range(0..=1)))
        .collect();
    let mut v = common::tiny(&longitudes, &needs, 30);
    v["servicers"][0]["initial_cargo"]["monopropellant_kg"] = rng.random_range(0..=400).into();
    v["servicers"][0]["initial_propellant_kg"] = rng.random_range(300..=1000).into();
    if rng.random_bool(0.5) {
        let lon = rng.random_range(-150..=-90) as f64;
        v["parking"].as_array_mut().unwrap().push(json!({"name": "P2", "longitude_deg": lon}));
        let mut s2 = v["servicers"][0].clone();
        s2["name"] = "S2".into();
        s2["initial_node"] = "P2".into();
        s2["initial_propellant_kg"] = rng.random_range(300..=1000).into();
        s2["initial_cargo"]["monopropellant_kg"] = rng.random_range(0..=400).into();
        v["servicers"].as_array_mut().unwrap().push(s2);
        // Depots at both parking nodes keep pooled exchanges within the oracle's scope;
        // they are large enough to absorb every load.
        let depots: Vec<Value> = ["P", "P2"]
            .iter()
            .map(|p| {
                json!({"name": format!("D{p}"), "parking": p, "dry_mass_kg": 1000,
                    "capacity": {"bipropellant_kg": 5000, "monopropellant_kg": 5000, "spares_units": 0},
                    "manufacturing_cost_usd_m": 100, "operating_cost_usd_per_day": 5000,
                    "stationkeeping_kg_per_day": 0.14, "stationkeeping_propellant": "monopropellant",
                    "initial_stock": {"monopropellant_kg": rng.random_range(0..=300)}})
            })
            .collect();
        v["depots"] = depots.into();
    }
    v
}

fn limits() -> ExhaustiveLimits {
    ExhaustiveLimits { max_joint_checks: 20_000_000, ..ExhaustiveLimits::default() }
}

fn exact(model: &OosModel) -> f64 {
    let s = solve_exhaustive(model, &limits()).expect("enumeration");
    assert_eq!(s.status, SolveStatus::Optimal);
    s.objective.unwrap()
}

#[test]
fn criterion_03_external_solver_matches_enumeration() {
    if skip_without_solver(3) {
        return;
    }
    let started = Instant::now();
    let req = SolveRequest { gap: 1e-4, time_limit_s: 60.0, seed: 0 };
    let mut failures = Vec::new();
    let mut two_servicers = 0;
    let n = 24;
    for seed in 0..n {
        let s = common::load(&tiny_instance(seed));
        two_servicers += (s.problem.fleet.servicers.len() == 2) as usize;
        let model = first_plan(&s, &s.needs(0)).unwrap();
        let a = exact(&model);
        let ext = solve_external(&model.milp, &req, &SolverConfig::default()).unwrap();
        let Some(b) = ext.objective.filter(|_| ext.status == SolveStatus::Optimal) else {
            failures.push(format!("seed {seed}: solver status {:?}", ext.status));
            continue;
        };
        if let Err(e) = check_point(&model.milp, &ext.values) {
            failures.push(format!("seed {seed}: residual check {e}"));
        }
        let tol = req.gap * a.abs().max(1.0) + 1e-6;
        if b > a + tol || a - b > tol {
            failures.push(format!("seed {seed}: solver {b} vs enumeration {a}"));
        }
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        3,
        failures.is_empty() && elapsed < 300.0,
        &format!("{n} instances ({two_servicers} with two servicers) in {elapsed:.1} s {failures:?}"),
    );
}

fn without_needs(v: &Value) -> Value {
    let mut v = v.clone();
    v["demand"]["explicit_needs"] = json!([]);
    v
}

#[test]
fn criterion_04_serving_never_loses_to_declining() {
    let mut worse = Vec::new();
    for seed in 0..24 {
        let v = tiny_instance(seed);
        let with = common::load(&v);
        let best = exact(&first_plan(&with, &with.needs(0)).unwrap());
        let none = common::load(&without_needs(&v));
        let baseline = exact(&first_plan(&none, &[]).unwrap());
        if best < baseline - 1e-6 * baseline.abs().max(1.0) {
            worse.push(format!("seed {seed}: {best} < {baseline}"));
        }
    }
    // A near, cheap inspection and a refueling the servicer carries fuel for.
    let mut strict = Vec::new();
    for (lon, kind) in [(-165.0, "inspection"), (-150.0, "refueling"), (-120.0, "inspection")] {
        let v = common::tiny(&[lon], &[(0, kind, 0)], 30);
        let with = common::load(&v);
        let model = first_plan(&with, &with.needs(0)).unwrap();
        let sol = solve_exhaustive(&model, &ExhaustiveLimits::default()).unwrap();
        let none = common::load(&without_needs(&v));
        let baseline = exact(&first_plan(&none, &[]).unwrap());
        let served = model.services(&sol.values).len();
        let gain = sol.objective.unwrap() - baseline;
        if !(served == 1 && gain > 1.0) {
            strict.push(format!("{kind} at {lon}: served {served}, gain {gain}"));
        }
    }
    report(4, worse.is_empty() && strict.is_empty(), &format!("24 random instances, 3 profitable fixtures {worse:?} {strict:?}"));
}

#[test]
fn criterion_05_nearer_later_need_is_served_on_the_way() {
    // The servicer parks at -170. The far customer C0 needs an inspection at day 0;
    // C1 lies on the way east and its need arises ten days later. Propellant on board
    // is sunk, so the order is decided by what the tank allows: 400 kg covers the
    // eastward sweep P -> C1 -> C0 but not going out to C0 and doubling back.
    let fixture = |fuel: u32| {
        let mut v = common::tiny(&[-110.0, -150.0], &[(0, "inspection", 0), (1, "inspection", 10)], 60);
        v["servicers"][0]["initial_propellant_kg"] = fuel.into();
        let s = common::load(&v);
        let model = first_plan(&s, &s.needs(0)).unwrap();
        let sol = solve_exhaustive(&model, &limits()).unwrap();
        let starts: Vec<(String, i64)> = model
            .services(&sol.values)
            .iter()
            .map(|x| (model.needs[x.need].need.satellite.clone(), x.tau))
            .collect();
        (sol.status, starts)
    };
    let day = |starts: &[(String, i64)], sat: &str| starts.iter().find(|(s, _)| s == sat).map(|(_, t)| *t);
    let (status, tight) = fixture(400);
    let on_the_way = status == SolveStatus::Optimal
        && matches!((day(&tight, "C0"), day(&tight, "C1")), (Some(far), Some(near)) if near < far);
    // With a full tank the far need is served first to save delay, so the ordering
    // above is the propellant-driven choice and not an artefact of the grid.
    let (_, ample) = fixture(1000);
    let far_first = matches!((day(&ample, "C0"), day(&ample, "C1")), (Some(far), Some(near)) if far < near);
    report(5, on_the_way && far_first, &format!("400 kg: {tight:?}; 1000 kg: {ample:?}"));
}

fn is_prefix(old: &EventLog, new: &EventLog) -> bool {
    new.actions.starts_with(&old.actions) && new.cash_flows.starts_with(&old.cash_flows) && new.replans.starts_with(&old.replans)
}

/// Each vehicle's last committed arc into the hand-off day must carry exactly the
/// handed-off quantities.
fn handoff_mismatches(log: &EventLog, state: &InfrastructureState) -> Vec<String> {
    let mut out = Vec::new();
    for v in &state.vehicles {
        let Some(last) = log
            .actions
            .iter()
            .filter(|a| a.vehicle == v.name && a.end_day == state.day && a.kind != oos_core::horizon::ActionKind::ServiceStart)
            .last()
        else {
            continue;
        };
        let cargo_off = oos_core::commodity::Commodity::ALL.iter().any(|&c| (last.cargo_in[c] - v.cargo[c]).abs() > 1e-6);
        if last.to != v.node || (last.propellant_in_kg - v.propellant_kg).abs() > 1e-6 || cargo_off {
            out.push(format!("{} at day {}: log {:?} vs state {:?}", v.name, state.day, last, v));
        }
    }
    out
}

#[test]
fn criterion_06_rolling_horizon_continuity() {
    if skip_without_solver(6) {
        return;
    }
    let s = bundled("trade-distributed-10.json");
    let needs = s.needs(1);
    let mut previous = EventLog::default();
    let mut rewrites = 0;
    let mut handoffs = 0;
    let mut mismatches = Vec::new();
    let mut observer = |log: &EventLog, state: &InfrastructureState| {
        if !is_prefix(&previous, log) {
            rewrites += 1;
        }
        mismatches.extend(handoff_mismatches(log, state));
        handoffs += 1;
        previous = log.clone();
    };
    let result = run(&s, &needs, 1, &ExternalSolver::default(), Some(&mut observer));
    let ok = match &result {
        Ok(r) => {
            let days = s.horizon.end_day() - s.horizon.start_day;
            r.log.replans.len() >= 3 && days >= 360 && rewrites == 0 && mismatches.is_empty()
        }
        Err(_) => false,
    };
    let replans = result.as_ref().map_or(0, |r| r.log.replans.len());
    report(
        6,
        ok,
        &format!(
            "{replans} re-plans, {handoffs} hand-offs, {rewrites} rewritten logs, {} state mismatches {:?}",
            mismatches.len(),
            result.err().map(|e| e.to_string())
        ),
    );
}

#[test]
fn criterion_07_use_case_scale() {
    if skip_without_solver(7) {
        return;
    }
    let s = bundled("usecase1.json");
    let needs = s.needs(0);
    let solver = ExternalSolver { gap: 0.01, time_limit_s: 60.0, ..ExternalSolver::default() };
    let started = Instant::now();
    let out = plan_once(&s, &needs, 0, &solver).expect("plan");
    let elapsed = started.elapsed().as_secs_f64();
    let served_revenue: f64 = out
        .history
        .iter()
        .filter(|h| matches!(h.status, NeedStatus::Served { .. }))
        .map(|h| s.problem.service(&h.need).revenue_usd)
        .sum();
    let again = reaccount(&s.problem, &out.actions, &needs);
    let ok_gap = out.solution.gap.map_or(out.solution.status == SolveStatus::Optimal, |g| g <= 0.01);
    let rev_err = rel(out.breakdown.revenue, served_revenue);
    let cost_err = rel(out.breakdown.cost(), again.cost());
    let ok = ok_gap && elapsed < 60.0 && rev_err <= 1e-6 && cost_err <= 1e-6 && served_revenue > 0.0;
    report(
        7,
        ok,
        &format!(
            "{} customers, {:?} gap {:?} in {elapsed:.2} s; revenue {:.0} (error {rev_err:.1e}), cost {:.0} (error {cost_err:.1e})",
            s.problem.satellites.len(),
            out.solution.status,
            out.solution.gap,
            out.breakdown.revenue,
            out.breakdown.cost()
        ),
    );
}

fn daily_operating_from_file(name: &str) -> f64 {
    let text = std::fs::read_to_string(scenario_dir().join(name)).unwrap();
    let v: Value = serde_json::from_str(&text).unwrap();
    let sum = |key: &str| {
        v[key].as_array().map_or(0.0, |xs| xs.iter().filter_map(|x| x["operating_cost_usd_per_day"].as_f64()).sum())
    };
    sum("servicers") + sum("depots")
}

#[test]
fn criterion_08_trade_trends() {
    if skip_without_solver(8) {
        return;
    }
    let solver = ExternalSolver::default();
    let archs = [bundled("trade-monolithic-48.json"), bundled("trade-distributed-48.json")];
    let seeds = [1, 2, 3];
    let runs = compare_architectures(&archs, &seeds, &solver, 2).unwrap();
    let mut starts_ok = true;
    let mut wins = 0;
    let mut lines = Vec::new();
    for &seed in &seeds {
        let mut rev = |name: &str| {
            let r = runs.iter().find(|r| r.seed == seed && r.architecture == name).unwrap();
            let res = r.result.as_ref().ok()?;
            let first = res.series.first()?;
            if first.value_usd != -res.initial_investment_usd {
                starts_ok = false;
            }
            Some(res.log.realized().revenue)
        };
        let (m, d) = (rev(&archs[0].file.name), rev(&archs[1].file.name));
        if let (Some(m), Some(d)) = (m, d) {
            wins += (d >= m) as usize;
        }
        lines.push(format!("seed {seed}: monolithic {m:?} distributed {d:?}"));
    }
    let all_ok = runs.iter().all(|r| r.result.is_ok());

    let mut idle_err: f64 = 0.0;
    for name in ["idle-monolithic.json", "idle-distributed.json"] {
        let s = bundled(name);
        let r = run(&s, &s.needs(1), 1, &solver, None).unwrap();
        let expect = daily_operating_from_file(name) * s.problem.grid.interval_days as f64;
        for w in r.series.windows(2) {
            idle_err = idle_err.max(rel(w[1].cost_usd - w[0].cost_usd, expect));
        }
    }
    report(
        8,
        all_ok && starts_ok && wins >= 2 && idle_err <= 1e-9,
        &format!("start at -investment {starts_ok}; distributed revenue >= monolithic in {wins}/3 ({lines:?}); idle cost-rate error {idle_err:.1e}"),
    );
}

#[test]
fn criterion_09_poisson_mean() {
    // One seed family: 1000 draws pooled over ten per-pair streams of seed 42.
    let mean = 300.0;
    let draws: Vec<f64> = (0..10)
        .flat_map(|stream| {
            let mut p = PoissonStream::new(42, stream, Some(mean));
            (0..100).map(move |_| p.next_gap().unwrap())
        })
        .collect();
    let sample = draws.iter().sum::<f64>() / draws.len() as f64;
    let dev = rel(sample, mean);
    report(9, draws.len() == 1000 && dev <= 0.05, &format!("sample mean {sample:.2} days vs {mean}, deviation {dev:.4}"));
}

#[test]
fn criterion_10_mps_round_trip() {
    let mut models = Vec::new();
    let mut files: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    for f in &files {
        let s = load_scenario(f).unwrap();
        let seed = s.seeds().first().copied().unwrap_or(0);
        models.push((f.file_name().unwrap().to_string_lossy().into_owned(), first_plan(&s, &s.needs(seed)).unwrap()));
    }
    for seed in 0..4 {
        let s = common::load(&tiny_instance(seed));
        models.push((format!("tiny-{seed}"), first_plan(&s, &s.needs(0)).unwrap()));
    }
    let mut differ = Vec::new();
    for (name, m) in &models {
        let first = write_mps(&m.milp).unwrap();
        let second = write_mps(&parse_mps(&first).unwrap()).unwrap();
        if first != second {
            differ.push(name.clone());
        }
    }
    report(10, differ.is_empty(), &format!("{} models, differing: {differ:?}", models.len()));
}
