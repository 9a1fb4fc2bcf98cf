mod common;

use oos_core::horizon::{run, ExhaustiveSolver, ExternalSolver, NeedStatus};
use oos_core::model::CostComponent;
use oos_core::scenario::load_scenario;
use oos_core::schedule::{check_schedule, gantt, itinerary, plan_once, reaccount};

fn scenario(name: &str) -> oos_core::scenario::Scenario {
    load_scenario(format!("{}/../../scenarios/{name}.json", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-6 * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn usecase_plan_is_valid_and_reaccounts() {
    if !common::solver_available() {
        return;
    }
    let s = scenario("usecase1");
    let needs = s.needs(0);
    let out = plan_once(&s, &needs, 0, &ExternalSolver::default()).unwrap();
    let errors = check_schedule(&s.problem, &out.actions, &needs, &s.initial_state);
    assert!(errors.is_empty(), "{errors:#?}");
    let again = reaccount(&s.problem, &out.actions, &needs);
    for c in CostComponent::ALL {
        assert!(close(again.get(c), out.breakdown.get(c)), "{c:?}: {} vs {}", again.get(c), out.breakdown.get(c));
    }
    let served: f64 = out.history.iter().filter(|h| matches!(h.status, NeedStatus::Served { .. })).map(|h| h.revenue_usd).sum();
    assert!(close(served, out.breakdown.revenue));
    let rows = itinerary(&out.actions, &needs);
    assert!(rows.iter().any(|r| r.activity.contains("need")));
    let bars = gantt(&out.actions, &needs);
    for v in ["S1", "S2", "S3", "S4", "D1"] {
        let mine: Vec<_> = bars.iter().filter(|b| b.vehicle == v && b.kind != oos_core::horizon::ActionKind::ServiceStart).collect();
        assert_eq!(mine.first().unwrap().start_day, 0, "{v}");
        assert_eq!(mine.last().unwrap().end_day, 100, "{v}");
    }
}

#[test]
fn empty_demand_holds_everyone() {
    let s = common::load(&common::tiny(&[-150.0], &[], 40));
    let out = plan_once(&s, &[], 0, &ExhaustiveSolver::default()).unwrap();
    assert!(out.actions.iter().all(|a| a.kind == oos_core::horizon::ActionKind::Hold && a.from == "P"));
    assert_eq!(out.breakdown.servicers, 13000.0 * 40.0);
}

#[test]
fn rolling_horizon_log_is_valid() {
    if !common::solver_available() {
        return;
    }
    let s = scenario("trade-distributed-24");
    let needs = s.needs(2);
    let r = run(&s, &needs, 2, &ExternalSolver::default(), None).unwrap();
    let errors = check_schedule(&s.problem, &r.log.actions, &needs, &s.initial_state);
    assert!(errors.is_empty(), "{errors:#?}");
    let again = reaccount(&s.problem, &r.log.actions, &needs);
    let realized = r.log.realized();
    for c in CostComponent::ALL {
        assert!(close(again.get(c), realized.get(c)), "{c:?}: {} vs {}", again.get(c), realized.get(c));
    }
}
