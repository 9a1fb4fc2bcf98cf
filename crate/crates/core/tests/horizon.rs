mod common;

use oos_core::horizon::{run, ExhaustiveSolver, ExternalSolver, NeedStatus};

#[test]
fn single_need_served_by_both_solvers() {
    let s = common::load(&common::tiny(&[-150.0], &[(0, "inspection", 0)], 40));
    let needs = s.needs(0);
    let exact = run(&s, &needs, 0, &ExhaustiveSolver::default(), None).unwrap();
    println!("{:#?}", exact.history);
    assert!(matches!(exact.history[0].status, NeedStatus::Served { .. }));
    if common::solver_available() {
        let ext = run(&s, &needs, 0, &ExternalSolver::default(), None).unwrap();
        assert_eq!(ext.history[0].status, exact.history[0].status);
        assert!((ext.final_value() - exact.final_value()).abs() < 1e-6 * exact.final_value().abs().max(1.0));
    }
}
