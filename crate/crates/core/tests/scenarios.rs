use std::path::PathBuf;

use oos_core::scenario::load_scenario;

pub fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

#[test]
fn bundled_scenarios_load() {
    let mut n = 0;
    for entry in std::fs::read_dir(scenario_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            let s = load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            s.initial_state.validate(&s.problem.fleet).unwrap();
            n += 1;
        }
    }
    assert!(n >= 9);
}
