#![allow(dead_code)]

use oos_core::scenario::{parse_scenario, Scenario};
use serde_json::{json, Value};

/// One servicer parked at -170 deg, customers at the given longitudes, explicit needs.
pub fn tiny(longitudes: &[f64], needs: &[(usize, &str, i64)], planning_days: u32) -> Value {
    let satellites: Vec<Value> = longitudes
        .iter()
        .enumerate()
        .map(|(i, &l)| json!({"name": format!("C{i}"), "longitude_deg": l, "propellant": "monopropellant"}))
        .collect();
    let explicit: Vec<Value> = needs
        .iter()
        .map(|&(s, kind, day)| json!({"satellite": format!("C{s}"), "kind": kind, "day": day}))
        .collect();
    json!({
        "name": "tiny",
        "time_grid": {"dt_days": 2, "interval_days": 10, "flight_steps": 2},
        "horizon": {"planning_days": planning_days},
        "commodities": {"bipropellant_usd_per_kg": 180, "monopropellant_usd_per_kg": 230, "spares_usd_per_kg": 1000},
        "tools": [{"name": "T1", "mass_kg": 100, "cost_usd": 100000}],
        "service_types": [
            {"kind": "inspection", "occurrence": "deterministic", "revenue_usd_m": 10,
             "delay_penalty_usd_per_day": 5000, "duration_days": 10, "window_days": 30,
             "interoccurrence_days": 6310, "tool": "T1"},
            {"kind": "refueling", "occurrence": "deterministic", "revenue_usd_m": 15,
             "delay_penalty_usd_per_day": 100000, "duration_days": 30, "window_days": 30,
             "interoccurrence_days": 2100, "tool": "T1", "propellant_delivery_kg": 150}
        ],
        "satellites": satellites,
        "parking": [{"name": "P", "longitude_deg": -170}],
        "servicers": [{"name": "S1", "tools": ["T1"], "dry_mass_kg": 2000, "propellant_capacity_kg": 1000,
            "isp_s": 316, "manufacturing_cost_usd_m": 50, "operating_cost_usd_per_day": 13000,
            "initial_node": "P", "initial_cargo": {"monopropellant_kg": 300}}],
        "demand": {"explicit_needs": explicit}
    })
}

pub fn load(v: &Value) -> Scenario {
    Scenario::from_file(parse_scenario(&v.to_string()).expect("schema")).expect("valid scenario")
}

pub fn solver_available() -> bool {
    std::process::Command::new("python3")
        .args(["-c", "import highspy"])
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}
