//! Schedules as lists of actions: single-horizon planning, itineraries, Gantt bars,
//! independent cost re-accounting and validity checks.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::commodity::Commodity;
use crate::demand::{build_window, occupancy_end, NeedId, ServiceNeed};
use crate::horizon::{committed_actions, first_plan, Action, ActionKind, HorizonError, NeedOutcome, NeedStatus, PlanSolver};
use crate::model::{ObjectiveBreakdown, OosModel, Problem};
use crate::scenario::Scenario;
use crate::solve::Solution;
use crate::state::{InfrastructureState, STATE_TOL};

pub const LAUNCHER: &str = "launcher";

/// Result of planning one horizon without re-planning.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub model: OosModel,
    pub solution: Solution,
    pub actions: Vec<Action>,
    pub breakdown: ObjectiveBreakdown,
    pub history: Vec<NeedOutcome>,
}

/// Solves the first planning horizon of `scenario` once.
pub fn plan_once(
    scenario: &Scenario,
    needs: &[ServiceNeed],
    seed: u64,
    solver: &dyn PlanSolver,
) -> Result<PlanOutcome, HorizonError> {
    let model = first_plan(scenario, needs)?;
    let day = model.network.t0;
    let solution = solver.solve(&model, seed).map_err(|source| HorizonError::Solve { day, source })?;
    if !solution.status.has_solution() {
        return Err(HorizonError::PlanningInfeasible {
            day,
            status: format!("{:?}", solution.status),
            diagnostics: model.milp.to_string(),
        });
    }
    let end = model.network.end_day();
    let actions = committed_actions(&model, &solution.values, end);
    let breakdown = model.breakdown(&solution.values);
    let served: HashMap<NeedId, (i64, String)> = actions
        .iter()
        .filter(|a| a.kind == ActionKind::ServiceStart)
        .filter_map(|a| a.need.map(|n| (n, (a.day, a.vehicle.clone()))))
        .collect();
    let history = model
        .needs
        .iter()
        .filter(|p| p.in_progress.is_none())
        .map(|p| {
            let ty = &p.service;
            match served.get(&p.need.id) {
                Some((tau, who)) => NeedOutcome {
                    need: p.need.clone(),
                    status: NeedStatus::Served { tau: *tau, servicer: who.clone() },
                    revenue_usd: ty.revenue_usd,
                    delay_penalty_usd: ty.delay_penalty_usd_per_day * (tau - p.need.occurrence_day) as f64,
                },
                None => NeedOutcome { need: p.need.clone(), status: NeedStatus::Declined, revenue_usd: 0.0, delay_penalty_usd: 0.0 },
            }
        })
        .collect();
    Ok(PlanOutcome { model, solution, actions, breakdown, history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItineraryRow {
    pub vehicle: String,
    pub day: i64,
    pub end_day: i64,
    pub location: String,
    pub activity: String,
    pub propellant_kg: f64,
    pub bipropellant_kg: f64,
    pub monopropellant_kg: f64,
    pub spares_units: f64,
}

fn activity(a: &Action, needs: &HashMap<NeedId, &ServiceNeed>) -> String {
    match a.kind {
        ActionKind::Hold => "hold".into(),
        ActionKind::Transfer => format!("transfer to {}", a.to),
        ActionKind::Launch => format!("launch to {}", a.to),
        ActionKind::ServiceStart => match a.need.and_then(|n| needs.get(&n)) {
            Some(n) => format!("{} (need {})", n.kind, n.id),
            None => "service".into(),
        },
    }
}

/// One row per action of every vehicle except the launcher, ordered by vehicle then day.
pub fn itinerary(actions: &[Action], needs: &[ServiceNeed]) -> Vec<ItineraryRow> {
    let by_id: HashMap<NeedId, &ServiceNeed> = needs.iter().map(|n| (n.id, n)).collect();
    let mut rows: Vec<ItineraryRow> = actions
        .iter()
        .filter(|a| a.vehicle != LAUNCHER)
        .map(|a| ItineraryRow {
            vehicle: a.vehicle.clone(),
            day: a.day,
            end_day: a.end_day,
            location: a.from.clone(),
            activity: activity(a, &by_id),
            propellant_kg: a.propellant_out_kg,
            bipropellant_kg: a.cargo_out[Commodity::Bipropellant],
            monopropellant_kg: a.cargo_out[Commodity::Monopropellant],
            spares_units: a.cargo_out[Commodity::Spares],
        })
        .collect();
    rows.sort_by(|a, b| (&a.vehicle, a.day, a.activity.starts_with("hold")).cmp(&(&b.vehicle, b.day, b.activity.starts_with("hold"))));
    rows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GanttBar {
    pub vehicle: String,
    pub start_day: i64,
    pub end_day: i64,
    pub location: String,
    pub label: String,
    pub kind: ActionKind,
}

/// Bars for plotting: consecutive holds at one place merge into one bar; services
/// are separate bars spanning their occupancy.
pub fn gantt(actions: &[Action], needs: &[ServiceNeed]) -> Vec<GanttBar> {
    let by_id: HashMap<NeedId, &ServiceNeed> = needs.iter().map(|n| (n.id, n)).collect();
    let mut per: BTreeMap<&str, Vec<&Action>> = BTreeMap::new();
    for a in actions.iter().filter(|a| a.vehicle != LAUNCHER) {
        per.entry(a.vehicle.as_str()).or_default().push(a);
    }
    let mut bars: Vec<GanttBar> = Vec::new();
    for (vehicle, mut list) in per {
        list.sort_by_key(|a| (a.day, a.kind != ActionKind::ServiceStart));
        let mut open: Option<GanttBar> = None;
        for a in list {
            let bar = GanttBar {
                vehicle: vehicle.to_string(),
                start_day: a.day,
                end_day: a.end_day,
                location: a.from.clone(),
                label: activity(a, &by_id),
                kind: a.kind,
            };
            if a.kind == ActionKind::ServiceStart {
                bars.push(bar);
                continue;
            }
            match &mut open {
                Some(o) if o.kind == ActionKind::Hold && a.kind == ActionKind::Hold && o.location == a.from && o.end_day == a.day => {
                    o.end_day = a.end_day;
                }
                _ => {
                    if let Some(o) = open.replace(bar) {
                        bars.push(o);
                    }
                }
            }
        }
        bars.extend(open);
    }
    bars.sort_by(|a, b| (&a.vehicle, a.start_day).cmp(&(&b.vehicle, b.start_day)));
    bars
}

/// Revenue and costs recomputed from the actions alone: operating cost per day of
/// every hold and transfer, production and launch of vehicles and goods leaving the
/// ground, revenue and delay of every service start.
pub fn reaccount(problem: &Problem, actions: &[Action], needs: &[ServiceNeed]) -> ObjectiveBreakdown {
    let fleet = &problem.fleet;
    let by_id: HashMap<NeedId, &ServiceNeed> = needs.iter().map(|n| (n.id, n)).collect();
    let per_kg = fleet.launch.map_or(0.0, |l| l.cost_usd_per_kg);
    let prices = &fleet.prices;
    let mut b = ObjectiveBreakdown::default();
    for a in actions {
        let days = (a.end_day - a.day) as f64;
        let goods_cost: f64 = a.cargo_out.iter().map(|(c, q)| q * prices.unit_cost_usd[c]).sum();
        let goods_mass = a.cargo_out.mass_kg(prices.spare_unit_mass_kg);
        match a.kind {
            ActionKind::ServiceStart => {
                let Some(n) = a.need.and_then(|id| by_id.get(&id)) else { continue };
                let ty = problem.service(n);
                b.revenue += ty.revenue_usd;
                b.delay += ty.delay_penalty_usd_per_day * (a.day - n.occurrence_day) as f64;
            }
            ActionKind::Launch => {
                if let Some(s) = fleet.servicer(&a.vehicle) {
                    b.pdm += s.pdm_usd() + goods_cost + a.propellant_out_kg * prices.unit_cost_usd[s.propellant];
                    b.launch += per_kg * (s.structure_mass_kg() + a.propellant_out_kg + goods_mass);
                } else if let Some(d) = fleet.depot(&a.vehicle) {
                    b.pdm += d.manufacturing_usd + goods_cost;
                    b.launch += per_kg * (d.dry_mass_kg + goods_mass);
                } else {
                    b.pdm += goods_cost;
                    b.launch += per_kg * goods_mass;
                }
            }
            ActionKind::Hold | ActionKind::Transfer => {
                if let Some(s) = fleet.servicer(&a.vehicle) {
                    b.servicers += s.operating_usd_per_day * days;
                } else if let Some(d) = fleet.depot(&a.vehicle) {
                    b.depots += d.operating_usd_per_day * days;
                }
            }
        }
    }
    b
}

/// Checks a schedule against the rules a valid plan obeys; returns one message per
/// violation. `initial` supplies the vehicles' starting positions and services
/// already running.
pub fn check_schedule(
    problem: &Problem,
    actions: &[Action],
    needs: &[ServiceNeed],
    initial: &InfrastructureState,
) -> Vec<String> {
    let fleet = &problem.fleet;
    let prices = &fleet.prices;
    let by_id: HashMap<NeedId, &ServiceNeed> = needs.iter().map(|n| (n.id, n)).collect();
    let mut errors = Vec::new();

    // Service windows and occupancies.
    let mut occupancy: Vec<(String, String, i64, i64)> = initial
        .in_progress
        .iter()
        .map(|p| (p.servicer.clone(), p.need.satellite.clone(), p.start_day, p.end_day))
        .collect();
    let mut served: HashMap<NeedId, usize> = HashMap::new();
    for a in actions.iter().filter(|a| a.kind == ActionKind::ServiceStart) {
        let Some(n) = a.need.and_then(|id| by_id.get(&id)) else {
            errors.push(format!("service by {} at day {} has no known need", a.vehicle, a.day));
            continue;
        };
        *served.entry(n.id).or_default() += 1;
        let ty = problem.service(n);
        if !build_window(n.occurrence_day, ty.window_days, &problem.grid).contains(&a.day) {
            errors.push(format!("need {} starts at day {} outside its window", n.id, a.day));
        }
        let Some(s) = fleet.servicer(&a.vehicle) else {
            errors.push(format!("need {} served by non-servicer {}", n.id, a.vehicle));
            continue;
        };
        if s.tool_count(&ty.tool) == 0 {
            errors.push(format!("{} lacks tool {} for need {}", s.name, ty.tool, n.id));
        }
        if a.from != n.satellite {
            errors.push(format!("need {} at {} served at {}", n.id, n.satellite, a.from));
        }
        occupancy.push((a.vehicle.clone(), n.satellite.clone(), a.day, occupancy_end(a.day, ty.duration_days, &problem.grid)));
    }
    for (id, k) in served {
        if k > 1 {
            errors.push(format!("need {id} served {k} times"));
        }
    }
    for (i, a) in occupancy.iter().enumerate() {
        for b in &occupancy[i + 1..] {
            let overlap = a.2 < b.3 && b.2 < a.3;
            if overlap && a.0 == b.0 {
                errors.push(format!("{} has overlapping services at days {} and {}", a.0, a.2, b.2));
            }
            if overlap && a.1 == b.1 {
                errors.push(format!("{} receives overlapping services at days {} and {}", a.1, a.2, b.2));
            }
        }
    }

    // Per-vehicle continuity, presence during services, capacities, signs.
    let mut per: BTreeMap<&str, Vec<&Action>> = BTreeMap::new();
    for a in actions.iter().filter(|a| a.kind != ActionKind::ServiceStart) {
        per.entry(a.vehicle.as_str()).or_default().push(a);
    }
    for (vehicle, mut list) in per {
        list.sort_by_key(|a| a.day);
        if vehicle != LAUNCHER {
            if let (Some(first), Some(v)) = (list.first(), initial.vehicle(vehicle)) {
                if first.from != v.node {
                    errors.push(format!("{vehicle} starts at {} but was at {}", first.from, v.node));
                }
            }
            for w in list.windows(2) {
                if w[0].end_day != w[1].day || w[0].to != w[1].from {
                    errors.push(format!(
                        "{vehicle}: {} -> {} until day {} is followed by a step from {} at day {}",
                        w[0].from, w[0].to, w[0].end_day, w[1].from, w[1].day
                    ));
                }
            }
        }
        for a in &list {
            let quantities = [a.propellant_out_kg, a.propellant_in_kg].into_iter().chain(a.cargo_out.0).chain(a.cargo_in.0);
            if quantities.clone().any(|q| q < -STATE_TOL) {
                errors.push(format!("{vehicle} carries a negative quantity at day {}", a.day));
            }
            if let Some(s) = fleet.servicer(vehicle) {
                if a.propellant_out_kg.max(a.propellant_in_kg) > s.tank_kg + STATE_TOL {
                    errors.push(format!("{vehicle} exceeds its tank at day {}", a.day));
                }
                let mass = a.cargo_out.mass_kg(prices.spare_unit_mass_kg);
                if mass > s.payload_kg + STATE_TOL {
                    errors.push(format!("{vehicle} carries {mass} kg over its payload at day {}", a.day));
                }
            } else if let Some(d) = fleet.depot(vehicle) {
                for c in Commodity::ALL {
                    if a.cargo_out[c] > d.capacity[c] + STATE_TOL {
                        errors.push(format!("{vehicle} stores {} {c} over capacity at day {}", a.cargo_out[c], a.day));
                    }
                }
            }
        }
    }
    if let Some(l) = fleet.launch {
        let mut lifted: BTreeMap<i64, f64> = BTreeMap::new();
        for a in actions.iter().filter(|a| a.kind == ActionKind::Launch) {
            let mut mass = a.cargo_out.mass_kg(prices.spare_unit_mass_kg) + a.propellant_out_kg;
            if let Some(s) = fleet.servicer(&a.vehicle) {
                mass += s.structure_mass_kg();
            } else if let Some(d) = fleet.depot(&a.vehicle) {
                mass += d.dry_mass_kg;
            }
            *lifted.entry(a.day).or_default() += mass;
        }
        for (day, m) in lifted {
            if m > l.capacity_kg + STATE_TOL {
                errors.push(format!("launch at day {day} lifts {m} kg over capacity"));
            }
        }
    }
    for (servicer, site, start, end) in &occupancy {
        let present = |d: i64| {
            actions.iter().any(|a| {
                a.vehicle == *servicer && a.kind == ActionKind::Hold && a.from == *site && a.day <= d && d < a.end_day
            })
        };
        let last = actions.iter().filter(|a| a.vehicle == *servicer && a.kind != ActionKind::ServiceStart).map(|a| a.end_day).max().unwrap_or(*start);
        let mut d = (*start).max(initial.day);
        while d < (*end).min(last) {
            if !present(d) {
                errors.push(format!("{servicer} leaves {site} at day {d} during a service"));
                break;
            }
            d += 1;
        }
    }
    errors
}
