//! Rolling-horizon operation: plan over a planning horizon, commit until the next
//! event, propagate the infrastructure state, repeat until the scheduling horizon ends.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::consumption_fraction;
use crate::commodity::{Commodity, CommodityVec};
use crate::demand::{build_window, NeedId, ServiceNeed};
use crate::model::{assemble, CostComponent, ModelError, ObjectiveBreakdown, OosModel, Problem, VehicleRole};
use crate::network::{ArcKind, DynamicNetwork, NetworkError, NodeKind, TimeGrid};
use crate::scenario::Scenario;
use crate::solve::{solve_exhaustive, solve_external, ExhaustiveLimits, Solution, SolveError, SolveRequest, SolverConfig};
use crate::state::{InfrastructureState, StateError, STATE_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonConfig {
    pub start_day: i64,
    pub planning_days: u32,
    pub control_days: u32,
    pub scheduling_days: u32,
}

impl HorizonConfig {
    pub fn validate(&self, grid: &TimeGrid) -> Result<(), String> {
        let t = grid.interval_days;
        if !grid.is_interval_boundary(self.start_day) {
            return Err(format!("start day {} is not a multiple of the {t}-day interval", self.start_day));
        }
        for (name, v) in [("planning", self.planning_days), ("control", self.control_days), ("scheduling", self.scheduling_days)] {
            if v == 0 || v % t != 0 {
                return Err(format!("{name} horizon {v} d must be a positive multiple of {t} d"));
            }
        }
        if !(self.control_days <= self.planning_days && self.planning_days <= self.scheduling_days) {
            return Err(format!(
                "need control ({}) <= planning ({}) <= scheduling ({})",
                self.control_days, self.planning_days, self.scheduling_days
            ));
        }
        Ok(())
    }

    pub fn end_day(&self) -> i64 {
        self.start_day + self.scheduling_days as i64
    }
}

#[derive(Debug, Error)]
pub enum HorizonError {
    #[error("planning horizon starting day {day} has no solution ({status}): {diagnostics}")]
    PlanningInfeasible { day: i64, status: String, diagnostics: String },
    #[error("solver failed for the horizon starting day {day}: {source}")]
    Solve { day: i64, source: SolveError },
    #[error("model for the horizon starting day {day}: {source}")]
    Model { day: i64, source: ModelError },
    #[error("network for the horizon starting day {day}: {source}")]
    Network { day: i64, source: NetworkError },
    #[error("state corruption at day {day}: {detail}")]
    StateCorruption { day: i64, detail: String },
    #[error("invalid state at day {day}: {source}")]
    InvalidState { day: i64, source: StateError },
    #[error("{0}")]
    Config(String),
}

/// Solver used for each planning horizon.
pub trait PlanSolver: Sync {
    fn solve(&self, model: &OosModel, seed: u64) -> Result<Solution, SolveError>;
}

#[derive(Debug, Clone)]
pub struct ExternalSolver {
    pub config: SolverConfig,
    pub gap: f64,
    pub time_limit_s: f64,
}

impl Default for ExternalSolver {
    fn default() -> Self {
        let req = SolveRequest::default();
        Self { config: SolverConfig::default(), gap: req.gap, time_limit_s: req.time_limit_s }
    }
}

impl PlanSolver for ExternalSolver {
    fn solve(&self, model: &OosModel, seed: u64) -> Result<Solution, SolveError> {
        solve_external(&model.milp, &SolveRequest { gap: self.gap, time_limit_s: self.time_limit_s, seed }, &self.config)
    }
}

#[derive(Debug, Clone, Default)]
pub struct ExhaustiveSolver(pub ExhaustiveLimits);

impl PlanSolver for ExhaustiveSolver {
    fn solve(&self, model: &OosModel, _seed: u64) -> Result<Solution, SolveError> {
        solve_exhaustive(model, &self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Hold,
    Transfer,
    Launch,
    ServiceStart,
}

/// One committed step of one vehicle, or a service start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub day: i64,
    pub end_day: i64,
    pub vehicle: String,
    pub kind: ActionKind,
    pub from: String,
    pub to: String,
    pub propellant_out_kg: f64,
    pub propellant_in_kg: f64,
    pub cargo_out: CommodityVec,
    pub cargo_in: CommodityVec,
    pub need: Option<NeedId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CashFlow {
    pub day: i64,
    pub component: CostComponent,
    /// Non-negative magnitude; revenue adds to profit, every other component subtracts.
    pub amount_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "needs")]
pub enum Trigger {
    Start,
    RandomNeeds(Vec<NeedId>),
    QuietTimer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplanRecord {
    pub day: i64,
    pub committed_until: i64,
    pub trigger: Trigger,
    pub pending_needs: usize,
    pub columns: usize,
    pub rows: usize,
    pub objective: f64,
    pub gap: Option<f64>,
    pub wall_time_s: f64,
}

/// Append-only record of everything committed during a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub actions: Vec<Action>,
    pub cash_flows: Vec<CashFlow>,
    pub replans: Vec<ReplanRecord>,
}

impl EventLog {
    pub fn realized(&self) -> ObjectiveBreakdown {
        let mut b = ObjectiveBreakdown::default();
        for f in &self.cash_flows {
            *b.get_mut(f.component) += f.amount_usd;
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum NeedStatus {
    Pending,
    Served { tau: i64, servicer: String },
    Declined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedOutcome {
    pub need: ServiceNeed,
    pub status: NeedStatus,
    pub revenue_usd: f64,
    pub delay_penalty_usd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub day: i64,
    pub revenue_usd: f64,
    pub cost_usd: f64,
    pub value_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub scenario: String,
    pub seed: u64,
    pub initial_investment_usd: f64,
    pub log: EventLog,
    pub history: Vec<NeedOutcome>,
    /// State at the start and at every hand-off.
    pub states: Vec<InfrastructureState>,
    pub series: Vec<SeriesPoint>,
}

impl RunResult {
    pub fn final_value(&self) -> f64 {
        self.series.last().map_or(-self.initial_investment_usd, |p| p.value_usd)
    }

    pub fn served(&self) -> usize {
        self.history.iter().filter(|h| matches!(h.status, NeedStatus::Served { .. })).count()
    }

    pub fn declined(&self) -> usize {
        self.history.iter().filter(|h| h.status == NeedStatus::Declined).count()
    }

    /// First series day at which the value is non-negative.
    pub fn payback_day(&self) -> Option<i64> {
        self.series.iter().find(|p| p.value_usd >= 0.0).map(|p| p.day)
    }
}

/// Notified after every commit; receives the log as it stands.
pub trait Observer {
    fn committed(&mut self, log: &EventLog, state: &InfrastructureState);
}

impl<F: FnMut(&EventLog, &InfrastructureState)> Observer for F {
    fn committed(&mut self, log: &EventLog, state: &InfrastructureState) {
        self(log, state)
    }
}

/// Cost of bringing the pre-deployed assets (not on the ground) to orbit at the start:
/// production of vehicles and their initial contents plus launch of all that mass.
pub fn initial_investment(problem: &Problem, state: &InfrastructureState, earth_node: &str) -> f64 {
    let fleet = &problem.fleet;
    let launch = fleet.launch.map_or(0.0, |l| l.cost_usd_per_kg);
    let prices = &fleet.prices;
    let goods = |q: CommodityVec| -> (f64, f64) {
        let cost: f64 = q.iter().map(|(c, x)| x * prices.unit_cost_usd[c]).sum();
        (cost, q.mass_kg(prices.spare_unit_mass_kg))
    };
    let mut total = 0.0;
    for v in &state.vehicles {
        if v.node == earth_node {
            continue;
        }
        if let Some(s) = fleet.servicer(&v.name) {
            let mut q = v.cargo;
            q[s.propellant] += v.propellant_kg;
            let (cost, mass) = goods(q);
            total += s.pdm_usd() + cost + launch * (s.structure_mass_kg() + mass);
        } else if let Some(d) = fleet.depot(&v.name) {
            let (cost, mass) = goods(v.cargo);
            total += d.manufacturing_usd + cost + launch * (d.dry_mass_kg + mass);
        }
    }
    total
}

/// Cumulative revenue, cost and value at every interval boundary of `[start, end]`;
/// the point at day `d` counts cash flows dated strictly before `d`.
pub fn value_series(flows: &[CashFlow], investment: f64, start: i64, end: i64, interval: u32) -> Vec<SeriesPoint> {
    let mut sorted: Vec<&CashFlow> = flows.iter().collect();
    sorted.sort_by_key(|f| f.day);
    let mut out = Vec::new();
    let (mut rev, mut cost) = (0.0, 0.0);
    let mut k = 0;
    let mut d = start;
    while d <= end {
        while k < sorted.len() && sorted[k].day < d {
            if sorted[k].component == CostComponent::Revenue {
                rev += sorted[k].amount_usd;
            } else {
                cost += sorted[k].amount_usd;
            }
            k += 1;
        }
        out.push(SeriesPoint { day: d, revenue_usd: rev, cost_usd: cost, value_usd: rev - cost - investment });
        d += interval as i64;
    }
    out
}

/// Needs still open at `day`: revealed, not decided, with an admissible start in
/// `(day, plan_end)`.
fn open_needs(
    problem: &Problem,
    needs: &[ServiceNeed],
    status: &BTreeMap<NeedId, NeedStatus>,
    day: i64,
    plan_end: i64,
) -> Vec<ServiceNeed> {
    needs
        .iter()
        .filter(|n| status.get(&n.id) == Some(&NeedStatus::Pending))
        .filter(|n| if n.random { n.occurrence_day <= day } else { n.occurrence_day < plan_end })
        .filter(|n| {
            build_window(n.occurrence_day, problem.service(n).window_days, &problem.grid)
                .into_iter()
                .any(|tau| tau > day && tau < plan_end)
        })
        .cloned()
        .collect()
}

/// Model of the horizon `[day, plan_end)` for the given open needs.
pub fn plan_model(
    problem: &Problem,
    pending: &[ServiceNeed],
    state: &InfrastructureState,
    day: i64,
    plan_end: i64,
) -> Result<OosModel, HorizonError> {
    let customers: BTreeSet<&str> = pending.iter().map(|n| n.satellite.as_str()).collect();
    let pruned = problem.network.prune_to_demand(customers.iter().copied(), state.occupied_nodes());
    let grid = problem
        .grid
        .with_horizon((plan_end - day) as u32)
        .map_err(|source| HorizonError::Network { day, source })?;
    let net = DynamicNetwork::expand(pruned, grid, day, problem.fleet.launch.map(|l| l.period_days))
        .map_err(|source| HorizonError::Network { day, source })?;
    assemble(problem, &net, pending, state).map_err(|source| HorizonError::Model { day, source })
}

/// Model of the first planning horizon of a scenario with every need of `needs`
/// that is open at the start.
pub fn first_plan(scenario: &Scenario, needs: &[ServiceNeed]) -> Result<OosModel, HorizonError> {
    let h = scenario.horizon;
    let status = needs.iter().map(|n| (n.id, NeedStatus::Pending)).collect();
    let plan_end = (h.start_day + h.planning_days as i64).min(h.end_day());
    let pending = open_needs(&scenario.problem, needs, &status, h.start_day, plan_end);
    plan_model(&scenario.problem, &pending, &scenario.initial_state, h.start_day, plan_end)
}

/// Executes the committed part of `solution` from the model's start up to `until`,
/// applying burns, deliveries, depot stationkeeping and transfers to `state`, and
/// checks the result against the state implied by the solution's flows.
pub fn propagate(
    model: &OosModel,
    values: &[f64],
    state: &InfrastructureState,
    until: i64,
) -> Result<InfrastructureState, HorizonError> {
    let net = &model.network;
    let statics = &net.statics;
    let fleet = &model.fleet;
    let prices = &fleet.prices;
    let corrupt = |day: i64, detail: String| HorizonError::StateCorruption { day, detail };
    let end = net
        .time_index(until)
        .ok_or_else(|| corrupt(until, format!("day {until} is not a time node of the plan")))?;
    if state.day != net.t0 {
        return Err(corrupt(state.day, format!("state dated {} but plan starts {}", state.day, net.t0)));
    }
    let paths: Vec<Vec<usize>> = (0..model.vehicles.len()).map(|v| model.path(values, v)).collect();
    let val = |v: Option<crate::milp::VarId>| v.map_or(0.0, |v| values[v.0]);

    // Holdings: node, propellant, cargo per vehicle.
    let mut holding: BTreeMap<String, (String, f64, CommodityVec)> = state
        .vehicles
        .iter()
        .map(|v| (v.name.clone(), (v.node.clone(), v.propellant_kg, v.cargo)))
        .collect();
    let mut loose = state.loose.clone();
    let services = model.services(values);

    for t in 0..end {
        let day = net.time(t);
        // Departures: the goods each vehicle takes at its node.
        let mut taken: BTreeMap<String, CommodityVec> = BTreeMap::new();
        let mut offered: BTreeMap<String, CommodityVec> = BTreeMap::new();
        for (p, q) in std::mem::take(&mut loose) {
            *offered.entry(p).or_default() += q;
        }
        for (vi, v) in model.vehicles.iter().enumerate() {
            let Some(&ai) = paths[vi].iter().find(|&&ai| net.arcs()[ai].start == t) else {
                if v.role != VehicleRole::Launcher {
                    if let Some((node, _, _)) = holding.get(&v.name) {
                        let kind = statics.find(node).map(|n| statics.node(n).kind);
                        if kind != Some(NodeKind::Earth) {
                            return Err(corrupt(day, format!("{} has no committed arc at day {day}", v.name)));
                        }
                    }
                }
                continue;
            };
            let a = net.arcs()[ai];
            let vars = model.arc_vars[&(vi, ai)];
            let origin = &statics.node(net.origin(&a)).id;
            let kind = net.kind(&a);
            let mut out = CommodityVec::ZERO;
            for c in Commodity::ALL {
                out[c] = val(vars.cargo_out[c.index()]);
            }
            let prop_out = val(vars.prop_out);
            if v.role == VehicleRole::Launcher || kind == ArcKind::Launch {
                // Goods bought on the ground.
                if v.role != VehicleRole::Launcher {
                    holding.insert(v.name.clone(), (origin.clone(), prop_out, out));
                }
                continue;
            }
            let (node, prop, cargo) = holding
                .get(&v.name)
                .cloned()
                .ok_or_else(|| corrupt(day, format!("{} is not in the state", v.name)))?;
            if &node != origin {
                return Err(corrupt(day, format!("{} is at {node} but departs from {origin}", v.name)));
            }
            let node_kind = statics.node(net.origin(&a)).kind;
            let mut own = cargo;
            if let VehicleRole::Servicer(si) = v.role {
                own[fleet.servicers[si].propellant] += prop;
            }
            let mut took = out;
            if let VehicleRole::Servicer(si) = v.role {
                took[fleet.servicers[si].propellant] += prop_out;
            }
            if node_kind == NodeKind::Parking {
                *offered.entry(node.clone()).or_default() += own;
                *taken.entry(node.clone()).or_default() += took;
            } else {
                // At a customer: own goods minus deliveries made here now.
                let mut expected = cargo;
                for s in services.iter().filter(|s| s.vehicle == vi && s.tau == day) {
                    expected = expected - model.needs[s.need].delivery;
                }
                for c in Commodity::ALL {
                    if (expected[c] - out[c]).abs() > STATE_TOL {
                        return Err(corrupt(day, format!("{} leaves {node} with {c} {} instead of {}", v.name, out[c], expected[c])));
                    }
                }
                if (prop - prop_out).abs() > STATE_TOL {
                    return Err(corrupt(day, format!("{} leaves {node} with propellant {prop_out} instead of {prop}", v.name)));
                }
            }
            holding.insert(v.name.clone(), (node, prop_out, out));
        }
        for (node, have) in &offered {
            let took = taken.get(node).copied().unwrap_or_default();
            for c in Commodity::ALL {
                if (have[c] - took[c]).abs() > STATE_TOL {
                    return Err(corrupt(day, format!("at {node}, {c}: {} available but {} taken", have[c], took[c])));
                }
            }
        }

        // Flights, holdovers and launches.
        for (vi, v) in model.vehicles.iter().enumerate() {
            let Some(&ai) = paths[vi].iter().find(|&&ai| net.arcs()[ai].start == t) else { continue };
            let a = net.arcs()[ai];
            let vars = model.arc_vars[&(vi, ai)];
            let dest = statics.node(net.destination(&a)).id.clone();
            if v.role == VehicleRole::Launcher {
                let mut q = CommodityVec::ZERO;
                for c in Commodity::ALL {
                    q[c] = val(vars.cargo_out[c.index()]);
                }
                *loose.entry(dest).or_default() += q;
                continue;
            }
            let (_, mut prop, mut cargo) = holding[&v.name].clone();
            match v.role {
                VehicleRole::Servicer(si) if net.kind(&a) == ArcKind::Transport => {
                    let s = &fleet.servicers[si];
                    let phi = consumption_fraction(net.static_arc(&a).delta_v_km_s, s.isp_s, &statics.geometry);
                    let m0 = s.structure_mass_kg() + prop + cargo.mass_kg(prices.spare_unit_mass_kg);
                    prop -= m0 * phi;
                }
                VehicleRole::Depot(di) if net.kind(&a) == ArcKind::Holdover => {
                    let d = &fleet.depots[di];
                    cargo[d.stationkeeping_propellant] -= d.stationkeeping_kg_per_day * net.duration(&a) as f64;
                }
                _ => {}
            }
            if prop < -STATE_TOL || cargo.0.iter().any(|&x| x < -STATE_TOL) {
                return Err(corrupt(net.time(a.end), format!("{} would hold a negative quantity", v.name)));
            }
            let model_prop = val(vars.prop_arrival());
            if (model_prop - prop).abs() > STATE_TOL {
                return Err(corrupt(
                    net.time(a.end),
                    format!("{} arrives at {dest} with propellant {prop}, plan says {model_prop}", v.name),
                ));
            }
            for c in Commodity::ALL {
                let m = val(vars.cargo_arrival(c));
                if (m - cargo[c]).abs() > STATE_TOL {
                    return Err(corrupt(net.time(a.end), format!("{} arrives at {dest} with {c} {}, plan says {m}", v.name, cargo[c])));
                }
            }
            holding.insert(v.name.clone(), (dest, prop, cargo));
        }
    }

    // Compare with the flow-implied state and emit the latter.
    let implied = model
        .state_at(values, until)
        .ok_or_else(|| corrupt(until, "plan does not define the state at the hand-off".into()))?;
    for v in &implied.vehicles {
        let (node, prop, cargo) = holding
            .get(&v.name)
            .ok_or_else(|| corrupt(until, format!("{} missing from propagated state", v.name)))?;
        let same = node == &v.node
            && (prop - v.propellant_kg).abs() <= STATE_TOL
            && Commodity::ALL.iter().all(|&c| (cargo[c] - v.cargo[c]).abs() <= STATE_TOL);
        if !same {
            return Err(corrupt(until, format!("{}: propagated ({node}, {prop}, {cargo:?}) vs plan {v:?}", v.name)));
        }
    }
    for (node, q) in &implied.loose {
        let mine = loose.get(node).copied().unwrap_or_default();
        if Commodity::ALL.iter().any(|&c| (mine[c] - q[c]).abs() > STATE_TOL) {
            return Err(corrupt(until, format!("loose stock at {node}: propagated {mine:?} vs plan {q:?}")));
        }
    }
    let mut next = implied;
    let clamp = |x: &mut f64| {
        if x.abs() < STATE_TOL {
            *x = 0.0;
        }
    };
    for v in &mut next.vehicles {
        clamp(&mut v.propellant_kg);
        for x in v.cargo.0.iter_mut() {
            clamp(x);
        }
        for (c, x) in v.cargo.0.iter_mut().enumerate() {
            if Commodity::ALL[c].is_integer() {
                *x = x.round();
            }
        }
    }
    next.validate(fleet).map_err(|source| HorizonError::InvalidState { day: until, source })?;
    Ok(next)
}

/// Actions of the committed part `[t0, until)` of a plan.
pub fn committed_actions(model: &OosModel, values: &[f64], until: i64) -> Vec<Action> {
    let net = &model.network;
    let statics = &net.statics;
    let val = |v: Option<crate::milp::VarId>| v.map_or(0.0, |v| values[v.0]);
    let mut actions = Vec::new();
    for (vi, v) in model.vehicles.iter().enumerate() {
        for ai in model.path(values, vi) {
            let a = net.arcs()[ai];
            if net.time(a.start) >= until {
                continue;
            }
            let vars = model.arc_vars[&(vi, ai)];
            let mut cargo_out = CommodityVec::ZERO;
            let mut cargo_in = CommodityVec::ZERO;
            for c in Commodity::ALL {
                cargo_out[c] = val(vars.cargo_out[c.index()]);
                cargo_in[c] = val(vars.cargo_arrival(c));
            }
            let kind = match net.kind(&a) {
                ArcKind::Holdover => ActionKind::Hold,
                ArcKind::Transport => ActionKind::Transfer,
                ArcKind::Launch => ActionKind::Launch,
            };
            actions.push(Action {
                day: net.time(a.start),
                end_day: net.time(a.end),
                vehicle: v.name.clone(),
                kind,
                from: statics.node(net.origin(&a)).id.clone(),
                to: statics.node(net.destination(&a)).id.clone(),
                propellant_out_kg: val(vars.prop_out),
                propellant_in_kg: val(vars.prop_arrival()),
                cargo_out,
                cargo_in,
                need: None,
            });
        }
    }
    for s in model.services(values) {
        let p = &model.needs[s.need];
        if p.in_progress.is_some() || s.tau >= until {
            continue;
        }
        actions.push(Action {
            day: s.tau,
            end_day: crate::demand::occupancy_end(s.tau, p.service.duration_days, &net.grid),
            vehicle: model.vehicles[s.vehicle].name.clone(),
            kind: ActionKind::ServiceStart,
            from: p.need.satellite.clone(),
            to: p.need.satellite.clone(),
            propellant_out_kg: 0.0,
            propellant_in_kg: 0.0,
            cargo_out: p.delivery,
            cargo_in: CommodityVec::ZERO,
            need: Some(p.need.id),
        });
    }
    actions.sort_by(|a, b| (a.day, &a.vehicle, a.kind as u8).cmp(&(b.day, &b.vehicle, b.kind as u8)));
    actions
}

/// Cash flows of the committed part `[t0, until)`, one per (day, component).
pub fn committed_cash_flows(model: &OosModel, values: &[f64], until: i64) -> Vec<CashFlow> {
    let mut by: BTreeMap<(i64, CostComponent), f64> = BTreeMap::new();
    for &(v, c, a) in &model.terms {
        let x = values[v.0];
        if x == 0.0 {
            continue;
        }
        let day = model.booking_day(&model.meta[v.0]);
        if day < until {
            *by.entry((day, c)).or_default() += a * x;
        }
    }
    by.into_iter()
        .filter(|(_, a)| *a != 0.0)
        .map(|((day, component), amount_usd)| CashFlow { day, component, amount_usd })
        .collect()
}

/// Runs the rolling horizon for one demand realization.
pub fn run(
    scenario: &Scenario,
    needs: &[ServiceNeed],
    seed: u64,
    solver: &dyn PlanSolver,
    mut observer: Option<&mut dyn Observer>,
) -> Result<RunResult, HorizonError> {
    let problem = &scenario.problem;
    let h = scenario.horizon;
    h.validate(&problem.grid).map_err(HorizonError::Config)?;
    let sh_end = h.end_day();
    let earth = &scenario.file.earth_node;
    let investment = initial_investment(problem, &scenario.initial_state, earth);

    let mut status: BTreeMap<NeedId, NeedStatus> = needs.iter().map(|n| (n.id, NeedStatus::Pending)).collect();
    let mut state = scenario.initial_state.clone();
    let mut log = EventLog::default();
    let mut states = vec![state.clone()];
    let mut t = h.start_day;
    let mut trigger = Trigger::Start;
    let mut served_at: BTreeMap<NeedId, (i64, String)> = BTreeMap::new();

    while t < sh_end {
        let plan_end = (t + h.planning_days as i64).min(sh_end);
        // Needs whose window has closed are declined for good.
        for n in needs {
            if status[&n.id] == NeedStatus::Pending
                && !build_window(n.occurrence_day, problem.service(n).window_days, &problem.grid)
                    .into_iter()
                    .any(|tau| tau > t && tau < sh_end)
                && (!n.random || n.occurrence_day <= t)
            {
                status.insert(n.id, NeedStatus::Declined);
            }
        }
        let pending = open_needs(problem, needs, &status, t, plan_end);
        let model = plan_model(problem, &pending, &state, t, plan_end)?;
        log::info!("day {t}: {} pending needs, {}", pending.len(), model.milp);
        let solution = solver.solve(&model, seed).map_err(|source| HorizonError::Solve { day: t, source })?;
        if !solution.status.has_solution() {
            return Err(HorizonError::PlanningInfeasible {
                day: t,
                status: format!("{:?}", solution.status),
                diagnostics: format!("{model}; state {:?}", state),
            });
        }
        let values = &solution.values;

        let next_random = needs.iter().filter(|n| n.random && n.occurrence_day > t).map(|n| n.occurrence_day).min();
        let quiet = t + h.control_days as i64;
        let until = next_random.map_or(quiet, |d| d.min(quiet)).min(sh_end);
        let next_trigger = if next_random == Some(until) {
            Trigger::RandomNeeds(needs.iter().filter(|n| n.random && n.occurrence_day == until).map(|n| n.id).collect())
        } else {
            Trigger::QuietTimer
        };

        let actions = committed_actions(&model, values, until);
        let flows = committed_cash_flows(&model, values, until);
        for s in model.services(values) {
            let p = &model.needs[s.need];
            if p.in_progress.is_none() && s.tau < until {
                let servicer = model.vehicles[s.vehicle].name.clone();
                status.insert(p.need.id, NeedStatus::Served { tau: s.tau, servicer: servicer.clone() });
                served_at.insert(p.need.id, (s.tau, servicer));
            }
        }
        let next = propagate(&model, values, &state, until)?;
        log.replans.push(ReplanRecord {
            day: t,
            committed_until: until,
            trigger: std::mem::replace(&mut trigger, next_trigger),
            pending_needs: pending.len(),
            columns: model.milp.num_vars(),
            rows: model.milp.num_rows(),
            objective: solution.objective.unwrap_or(f64::NAN),
            gap: solution.gap,
            wall_time_s: solution.wall_time_s,
        });
        log.actions.extend(actions);
        log.cash_flows.extend(flows);
        state = next;
        states.push(state.clone());
        if let Some(o) = observer.as_deref_mut() {
            o.committed(&log, &state);
        }
        t = until;
    }

    let history = needs
        .iter()
        .map(|n| {
            let st = match &status[&n.id] {
                NeedStatus::Pending => NeedStatus::Declined,
                s => s.clone(),
            };
            let ty = problem.service(n);
            let (revenue, delay) = match &st {
                NeedStatus::Served { tau, .. } => (ty.revenue_usd, ty.delay_penalty_usd_per_day * (tau - n.occurrence_day) as f64),
                _ => (0.0, 0.0),
            };
            NeedOutcome { need: n.clone(), status: st, revenue_usd: revenue, delay_penalty_usd: delay }
        })
        .collect();
    let series = value_series(&log.cash_flows, investment, h.start_day, sh_end, problem.grid.interval_days);
    Ok(RunResult {
        scenario: scenario.file.name.clone(),
        seed,
        initial_investment_usd: investment,
        log,
        history,
        states,
        series,
    })
}

#[derive(Debug)]
pub struct TradeRun {
    pub architecture: String,
    pub seed: u64,
    pub result: Result<RunResult, HorizonError>,
}

/// Runs every architecture against the same demand realization per seed, with at
/// most `workers` runs in flight. Results are ordered by (seed, architecture).
pub fn compare_architectures(
    architectures: &[Scenario],
    seeds: &[u64],
    solver: &dyn PlanSolver,
    workers: usize,
) -> Result<Vec<TradeRun>, HorizonError> {
    let Some(first) = architectures.first() else { return Ok(Vec::new()) };
    for a in &architectures[1..] {
        if a.problem.satellites != first.problem.satellites || a.problem.catalog != first.problem.catalog || a.horizon != first.horizon {
            return Err(HorizonError::Config(format!(
                "architecture {} does not share satellites, services and horizons with {}",
                a.file.name, first.file.name
            )));
        }
    }
    let demand: Vec<Vec<ServiceNeed>> = seeds.iter().map(|&s| first.needs(s)).collect();
    let jobs: Vec<(usize, usize)> = (0..seeds.len()).flat_map(|s| (0..architectures.len()).map(move |a| (s, a))).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<TradeRun>>> = Mutex::new((0..jobs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(si, ai)) = jobs.get(j) else { break };
                let arch = &architectures[ai];
                let result = run(arch, &demand[si], seeds[si], solver, None);
                if let Err(e) = &result {
                    log::error!("{} seed {}: {e}", arch.file.name, seeds[si]);
                }
                results.lock().expect("results lock")[j] =
                    Some(TradeRun { architecture: arch.file.name.clone(), seed: seeds[si], result });
            });
        }
    });
    Ok(results.into_inner().expect("results lock").into_iter().map(|r| r.expect("every job ran")).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn series_counts_flows_strictly_before_each_day() {
        let flows = vec![
            CashFlow { day: 0, component: CostComponent::Servicers, amount_usd: 10.0 },
            CashFlow { day: 10, component: CostComponent::Revenue, amount_usd: 100.0 },
            CashFlow { day: 12, component: CostComponent::Delay, amount_usd: 5.0 },
        ];
        let s = value_series(&flows, 50.0, 0, 20, 10);
        assert_eq!(s.len(), 3);
        assert_eq!(s[0].value_usd, -50.0);
        assert_eq!(s[1].value_usd, -60.0);
        assert_eq!(s[2].value_usd, 35.0);
        assert_eq!(s[2].revenue_usd, 100.0);
        assert_eq!(s[2].cost_usd, 15.0);
    }

    #[test]
    fn horizon_config_validation() {
        let grid = TimeGrid::new(2, 10, 2, 100).unwrap();
        let ok = HorizonConfig { start_day: 0, planning_days: 100, control_days: 60, scheduling_days: 360 };
        assert!(ok.validate(&grid).is_ok());
        assert!(HorizonConfig { control_days: 120, ..ok }.validate(&grid).is_err());
        assert!(HorizonConfig { planning_days: 95, ..ok }.validate(&grid).is_err());
        assert!(HorizonConfig { start_day: 5, ..ok }.validate(&grid).is_err());
    }
}
