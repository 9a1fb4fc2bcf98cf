//! Assembly of the servicing MILP over a time-expanded network.
//!
//! Vehicles are individual commodities: each servicer, depot and the launcher has
//! its own binary flow `y` on every arc it may use. Servicer propellant and cargo,
//! depot stock and launched goods are continuous (spares integer) flows attached to
//! those arcs. Service assignment `h` and dispatch `b` binaries tie servicers to
//! customer nodes for the duration of each service.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::consumption_fraction;
use crate::commodity::{Commodity, CommodityVec};
use crate::demand::{build_occupancy, build_window, occupancy_end, Satellite, ServiceCatalog, ServiceNeed, ServiceType};
use crate::fleet::Fleet;
use crate::milp::{MilpError, MilpModel, Sense, VarId, VarType};
use crate::network::{ArcKind, DynamicNetwork, NodeId, NodeKind, StaticNetwork, TimeGrid};
use crate::state::{InProgressService, InfrastructureState, VehicleState, STATE_TOL};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model build failed:\n  {}", .0.join("\n  "))]
    Build(Vec<String>),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

/// Everything about the infrastructure and its customers that does not change
/// between planning horizons.
#[derive(Debug, Clone)]
pub struct Problem {
    pub fleet: Fleet,
    pub catalog: ServiceCatalog,
    pub satellites: Vec<Satellite>,
    pub network: StaticNetwork,
    pub grid: TimeGrid,
}

impl Problem {
    pub fn satellite(&self, name: &str) -> Option<&Satellite> {
        self.satellites.iter().find(|s| s.name == name)
    }

    pub fn service(&self, need: &ServiceNeed) -> &ServiceType {
        self.catalog.expect(need.kind)
    }

    /// Commodities handed over when `need` is served.
    pub fn delivery(&self, need: &ServiceNeed) -> CommodityVec {
        match self.satellite(&need.satellite) {
            Some(sat) => self.service(need).delivery_for(sat),
            None => CommodityVec::ZERO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostComponent {
    Revenue,
    Pdm,
    Launch,
    Delay,
    Depots,
    Servicers,
}

impl CostComponent {
    pub const ALL: [CostComponent; 6] = [
        CostComponent::Revenue,
        CostComponent::Pdm,
        CostComponent::Launch,
        CostComponent::Delay,
        CostComponent::Depots,
        CostComponent::Servicers,
    ];

    /// +1 for revenue, -1 for costs.
    pub fn sign(self) -> f64 {
        if self == CostComponent::Revenue {
            1.0
        } else {
            -1.0
        }
    }
}

/// Profit split into revenue and the five cost families (all non-negative).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub revenue: f64,
    pub pdm: f64,
    pub launch: f64,
    pub delay: f64,
    pub depots: f64,
    pub servicers: f64,
}

impl ObjectiveBreakdown {
    pub fn get_mut(&mut self, c: CostComponent) -> &mut f64 {
        match c {
            CostComponent::Revenue => &mut self.revenue,
            CostComponent::Pdm => &mut self.pdm,
            CostComponent::Launch => &mut self.launch,
            CostComponent::Delay => &mut self.delay,
            CostComponent::Depots => &mut self.depots,
            CostComponent::Servicers => &mut self.servicers,
        }
    }

    pub fn get(&self, c: CostComponent) -> f64 {
        let mut copy = *self;
        *copy.get_mut(c)
    }

    pub fn cost(&self) -> f64 {
        self.pdm + self.launch + self.delay + self.depots + self.servicers
    }

    pub fn profit(&self) -> f64 {
        self.revenue - self.cost()
    }

    pub fn add(&mut self, other: &ObjectiveBreakdown) {
        for c in CostComponent::ALL {
            *self.get_mut(c) += other.get(c);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleRole {
    Servicer(usize),
    Depot(usize),
    Launcher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleInfo {
    pub name: String,
    pub role: VehicleRole,
    /// Node of the vehicle at the start of the horizon.
    pub start: NodeId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArcEnd {
    Departure,
    Arrival,
}

/// Meaning of each model column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarMeta {
    Vehicle { vehicle: usize, arc: usize },
    Propellant { vehicle: usize, arc: usize, end: ArcEnd },
    Cargo { vehicle: usize, arc: usize, commodity: Commodity, end: ArcEnd },
    Assign { need: usize, vehicle: usize, tau: i64 },
    Dispatch { need: usize, vehicle: usize, day: i64 },
}

/// Columns attached to one vehicle on one arc.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcVars {
    pub y: VarId,
    pub prop_out: Option<VarId>,
    pub prop_in: Option<VarId>,
    pub cargo_out: [Option<VarId>; 3],
    pub cargo_in: [Option<VarId>; 3],
}

impl ArcVars {
    fn new(y: VarId) -> Self {
        Self { y, prop_out: None, prop_in: None, cargo_out: [None; 3], cargo_in: [None; 3] }
    }

    /// Column carrying the propellant delivered at the arc's destination.
    pub fn prop_arrival(&self) -> Option<VarId> {
        self.prop_in.or(self.prop_out)
    }

    pub fn cargo_arrival(&self, c: Commodity) -> Option<VarId> {
        self.cargo_in[c.index()].or(self.cargo_out[c.index()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedNeed {
    pub need: ServiceNeed,
    pub service: ServiceType,
    pub delivery: CommodityVec,
    /// Admissible starts inside this horizon.
    pub window: Vec<i64>,
    /// `Some((servicer, start_day, end_day))` for a service already under way.
    pub in_progress: Option<(String, i64, i64)>,
}

#[derive(Debug, Clone)]
pub struct OosModel {
    pub milp: MilpModel,
    pub network: DynamicNetwork,
    pub vehicles: Vec<VehicleInfo>,
    pub needs: Vec<PlannedNeed>,
    pub meta: Vec<VarMeta>,
    pub arc_vars: HashMap<(usize, usize), ArcVars>,
    /// Arcs usable by each vehicle, in network order.
    pub vehicle_arcs: Vec<Vec<usize>>,
    /// Cost-component contributions per column (amounts are non-negative).
    pub terms: Vec<(VarId, CostComponent, f64)>,
    /// `(need, vehicle, tau, h)` for every assignment column.
    pub assign: Vec<(usize, usize, i64, VarId)>,
    /// `(need, vehicle, day, b)` for every dispatch column.
    pub dispatch: Vec<(usize, usize, i64, VarId)>,
    pub initial: InfrastructureState,
    pub fleet: Fleet,
    /// Per-vehicle, per-static-arc propellant consumption fraction.
    pub burn_fraction: HashMap<(usize, usize), f64>,
}

impl fmt::Display for OosModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} | days {}..{} | {} vehicles | {} needs",
            self.milp,
            self.network.t0,
            self.network.end_day(),
            self.vehicles.len(),
            self.needs.len()
        )
    }
}

struct Builder<'a> {
    net: &'a DynamicNetwork,
    milp: MilpModel,
    meta: Vec<VarMeta>,
    terms: Vec<(VarId, CostComponent, f64)>,
    errors: Vec<String>,
}

impl Builder<'_> {
    fn label(&self, n: NodeId) -> &str {
        &self.net.statics.node(n).id
    }

    fn arc_label(&self, arc: usize) -> String {
        let a = &self.net.arcs()[arc];
        format!(
            "{}>{}@{}",
            self.label(self.net.origin(a)),
            self.label(self.net.destination(a)),
            self.net.time(a.start)
        )
    }

    fn var(
        &mut self,
        name: String,
        ty: VarType,
        lower: f64,
        upper: f64,
        meta: VarMeta,
        costs: &[(CostComponent, f64)],
    ) -> Result<VarId, ModelError> {
        let obj: f64 = costs.iter().map(|(c, a)| c.sign() * a).sum();
        let id = self.milp.add_var(name, ty, lower, upper, obj)?;
        self.meta.push(meta);
        for &(c, a) in costs {
            if a != 0.0 {
                self.terms.push((id, c, a));
            }
        }
        Ok(id)
    }

    fn row(&mut self, name: String, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) -> Result<(), ModelError> {
        self.milp.add_row(name, terms, sense, rhs)?;
        Ok(())
    }
}

/// Builds the planning MILP for `needs` over `net`, starting from `state`.
///
/// `needs` are pending needs (not yet started); services under way come from
/// `state.in_progress`. The network must start at `state.day`.
pub fn assemble(
    problem: &Problem,
    net: &DynamicNetwork,
    needs: &[ServiceNeed],
    state: &InfrastructureState,
) -> Result<OosModel, ModelError> {
    let fleet = &problem.fleet;
    let mut b = Builder {
        net,
        milp: MilpModel::new("OOS", true),
        meta: Vec::new(),
        terms: Vec::new(),
        errors: Vec::new(),
    };
    if net.t0 != state.day {
        b.errors.push(format!("network starts at day {} but state is dated {}", net.t0, state.day));
    }
    let statics = &net.statics;
    let last = net.last_time();

    // Vehicles present in the state, servicers first.
    let mut vehicles: Vec<VehicleInfo> = Vec::new();
    let start_of = |name: &str, errors: &mut Vec<String>| -> Option<NodeId> {
        let vs = state.vehicle(name)?;
        match statics.find(&vs.node) {
            Some(n) => Some(n),
            None => {
                errors.push(format!("vehicle {name}: node {} is not in the network", vs.node));
                None
            }
        }
    };
    for (i, s) in fleet.servicers.iter().enumerate() {
        if let Some(start) = start_of(&s.name, &mut b.errors) {
            vehicles.push(VehicleInfo { name: s.name.clone(), role: VehicleRole::Servicer(i), start });
        }
    }
    for (i, d) in fleet.depots.iter().enumerate() {
        if let Some(start) = start_of(&d.name, &mut b.errors) {
            if statics.find(&d.parking).is_none() {
                b.errors.push(format!("depot {}: parking node {} is not in the network", d.name, d.parking));
                continue;
            }
            vehicles.push(VehicleInfo { name: d.name.clone(), role: VehicleRole::Depot(i), start });
        }
    }
    let has_launch_arcs = net.arcs().iter().any(|a| net.kind(a) == ArcKind::Launch);
    if fleet.launch.is_some() && has_launch_arcs {
        let earth = statics.nodes_of(NodeKind::Earth).next().expect("network has an Earth node");
        vehicles.push(VehicleInfo { name: "launcher".into(), role: VehicleRole::Launcher, start: earth });
    }
    for vs in &state.vehicles {
        if !vehicles.iter().any(|v| v.name == vs.name) {
            b.errors.push(format!("state lists unknown vehicle {}", vs.name));
        }
    }

    // Pending and in-progress needs.
    let mut planned: Vec<PlannedNeed> = Vec::new();
    for need in needs {
        let Some(service) = problem.catalog.get(need.kind).cloned() else {
            b.errors.push(format!("need {}: service type {} not in catalog", need.id, need.kind));
            continue;
        };
        if statics.find(&need.satellite).is_none() {
            b.errors.push(format!("need {}: satellite {} is not in the network", need.id, need.satellite));
            continue;
        }
        let window: Vec<i64> = build_window(need.occurrence_day, service.window_days, &net.grid)
            .into_iter()
            .filter(|&t| t > net.t0 && t < net.end_day())
            .collect();
        let delivery = problem.delivery(need);
        planned.push(PlannedNeed { need: need.clone(), service, delivery, window, in_progress: None });
    }
    for p in &state.in_progress {
        let Some(service) = problem.catalog.get(p.need.kind).cloned() else {
            b.errors.push(format!("in-progress need {}: unknown service type", p.need.id));
            continue;
        };
        planned.push(PlannedNeed {
            need: p.need.clone(),
            service,
            delivery: CommodityVec::ZERO,
            window: vec![p.start_day],
            in_progress: Some((p.servicer.clone(), p.start_day, p.end_day)),
        });
    }

    if !b.errors.is_empty() {
        return Err(ModelError::Build(b.errors));
    }

    // Cargo commodities each servicer may carry.
    let mut cargo_set: Vec<[bool; 3]> = vec![[false; 3]; vehicles.len()];
    for (vi, v) in vehicles.iter().enumerate() {
        match v.role {
            VehicleRole::Servicer(si) => {
                let design = &fleet.servicers[si];
                for p in planned.iter().filter(|p| p.in_progress.is_none()) {
                    if design.tool_count(&p.service.tool) > 0 {
                        for (c, q) in p.delivery.iter() {
                            if q > 0.0 {
                                cargo_set[vi][c.index()] = true;
                            }
                        }
                    }
                }
                if let Some(vs) = state.vehicle(&v.name) {
                    for (c, q) in vs.cargo.iter() {
                        if q > 0.0 {
                            cargo_set[vi][c.index()] = true;
                        }
                    }
                }
            }
            VehicleRole::Depot(di) => {
                let d = &fleet.depots[di];
                let initial = state.vehicle(&v.name).map(|s| s.cargo).unwrap_or_default();
                for c in Commodity::ALL {
                    cargo_set[vi][c.index()] = d.capacity[c] > 0.0 || initial[c] > 0.0;
                }
            }
            VehicleRole::Launcher => cargo_set[vi] = [true; 3],
        }
    }

    // Dates at which each servicer has business at each customer node: earliest
    // start, latest start and latest occupancy end of the needs it can serve there.
    let t_len = net.grid.interval_days as i64;
    let mut activity: HashMap<(usize, NodeId), (i64, i64, i64)> = HashMap::new();
    for (vi, v) in vehicles.iter().enumerate() {
        let VehicleRole::Servicer(si) = v.role else { continue };
        let design = &fleet.servicers[si];
        for p in &planned {
            let node = statics.find(&p.need.satellite).expect("checked above");
            let span = match &p.in_progress {
                Some((who, start, end)) if *who == v.name => Some((*start, *start, *end)),
                Some(_) => None,
                None if design.tool_count(&p.service.tool) > 0 && !p.window.is_empty() => {
                    let lo = p.window[0];
                    let hi = *p.window.last().expect("non-empty");
                    Some((lo, hi, occupancy_end(hi, p.service.duration_days, &net.grid)))
                }
                None => None,
            };
            if let Some((lo, hi, end)) = span {
                let e = activity.entry((vi, node)).or_insert((lo, hi, end));
                *e = (e.0.min(lo), e.1.max(hi), e.2.max(end));
            }
        }
    }
    // A servicer enters a customer node at most one interval before its business
    // there, and stays no longer than its last occupancy. Its start node is exempt.
    let customer_ok = |vi: usize, node: NodeId, arrive: Option<i64>, depart: Option<i64>| -> bool {
        if statics.node(node).kind != NodeKind::Customer {
            return true;
        }
        if node == vehicles[vi].start {
            if let Some(t) = arrive {
                if let Some(&(lo, hi, _)) = activity.get(&(vi, node)) {
                    return t >= lo - t_len && t <= hi;
                }
                return false;
            }
            return true;
        }
        let Some(&(lo, hi, end)) = activity.get(&(vi, node)) else { return false };
        arrive.is_none_or(|t| t >= lo - t_len && t <= hi) && depart.is_none_or(|t| t >= lo && t <= end)
    };

    // Burn fractions and usable arcs.
    let mut burn_fraction: HashMap<(usize, usize), f64> = HashMap::new();
    let mut vehicle_arcs: Vec<Vec<usize>> = vec![Vec::new(); vehicles.len()];
    for (vi, v) in vehicles.iter().enumerate() {
        let at_earth = statics.node(v.start).kind == NodeKind::Earth;
        for (ai, a) in net.arcs().iter().enumerate() {
            let sa = net.static_arc(a);
            let usable = match (v.role, sa.kind) {
                (VehicleRole::Launcher, kind) => kind == ArcKind::Launch,
                (_, ArcKind::Launch) if !at_earth => false,
                (VehicleRole::Depot(di), kind) => {
                    let parking = statics.find(&fleet.depots[di].parking);
                    match kind {
                        ArcKind::Launch => Some(sa.destination) == parking,
                        ArcKind::Holdover => Some(sa.origin) == parking,
                        ArcKind::Transport => false,
                    }
                }
                (VehicleRole::Servicer(_), ArcKind::Holdover)
                    if statics.node(sa.origin).kind == NodeKind::Customer && sa.origin != v.start =>
                {
                    let (t, t1) = (net.time(a.start), net.time(a.end));
                    activity.get(&(vi, sa.origin)).is_some_and(|&(lo, _, end)| t >= lo - t_len && t1 <= end)
                }
                (VehicleRole::Servicer(si), ArcKind::Transport) => {
                    if !customer_ok(vi, sa.origin, None, Some(net.time(a.start)))
                        || !customer_ok(vi, sa.destination, Some(net.time(a.end)), None)
                    {
                        continue;
                    }
                    let s = &fleet.servicers[si];
                    let phi = *burn_fraction
                        .entry((vi, a.static_arc))
                        .or_insert_with(|| consumption_fraction(sa.delta_v_km_s, s.isp_s, &statics.geometry));
                    phi < 1.0 && phi * s.structure_mass_kg() / (1.0 - phi) <= s.tank_kg
                }
                (VehicleRole::Servicer(_), _) => true,
            };
            if usable {
                vehicle_arcs[vi].push(ai);
            }
        }
    }

    // Flow columns.
    let mut arc_vars: HashMap<(usize, usize), ArcVars> = HashMap::new();
    for (vi, v) in vehicles.iter().enumerate() {
        for &ai in &vehicle_arcs[vi] {
            let a = net.arcs()[ai];
            let kind = net.kind(&a);
            let days = net.duration(&a) as f64;
            let label = format!("{}:{}", v.name, b.arc_label(ai));
            let launch_cost = fleet.launch.map_or(0.0, |l| l.cost_usd_per_kg);
            let y_costs: Vec<(CostComponent, f64)> = match (v.role, kind) {
                (VehicleRole::Launcher, _) => vec![],
                (VehicleRole::Servicer(si), ArcKind::Launch) => {
                    let s = &fleet.servicers[si];
                    vec![(CostComponent::Pdm, s.pdm_usd()), (CostComponent::Launch, launch_cost * s.structure_mass_kg())]
                }
                (VehicleRole::Servicer(si), _) => {
                    vec![(CostComponent::Servicers, fleet.servicers[si].operating_usd_per_day * days)]
                }
                (VehicleRole::Depot(di), ArcKind::Launch) => {
                    let d = &fleet.depots[di];
                    vec![(CostComponent::Pdm, d.manufacturing_usd), (CostComponent::Launch, launch_cost * d.dry_mass_kg)]
                }
                (VehicleRole::Depot(di), _) => {
                    vec![(CostComponent::Depots, fleet.depots[di].operating_usd_per_day * days)]
                }
            };
            let y = b.var(format!("y:{label}"), VarType::Binary, 0.0, 1.0, VarMeta::Vehicle { vehicle: vi, arc: ai }, &y_costs)?;
            let mut vars = ArcVars::new(y);
            let goods_costs = |c: Commodity, mass: f64| -> Vec<(CostComponent, f64)> {
                if kind == ArcKind::Launch {
                    vec![(CostComponent::Pdm, fleet.prices.unit_cost_usd[c]), (CostComponent::Launch, launch_cost * mass)]
                } else {
                    vec![]
                }
            };
            if let VehicleRole::Servicer(si) = v.role {
                let s = &fleet.servicers[si];
                let costs = goods_costs(s.propellant, 1.0);
                vars.prop_out = Some(b.var(
                    format!("p+:{label}"),
                    VarType::Continuous,
                    0.0,
                    s.tank_kg,
                    VarMeta::Propellant { vehicle: vi, arc: ai, end: ArcEnd::Departure },
                    &costs,
                )?);
                let phi = burn_fraction.get(&(vi, a.static_arc)).copied().unwrap_or(0.0);
                if kind == ArcKind::Transport && phi > 0.0 {
                    vars.prop_in = Some(b.var(
                        format!("p-:{label}"),
                        VarType::Continuous,
                        0.0,
                        s.tank_kg,
                        VarMeta::Propellant { vehicle: vi, arc: ai, end: ArcEnd::Arrival },
                        &[],
                    )?);
                }
            }
            for c in Commodity::ALL {
                if !cargo_set[vi][c.index()] {
                    continue;
                }
                let mass = fleet.prices.unit_mass_kg(c);
                let ub = match v.role {
                    VehicleRole::Servicer(si) => fleet.servicers[si].payload_kg / mass,
                    VehicleRole::Depot(di) => fleet.depots[di].capacity[c],
                    VehicleRole::Launcher => fleet.launch.map_or(0.0, |l| l.capacity_kg) / mass,
                };
                let ub = if c.is_integer() { ub.floor() } else { ub };
                let ty = if c.is_integer() { VarType::Integer } else { VarType::Continuous };
                let costs = goods_costs(c, mass);
                vars.cargo_out[c.index()] = Some(b.var(
                    format!("x+:{label}:{c}"),
                    ty,
                    0.0,
                    ub,
                    VarMeta::Cargo { vehicle: vi, arc: ai, commodity: c, end: ArcEnd::Departure },
                    &costs,
                )?);
                if let VehicleRole::Depot(di) = v.role {
                    let d = &fleet.depots[di];
                    if kind == ArcKind::Holdover && d.stationkeeping_propellant == c && d.stationkeeping_kg_per_day > 0.0 {
                        vars.cargo_in[c.index()] = Some(b.var(
                            format!("x-:{label}:{c}"),
                            ty,
                            0.0,
                            ub,
                            VarMeta::Cargo { vehicle: vi, arc: ai, commodity: c, end: ArcEnd::Arrival },
                            &[],
                        )?);
                    }
                }
            }
            arc_vars.insert((vi, ai), vars);
        }
    }

    // Service columns.
    let mut assign: Vec<(usize, usize, i64, VarId)> = Vec::new();
    let mut dispatch: Vec<(usize, usize, i64, VarId)> = Vec::new();
    let times = net.times().to_vec();
    let usable_times: Vec<i64> = times[..last].to_vec();
    // (need, vehicle) -> list of (tau, h)
    let mut h_of: BTreeMap<(usize, usize), Vec<(i64, VarId)>> = BTreeMap::new();
    for (ni, p) in planned.iter().enumerate() {
        for (vi, v) in vehicles.iter().enumerate() {
            let VehicleRole::Servicer(si) = v.role else { continue };
            let design = &fleet.servicers[si];
            match &p.in_progress {
                Some((servicer, start, _)) => {
                    if servicer != &v.name {
                        continue;
                    }
                    let h = b.var(
                        format!("h:{}:{}@{}", p.need.id, v.name, start),
                        VarType::Binary,
                        1.0,
                        1.0,
                        VarMeta::Assign { need: ni, vehicle: vi, tau: *start },
                        &[],
                    )?;
                    assign.push((ni, vi, *start, h));
                    h_of.entry((ni, vi)).or_default().push((*start, h));
                }
                None => {
                    if design.tool_count(&p.service.tool) == 0 {
                        continue;
                    }
                    for &tau in &p.window {
                        let delay_days = (tau - p.need.occurrence_day) as f64;
                        let costs = [
                            (CostComponent::Revenue, p.service.revenue_usd),
                            (CostComponent::Delay, p.service.delay_penalty_usd_per_day * delay_days),
                        ];
                        let h = b.var(
                            format!("h:{}:{}@{}", p.need.id, v.name, tau),
                            VarType::Binary,
                            0.0,
                            1.0,
                            VarMeta::Assign { need: ni, vehicle: vi, tau },
                            &costs,
                        )?;
                        assign.push((ni, vi, tau, h));
                        h_of.entry((ni, vi)).or_default().push((tau, h));
                    }
                }
            }
        }
    }
    for p in &planned {
        if let Some((servicer, _, _)) = &p.in_progress {
            if !vehicles.iter().any(|v| &v.name == servicer) {
                b.errors.push(format!("in-progress need {}: servicer {servicer} not present", p.need.id));
            }
        }
    }
    // b columns and linking rows, grouped by (need, vehicle).
    let mut b_of: BTreeMap<(usize, usize), Vec<(i64, VarId)>> = BTreeMap::new();
    for (&(ni, vi), hs) in &h_of {
        let p = &planned[ni];
        let mut occ: BTreeMap<i64, Vec<VarId>> = BTreeMap::new();
        for &(tau, h) in hs {
            let busy: Vec<i64> = match &p.in_progress {
                Some((_, _, end)) => usable_times.iter().copied().filter(|&t| t < *end).collect(),
                None => build_occupancy(tau, p.service.duration_days, &net.grid, &usable_times),
            };
            for t in busy {
                occ.entry(t).or_default().push(h);
            }
        }
        for (t, hs_at) in occ {
            let bv = b.var(
                format!("b:{}:{}@{}", p.need.id, vehicles[vi].name, t),
                VarType::Binary,
                0.0,
                1.0,
                VarMeta::Dispatch { need: ni, vehicle: vi, day: t },
                &[],
            )?;
            dispatch.push((ni, vi, t, bv));
            b_of.entry((ni, vi)).or_default().push((t, bv));
            let mut terms = vec![(bv, 1.0)];
            terms.extend(hs_at.into_iter().map(|h| (h, -1.0)));
            b.row(format!("link:{}:{}@{}", p.need.id, vehicles[vi].name, t), terms, Sense::Eq, 0.0)?;
        }
    }

    // Vehicle capacity, burn and launcher rows.
    for (vi, v) in vehicles.iter().enumerate() {
        for &ai in &vehicle_arcs[vi] {
            let a = net.arcs()[ai];
            let vars = arc_vars[&(vi, ai)];
            let label = format!("{}:{}", v.name, b.arc_label(ai));
            match v.role {
                VehicleRole::Servicer(si) => {
                    let s = &fleet.servicers[si];
                    let p_out = vars.prop_out.expect("servicer propellant column");
                    b.row(format!("tank:{label}"), vec![(p_out, 1.0), (vars.y, -s.tank_kg)], Sense::Le, 0.0)?;
                    let cargo: Vec<(VarId, f64)> = Commodity::ALL
                        .iter()
                        .filter_map(|&c| vars.cargo_out[c.index()].map(|x| (x, fleet.prices.unit_mass_kg(c))))
                        .collect();
                    if !cargo.is_empty() {
                        let mut t = cargo.clone();
                        t.push((vars.y, -s.payload_kg));
                        b.row(format!("payload:{label}"), t, Sense::Le, 0.0)?;
                    }
                    if let Some(p_in) = vars.prop_in {
                        let phi = burn_fraction[&(vi, a.static_arc)];
                        let mut t = vec![(p_in, 1.0), (p_out, phi - 1.0), (vars.y, phi * s.structure_mass_kg())];
                        t.extend(cargo.iter().map(|&(x, m)| (x, phi * m)));
                        b.row(format!("burn:{label}"), t, Sense::Eq, 0.0)?;
                    }
                }
                VehicleRole::Depot(di) => {
                    let d = &fleet.depots[di];
                    for c in Commodity::ALL {
                        if let Some(x) = vars.cargo_out[c.index()] {
                            b.row(format!("store:{label}:{c}"), vec![(x, 1.0), (vars.y, -d.capacity[c])], Sense::Le, 0.0)?;
                        }
                        if let Some(x_in) = vars.cargo_in[c.index()] {
                            let x_out = vars.cargo_out[c.index()].expect("depot stock column");
                            let burn = d.stationkeeping_kg_per_day * net.duration(&a) as f64;
                            b.row(
                                format!("keep:{label}:{c}"),
                                vec![(x_in, 1.0), (x_out, -1.0), (vars.y, burn)],
                                Sense::Eq,
                                0.0,
                            )?;
                        }
                    }
                }
                VehicleRole::Launcher => {
                    let cap = fleet.launch.map_or(0.0, |l| l.capacity_kg);
                    let mut t: Vec<(VarId, f64)> = Commodity::ALL
                        .iter()
                        .filter_map(|&c| vars.cargo_out[c.index()].map(|x| (x, fleet.prices.unit_mass_kg(c))))
                        .collect();
                    for (wi, w) in vehicles.iter().enumerate() {
                        if wi == vi {
                            continue;
                        }
                        let Some(wv) = arc_vars.get(&(wi, ai)) else { continue };
                        let structure = match w.role {
                            VehicleRole::Servicer(si) => fleet.servicers[si].structure_mass_kg(),
                            VehicleRole::Depot(di) => fleet.depots[di].dry_mass_kg,
                            VehicleRole::Launcher => 0.0,
                        };
                        t.push((wv.y, structure));
                        if let Some(p) = wv.prop_out {
                            t.push((p, 1.0));
                        }
                        for c in Commodity::ALL {
                            if let Some(x) = wv.cargo_out[c.index()] {
                                t.push((x, fleet.prices.unit_mass_kg(c)));
                            }
                        }
                    }
                    t.push((vars.y, -cap));
                    b.row(format!("lift:{label}"), t, Sense::Le, 0.0)?;
                }
            }
        }
        if v.role == VehicleRole::Launcher {
            let mut by_time: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
            for &ai in &vehicle_arcs[vi] {
                by_time.entry(net.arcs()[ai].start).or_default().push(arc_vars[&(vi, ai)].y);
            }
            for (t, ys) in by_time {
                if ys.len() > 1 {
                    b.row(format!("launcher@{}", net.time(t)), ys.into_iter().map(|y| (y, 1.0)).collect(), Sense::Le, 1.0)?;
                }
            }
        }
    }

    // Vehicle conservation.
    for (vi, v) in vehicles.iter().enumerate() {
        if v.role == VehicleRole::Launcher {
            continue;
        }
        let mut out_terms: BTreeMap<(NodeId, usize), Vec<VarId>> = BTreeMap::new();
        let mut in_terms: BTreeMap<(NodeId, usize), Vec<VarId>> = BTreeMap::new();
        for &ai in &vehicle_arcs[vi] {
            let a = net.arcs()[ai];
            let y = arc_vars[&(vi, ai)].y;
            out_terms.entry((net.origin(&a), a.start)).or_default().push(y);
            in_terms.entry((net.destination(&a), a.end)).or_default().push(y);
        }
        let earth_start = statics.node(v.start).kind == NodeKind::Earth;
        if earth_start {
            let launches: Vec<(VarId, f64)> = out_terms
                .iter()
                .filter(|((n, _), _)| *n == v.start)
                .flat_map(|(_, ys)| ys.iter().map(|&y| (y, 1.0)))
                .collect();
            if !launches.is_empty() {
                b.row(format!("stock:{}", v.name), launches, Sense::Le, 1.0)?;
            }
        }
        for node in statics.nodes().iter().enumerate().filter(|(_, n)| n.kind.is_orbital()).map(|(i, _)| NodeId(i)) {
            for t in 0..last {
                let supply = if t == 0 && node == v.start { 1.0 } else { 0.0 };
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                if let Some(ys) = out_terms.get(&(node, t)) {
                    terms.extend(ys.iter().map(|&y| (y, 1.0)));
                }
                if let Some(ys) = in_terms.get(&(node, t)) {
                    terms.extend(ys.iter().map(|&y| (y, -1.0)));
                }
                if terms.is_empty() && supply == 0.0 {
                    continue;
                }
                b.row(format!("veh:{}:{}@{}", v.name, b.label(node), net.time(t)), terms, Sense::Eq, supply)?;
            }
        }
    }

    // Commodity conservation. Parking nodes pool all vehicles; customer nodes keep
    // each servicer's goods separate. Rows are equalities so that nothing is discarded.
    let mut initial_supply: HashMap<(NodeId, Option<usize>), CommodityVec> = HashMap::new();
    let mut initial_prop: HashMap<usize, f64> = HashMap::new();
    for (vi, v) in vehicles.iter().enumerate() {
        let Some(vs) = state.vehicle(&v.name) else { continue };
        let kind = statics.node(v.start).kind;
        let key = if kind == NodeKind::Parking { (v.start, None) } else { (v.start, Some(vi)) };
        let mut q = vs.cargo;
        if let VehicleRole::Servicer(si) = v.role {
            if kind == NodeKind::Parking {
                q[fleet.servicers[si].propellant] += vs.propellant_kg;
            } else {
                initial_prop.insert(vi, vs.propellant_kg);
            }
        }
        *initial_supply.entry(key).or_default() += q;
    }
    for (node, q) in &state.loose {
        match statics.find(node) {
            Some(n) if statics.node(n).kind == NodeKind::Parking => {
                *initial_supply.entry((n, None)).or_default() += *q;
            }
            _ => b.errors.push(format!("loose stock at {node}, which is not a parking node")),
        }
    }

    // Per-vehicle arc lists by (node, time) for commodity rows.
    struct Flow {
        vehicle: usize,
        vars: ArcVars,
    }
    let mut outs: HashMap<(NodeId, usize), Vec<Flow>> = HashMap::new();
    let mut ins: HashMap<(NodeId, usize), Vec<Flow>> = HashMap::new();
    for (vi, arcs) in vehicle_arcs.iter().enumerate() {
        for &ai in arcs {
            let a = net.arcs()[ai];
            let vars = arc_vars[&(vi, ai)];
            outs.entry((net.origin(&a), a.start)).or_default().push(Flow { vehicle: vi, vars });
            ins.entry((net.destination(&a), a.end)).or_default().push(Flow { vehicle: vi, vars });
        }
    }
    let commodity_of_prop = |vi: usize| -> Option<Commodity> {
        match vehicles[vi].role {
            VehicleRole::Servicer(si) => Some(fleet.servicers[si].propellant),
            _ => None,
        }
    };
    let empty: Vec<Flow> = Vec::new();
    for pnode in statics.nodes_of(NodeKind::Parking) {
        for t in 0..last {
            let o = outs.get(&(pnode, t)).unwrap_or(&empty);
            let i = ins.get(&(pnode, t)).unwrap_or(&empty);
            let supply = if t == 0 { initial_supply.get(&(pnode, None)).copied().unwrap_or_default() } else { CommodityVec::ZERO };
            for c in Commodity::ALL {
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                for f in o {
                    if commodity_of_prop(f.vehicle) == Some(c) {
                        terms.extend(f.vars.prop_out.map(|x| (x, 1.0)));
                    }
                    terms.extend(f.vars.cargo_out[c.index()].map(|x| (x, 1.0)));
                }
                for f in i {
                    if commodity_of_prop(f.vehicle) == Some(c) {
                        terms.extend(f.vars.prop_arrival().map(|x| (x, -1.0)));
                    }
                    terms.extend(f.vars.cargo_arrival(c).map(|x| (x, -1.0)));
                }
                if terms.is_empty() {
                    if supply[c] > STATE_TOL {
                        b.errors.push(format!("{} {c} at {} cannot be held by any vehicle", supply[c], b.label(pnode)));
                    }
                    continue;
                }
                b.row(format!("pool:{c}:{}@{}", b.label(pnode), net.time(t)), terms, Sense::Eq, supply[c])?;
            }
        }
    }

    // Deliveries at customer nodes: (node, t, vehicle) -> [(h, quantity vec)]
    let mut deliveries: HashMap<(NodeId, usize, usize), Vec<(VarId, CommodityVec)>> = HashMap::new();
    for &(ni, vi, tau, h) in &assign {
        let p = &planned[ni];
        if p.in_progress.is_some() || p.delivery.is_zero() {
            continue;
        }
        let node = statics.find(&p.need.satellite).expect("checked above");
        let t = net.time_index(tau).expect("window inside grid");
        deliveries.entry((node, t, vi)).or_default().push((h, p.delivery));
    }
    for cnode in statics.nodes_of(NodeKind::Customer) {
        for t in 0..last {
            let o = outs.get(&(cnode, t)).unwrap_or(&empty);
            let i = ins.get(&(cnode, t)).unwrap_or(&empty);
            for (vi, v) in vehicles.iter().enumerate() {
                let VehicleRole::Servicer(_) = v.role else { continue };
                let mine_out: Vec<&Flow> = o.iter().filter(|f| f.vehicle == vi).collect();
                let mine_in: Vec<&Flow> = i.iter().filter(|f| f.vehicle == vi).collect();
                if mine_out.is_empty() && mine_in.is_empty() {
                    continue;
                }
                let at_start = t == 0 && v.start == cnode;
                let supply = if at_start {
                    initial_supply.get(&(cnode, Some(vi))).copied().unwrap_or_default()
                } else {
                    CommodityVec::ZERO
                };
                let prop_supply = if at_start { initial_prop.get(&vi).copied().unwrap_or(0.0) } else { 0.0 };
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                terms.extend(mine_out.iter().filter_map(|f| f.vars.prop_out.map(|x| (x, 1.0))));
                terms.extend(mine_in.iter().filter_map(|f| f.vars.prop_arrival().map(|x| (x, -1.0))));
                if !terms.is_empty() {
                    b.row(format!("prop:{}:{}@{}", v.name, b.label(cnode), net.time(t)), terms, Sense::Eq, prop_supply)?;
                }
                let dels = deliveries.get(&(cnode, t, vi));
                for c in Commodity::ALL {
                    if !cargo_set[vi][c.index()] {
                        continue;
                    }
                    let mut terms: Vec<(VarId, f64)> = Vec::new();
                    terms.extend(mine_out.iter().filter_map(|f| f.vars.cargo_out[c.index()].map(|x| (x, 1.0))));
                    terms.extend(mine_in.iter().filter_map(|f| f.vars.cargo_arrival(c).map(|x| (x, -1.0))));
                    if let Some(ds) = dels {
                        terms.extend(ds.iter().filter(|(_, q)| q[c] > 0.0).map(|&(h, q)| (h, q[c])));
                    }
                    if terms.is_empty() {
                        continue;
                    }
                    b.row(format!("cargo:{}:{c}:{}@{}", v.name, b.label(cnode), net.time(t)), terms, Sense::Eq, supply[c])?;
                }
            }
        }
    }

    // Each need served at most once.
    let mut by_need: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
    for &(ni, _, _, h) in &assign {
        by_need.entry(ni).or_default().push(h);
    }
    for (ni, hs) in by_need {
        if planned[ni].in_progress.is_some() {
            continue;
        }
        b.row(format!("once:{}", planned[ni].need.id), hs.into_iter().map(|h| (h, 1.0)).collect(), Sense::Le, 1.0)?;
    }

    // At most one service per customer and time node.
    let mut by_site: BTreeMap<(String, i64), Vec<VarId>> = BTreeMap::new();
    for &(ni, _, t, bv) in &dispatch {
        by_site.entry((planned[ni].need.satellite.clone(), t)).or_default().push(bv);
    }
    for ((site, t), bs) in by_site {
        if bs.len() > 1 {
            b.row(format!("excl:{site}@{t}"), bs.into_iter().map(|x| (x, 1.0)).collect(), Sense::Le, 1.0)?;
        }
    }

    // Tool presence pins the servicer at the customer while busy.
    let mut pins: BTreeMap<(usize, String, usize, String), Vec<VarId>> = BTreeMap::new();
    for &(ni, vi, t, bv) in &dispatch {
        let p = &planned[ni];
        let ti = net.time_index(t).expect("occupancy on grid");
        pins.entry((vi, p.need.satellite.clone(), ti, p.service.tool.clone())).or_default().push(bv);
    }
    for ((vi, site, ti, tool), bs) in pins {
        let node = statics.find(&site).expect("checked above");
        let VehicleRole::Servicer(si) = vehicles[vi].role else { unreachable!() };
        let count = fleet.servicers[si].tool_count(&tool) as f64;
        let hold = net.holdover(node, ti).and_then(|ai| arc_vars.get(&(vi, ai)).map(|v| v.y));
        let mut terms: Vec<(VarId, f64)> = bs.iter().map(|&x| (x, -1.0)).collect();
        if let Some(y) = hold {
            terms.push((y, count));
        }
        b.row(format!("tool:{}:{tool}:{site}@{}", vehicles[vi].name, net.time(ti)), terms, Sense::Ge, 0.0)?;
    }

    if !b.errors.is_empty() {
        return Err(ModelError::Build(b.errors));
    }
    log::debug!("{} (days {}..{})", b.milp, net.t0, net.end_day());
    Ok(OosModel {
        milp: b.milp,
        network: net.clone(),
        vehicles,
        needs: planned,
        meta: b.meta,
        arc_vars,
        vehicle_arcs,
        terms: b.terms,
        assign,
        dispatch,
        initial: state.clone(),
        fleet: fleet.clone(),
        burn_fraction,
    })
}

/// A service start read from a solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceStart {
    pub need: usize,
    pub vehicle: usize,
    pub tau: i64,
}

impl OosModel {
    pub fn vehicle_index(&self, name: &str) -> Option<usize> {
        self.vehicles.iter().position(|v| v.name == name)
    }

    pub fn breakdown(&self, values: &[f64]) -> ObjectiveBreakdown {
        let mut b = ObjectiveBreakdown::default();
        for &(v, c, a) in &self.terms {
            *b.get_mut(c) += a * values[v.0];
        }
        b
    }

    /// Breakdown restricted to columns accepted by `keep`.
    pub fn breakdown_where(&self, values: &[f64], keep: impl Fn(&VarMeta) -> bool) -> ObjectiveBreakdown {
        let mut b = ObjectiveBreakdown::default();
        for &(v, c, a) in &self.terms {
            if keep(&self.meta[v.0]) {
                *b.get_mut(c) += a * values[v.0];
            }
        }
        b
    }

    /// Day at which the cash flow of a column is booked.
    pub fn booking_day(&self, meta: &VarMeta) -> i64 {
        match *meta {
            VarMeta::Vehicle { arc, .. } | VarMeta::Propellant { arc, .. } | VarMeta::Cargo { arc, .. } => {
                self.network.time(self.network.arcs()[arc].start)
            }
            VarMeta::Assign { tau, .. } => tau,
            VarMeta::Dispatch { day, .. } => day,
        }
    }

    pub fn services(&self, values: &[f64]) -> Vec<ServiceStart> {
        let mut out: Vec<ServiceStart> = self
            .assign
            .iter()
            .filter(|&&(_, _, _, h)| values[h.0] > 0.5)
            .map(|&(need, vehicle, tau, _)| ServiceStart { need, vehicle, tau })
            .collect();
        out.sort_by_key(|s| (s.tau, s.need));
        out
    }

    /// Arcs used by `vehicle`, ordered by departure.
    pub fn path(&self, values: &[f64], vehicle: usize) -> Vec<usize> {
        let mut arcs: Vec<usize> = self.vehicle_arcs[vehicle]
            .iter()
            .copied()
            .filter(|ai| values[self.arc_vars[&(vehicle, *ai)].y.0] > 0.5)
            .collect();
        arcs.sort_by_key(|&ai| (self.network.arcs()[ai].start, ai));
        arcs
    }

    fn value_of(values: &[f64], v: Option<VarId>) -> f64 {
        v.map_or(0.0, |v| values[v.0])
    }

    /// Infrastructure state implied by the solution at time node `day`: every vehicle
    /// where its arriving arc ends, carrying the arrival-side quantities.
    pub fn state_at(&self, values: &[f64], day: i64) -> Option<InfrastructureState> {
        let ti = self.network.time_index(day)?;
        let statics = &self.network.statics;
        let mut vehicles = Vec::new();
        let mut loose: BTreeMap<String, CommodityVec> = BTreeMap::new();
        for (vi, v) in self.vehicles.iter().enumerate() {
            let arriving = self.vehicle_arcs[vi]
                .iter()
                .copied()
                .find(|&ai| self.network.arcs()[ai].end == ti && values[self.arc_vars[&(vi, ai)].y.0] > 0.5);
            match (v.role, arriving) {
                (VehicleRole::Launcher, Some(ai)) => {
                    let vars = self.arc_vars[&(vi, ai)];
                    let node = statics.node(self.network.destination(&self.network.arcs()[ai])).id.clone();
                    let entry = loose.entry(node).or_default();
                    for c in Commodity::ALL {
                        entry[c] += Self::value_of(values, vars.cargo_arrival(c));
                    }
                }
                (VehicleRole::Launcher, None) => {}
                (_, Some(ai)) => {
                    let vars = self.arc_vars[&(vi, ai)];
                    let node = statics.node(self.network.destination(&self.network.arcs()[ai])).id.clone();
                    let mut cargo = CommodityVec::ZERO;
                    for c in Commodity::ALL {
                        cargo[c] = Self::value_of(values, vars.cargo_arrival(c));
                    }
                    vehicles.push(VehicleState {
                        name: v.name.clone(),
                        node,
                        propellant_kg: Self::value_of(values, vars.prop_arrival()),
                        cargo,
                    });
                }
                (_, None) => {
                    // Never left its start: only possible for vehicles still on the ground.
                    let vs = self.initial.vehicle(&v.name)?;
                    if ti != 0 && statics.node(v.start).kind != NodeKind::Earth {
                        return None;
                    }
                    vehicles.push(vs.clone());
                }
            }
        }
        if ti == 0 {
            for (n, q) in &self.initial.loose {
                *loose.entry(n.clone()).or_default() += *q;
            }
        }
        loose.retain(|_, q| q.0.iter().any(|&x| x > STATE_TOL));
        let mut in_progress = Vec::new();
        for p in &self.initial.in_progress {
            if p.end_day > day {
                in_progress.push(p.clone());
            }
        }
        for s in self.services(values) {
            let p = &self.needs[s.need];
            if p.in_progress.is_some() || s.tau >= day {
                continue;
            }
            let end = crate::demand::occupancy_end(s.tau, p.service.duration_days, &self.network.grid);
            if end > day {
                in_progress.push(InProgressService {
                    need: p.need.clone(),
                    servicer: self.vehicles[s.vehicle].name.clone(),
                    start_day: s.tau,
                    end_day: end,
                });
            }
        }
        Some(InfrastructureState { day, vehicles, loose, in_progress })
    }
}
