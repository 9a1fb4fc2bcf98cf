//! Scenario files: JSON description of satellites, services, fleet, prices, time grid,
//! horizons, initial state and demand settings.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::{OrbitGeometry, DEFAULT_R_CRIT_KM, G0_M_S2, GEO_RADIUS_KM, MU_EARTH_KM3_S2};
use crate::commodity::{Commodity, CommodityVec};
use crate::demand::{
    generate_deterministic, generate_random, number_needs, occupancy_end, NeedId, Occurrence, PhaseOffsets,
    Satellite, ServiceCatalog, ServiceKind, ServiceNeed, ServiceType,
};
use crate::fleet::{DepotDesign, Fleet, LaunchDesign, Prices, ServicerDesign};
use crate::horizon::HorizonConfig;
use crate::model::Problem;
use crate::network::{Node, StaticNetwork, TimeGrid};
use crate::state::{InProgressService, InfrastructureState, VehicleState};

pub const DEFAULT_PAYLOAD_KG: f64 = 500.0;
pub const DEFAULT_SPARE_UNIT_MASS_KG: f64 = 10.0;
pub const DEFAULT_DEPOT_DRY_MASS_KG: f64 = 2000.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema error at `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("invalid scenario:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_radius_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_crit_km: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_km3_s2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0_m_s2: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGridSpec {
    pub dt_days: u32,
    pub interval_days: u32,
    pub flight_steps: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSpec {
    #[serde(default)]
    pub start_day: i64,
    pub planning_days: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_days: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheduling_days: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommoditySpec {
    pub bipropellant_usd_per_kg: f64,
    pub monopropellant_usd_per_kg: f64,
    pub spares_usd_per_kg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spare_unit_mass_kg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolSpec {
    pub name: String,
    pub mass_kg: f64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccurrenceSpec {
    Deterministic,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceTypeSpec {
    pub kind: ServiceKind,
    pub occurrence: OccurrenceSpec,
    pub revenue_usd_m: f64,
    pub delay_penalty_usd_per_day: f64,
    pub duration_days: u32,
    pub window_days: u32,
    /// `null` means the need never arises.
    pub interoccurrence_days: Option<f64>,
    pub tool: String,
    #[serde(default)]
    pub propellant_delivery_kg: f64,
    #[serde(default)]
    pub spares_delivery_units: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SatelliteSpec {
    pub name: String,
    pub longitude_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wet_mass_kg: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propellant: Option<Commodity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParkingSpec {
    pub name: String,
    pub longitude_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CargoSpec {
    #[serde(default)]
    pub bipropellant_kg: f64,
    #[serde(default)]
    pub monopropellant_kg: f64,
    #[serde(default)]
    pub spares_units: u32,
}

impl CargoSpec {
    pub fn to_vec(self) -> CommodityVec {
        CommodityVec([self.bipropellant_kg, self.monopropellant_kg, self.spares_units as f64])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServicerSpec {
    pub name: String,
    pub tools: Vec<String>,
    pub dry_mass_kg: f64,
    pub propellant_capacity_kg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload_capacity_kg: Option<f64>,
    pub isp_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propellant: Option<Commodity>,
    pub manufacturing_cost_usd_m: f64,
    pub operating_cost_usd_per_day: f64,
    pub initial_node: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_propellant_kg: Option<f64>,
    #[serde(default)]
    pub initial_cargo: CargoSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DepotSpec {
    pub name: String,
    pub parking: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dry_mass_kg: Option<f64>,
    pub capacity: CargoSpec,
    pub manufacturing_cost_usd_m: f64,
    pub operating_cost_usd_per_day: f64,
    pub stationkeeping_kg_per_day: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationkeeping_propellant: Option<Commodity>,
    #[serde(default)]
    pub initial_stock: CargoSpec,
    /// Defaults to the parking node (pre-deployed); the Earth node means not yet launched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_node: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaunchSpec {
    pub period_days: u32,
    pub capacity_kg: f64,
    pub cost_usd_per_kg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialServiceSpec {
    pub servicer: String,
    pub satellite: String,
    pub kind: ServiceKind,
    pub started_day: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseSpec {
    Zero,
    Seeded,
    Explicit(Vec<PhaseOffsetSpec>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseOffsetSpec {
    pub satellite: String,
    pub kind: ServiceKind,
    pub offset_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitNeedSpec {
    pub satellite: String,
    pub kind: ServiceKind,
    pub day: i64,
    #[serde(default)]
    pub random: bool,
}

fn yes() -> bool {
    true
}

fn seeded() -> PhaseSpec {
    PhaseSpec::Seeded
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default = "seeded")]
    pub phase_offsets: PhaseSpec,
    #[serde(default = "yes")]
    pub deterministic: bool,
    #[serde(default = "yes")]
    pub random: bool,
    /// When present, replaces generated needs entirely.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub explicit_needs: Option<Vec<ExplicitNeedSpec>>,
}

impl Default for DemandSpec {
    fn default() -> Self {
        Self { seeds: Vec::new(), phase_offsets: PhaseSpec::Seeded, deterministic: true, random: true, explicit_needs: None }
    }
}

fn earth() -> String {
    "Earth".into()
}

/// On-disk form of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    #[serde(default)]
    pub constants: ConstantsSpec,
    pub time_grid: TimeGridSpec,
    pub horizon: HorizonSpec,
    pub commodities: CommoditySpec,
    pub tools: Vec<ToolSpec>,
    pub service_types: Vec<ServiceTypeSpec>,
    pub satellites: Vec<SatelliteSpec>,
    pub parking: Vec<ParkingSpec>,
    #[serde(default = "earth")]
    pub earth_node: String,
    pub servicers: Vec<ServicerSpec>,
    #[serde(default)]
    pub depots: Vec<DepotSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub launch: Option<LaunchSpec>,
    #[serde(default)]
    pub initial_services: Vec<InitialServiceSpec>,
    #[serde(default)]
    pub demand: DemandSpec,
}

/// A validated scenario ready for planning.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub problem: Problem,
    pub initial_state: InfrastructureState,
    pub horizon: HorizonConfig,
    /// Defaults applied while loading, one line each.
    pub defaults_applied: Vec<String>,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile, ScenarioError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ScenarioError::Schema {
        field: e.path().to_string(),
        message: e.inner().to_string(),
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    let scenario = Scenario::from_file(parse_scenario(&text)?)?;
    for d in &scenario.defaults_applied {
        log::info!("{}: default applied: {d}", path.display());
    }
    Ok(scenario)
}

pub fn save_scenario(file: &ScenarioFile, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(file).expect("scenario serializes");
    fs::write(path, text + "\n").map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
}

struct Checker {
    errors: Vec<String>,
}

impl Checker {
    fn nonneg(&mut self, what: &str, x: f64) {
        if !(x.is_finite() && x >= 0.0) {
            self.errors.push(format!("{what} must be a finite non-negative number, got {x}"));
        }
    }

    fn positive(&mut self, what: &str, x: f64) {
        if !(x.is_finite() && x > 0.0) {
            self.errors.push(format!("{what} must be a finite positive number, got {x}"));
        }
    }
}

impl Scenario {
    pub fn from_file(file: ScenarioFile) -> Result<Self, ScenarioError> {
        let mut ck = Checker { errors: Vec::new() };
        let mut defaults = Vec::new();
        let f = &file;

        let c = &f.constants;
        let mut constant = |name: &str, v: Option<f64>, default: f64| -> f64 {
            v.unwrap_or_else(|| {
                defaults.push(format!("constants.{name} = {default}"));
                default
            })
        };
        let radius = constant("orbit_radius_km", c.orbit_radius_km, GEO_RADIUS_KM);
        let r_crit = constant("r_crit_km", c.r_crit_km, DEFAULT_R_CRIT_KM);
        let mu = constant("mu_km3_s2", c.mu_km3_s2, MU_EARTH_KM3_S2);
        let g0 = constant("g0_m_s2", c.g0_m_s2, G0_M_S2);
        let geometry = OrbitGeometry::new(radius, r_crit, mu, g0).map_err(|e| ScenarioError::Invalid(vec![format!("constants: {e}")]))?;

        let g = f.time_grid;
        let h = f.horizon;
        let planning = h.planning_days;
        let scheduling = h.scheduling_days.unwrap_or_else(|| {
            defaults.push(format!("horizon.scheduling_days = planning_days ({planning})"));
            planning
        });
        let control = h.control_days.unwrap_or_else(|| {
            defaults.push(format!("horizon.control_days = planning_days ({planning})"));
            planning
        });
        let grid = TimeGrid::new(g.dt_days, g.interval_days, g.flight_steps, planning)
            .map_err(|e| ScenarioError::Invalid(vec![format!("time_grid: {e}")]))?;
        let horizon = HorizonConfig { start_day: h.start_day, planning_days: planning, control_days: control, scheduling_days: scheduling };
        if let Err(e) = horizon.validate(&grid) {
            ck.errors.push(format!("horizon: {e}"));
        }

        // Prices.
        let cm = &f.commodities;
        ck.nonneg("commodities.bipropellant_usd_per_kg", cm.bipropellant_usd_per_kg);
        ck.nonneg("commodities.monopropellant_usd_per_kg", cm.monopropellant_usd_per_kg);
        ck.nonneg("commodities.spares_usd_per_kg", cm.spares_usd_per_kg);
        let spare_mass = cm.spare_unit_mass_kg.unwrap_or_else(|| {
            defaults.push(format!("commodities.spare_unit_mass_kg = {DEFAULT_SPARE_UNIT_MASS_KG}"));
            DEFAULT_SPARE_UNIT_MASS_KG
        });
        ck.positive("commodities.spare_unit_mass_kg", spare_mass);
        let prices = Prices {
            unit_cost_usd: CommodityVec([cm.bipropellant_usd_per_kg, cm.monopropellant_usd_per_kg, cm.spares_usd_per_kg * spare_mass]),
            spare_unit_mass_kg: spare_mass,
        };

        // Tools.
        let mut tools: BTreeMap<&str, &ToolSpec> = BTreeMap::new();
        for (i, t) in f.tools.iter().enumerate() {
            ck.nonneg(&format!("tools[{i}].mass_kg"), t.mass_kg);
            ck.nonneg(&format!("tools[{i}].cost_usd"), t.cost_usd);
            if tools.insert(&t.name, t).is_some() {
                ck.errors.push(format!("tools[{i}]: duplicate tool {}", t.name));
            }
        }

        // Services.
        let mut types = Vec::new();
        let mut kinds = BTreeSet::new();
        for (i, s) in f.service_types.iter().enumerate() {
            let at = format!("service_types[{i}]");
            if !kinds.insert(s.kind) {
                ck.errors.push(format!("{at}: duplicate service kind {}", s.kind));
            }
            ck.nonneg(&format!("{at}.revenue_usd_m"), s.revenue_usd_m);
            ck.nonneg(&format!("{at}.delay_penalty_usd_per_day"), s.delay_penalty_usd_per_day);
            ck.nonneg(&format!("{at}.propellant_delivery_kg"), s.propellant_delivery_kg);
            if s.duration_days == 0 {
                ck.errors.push(format!("{at}.duration_days must be positive"));
            }
            if let Some(d) = s.interoccurrence_days {
                ck.positive(&format!("{at}.interoccurrence_days"), d);
            }
            if !tools.contains_key(s.tool.as_str()) {
                ck.errors.push(format!("{at}.tool: unknown tool {}", s.tool));
            }
            let occurrence = match s.occurrence {
                OccurrenceSpec::Deterministic => Occurrence::Deterministic { interoccurrence_days: s.interoccurrence_days.unwrap_or(0.0) },
                OccurrenceSpec::Random => Occurrence::Random { mean_interoccurrence_days: s.interoccurrence_days },
            };
            types.push(ServiceType {
                kind: s.kind,
                occurrence,
                revenue_usd: s.revenue_usd_m * 1e6,
                delay_penalty_usd_per_day: s.delay_penalty_usd_per_day,
                duration_days: s.duration_days,
                window_days: s.window_days,
                tool: s.tool.clone(),
                propellant_delivery_kg: s.propellant_delivery_kg,
                spares_delivery_units: s.spares_delivery_units,
            });
        }
        let catalog = ServiceCatalog { types };

        // Nodes.
        let mut nodes = Vec::new();
        let mut satellites = Vec::new();
        for (i, s) in f.satellites.iter().enumerate() {
            let propellant = s.propellant.unwrap_or(Commodity::Bipropellant);
            if propellant == Commodity::Spares {
                ck.errors.push(format!("satellites[{i}].propellant must be a propellant"));
            }
            let wet = s.wet_mass_kg.unwrap_or(0.0);
            ck.nonneg(&format!("satellites[{i}].wet_mass_kg"), wet);
            satellites.push(Satellite { name: s.name.clone(), longitude_deg: s.longitude_deg, wet_mass_kg: wet, propellant });
            nodes.push(Node::customer(s.name.clone(), s.longitude_deg));
        }
        if f.satellites.iter().any(|s| s.propellant.is_none()) {
            defaults.push("satellites[*].propellant = bipropellant where omitted".into());
        }
        for p in &f.parking {
            nodes.push(Node::parking(p.name.clone(), p.longitude_deg));
        }
        nodes.push(Node::earth(f.earth_node.clone()));
        let network = match StaticNetwork::build(nodes, geometry, g.dt_days) {
            Ok(n) => Some(n),
            Err(e) => {
                ck.errors.push(format!("network: {e}"));
                None
            }
        };
        let node_exists = |name: &str| {
            f.satellites.iter().any(|s| s.name == name) || f.parking.iter().any(|p| p.name == name) || f.earth_node == name
        };

        // Fleet.
        let mut servicers = Vec::new();
        let mut vehicles = Vec::new();
        let mut names = BTreeSet::new();
        for (i, s) in f.servicers.iter().enumerate() {
            let at = format!("servicers[{i}]");
            if !names.insert(s.name.clone()) {
                ck.errors.push(format!("{at}: duplicate vehicle name {}", s.name));
            }
            let mut kit: BTreeMap<String, u32> = BTreeMap::new();
            let (mut tool_mass, mut tool_cost) = (0.0, 0.0);
            for t in &s.tools {
                match tools.get(t.as_str()) {
                    Some(spec) => {
                        *kit.entry(t.clone()).or_default() += 1;
                        tool_mass += spec.mass_kg;
                        tool_cost += spec.cost_usd;
                    }
                    None => ck.errors.push(format!("{at}.tools: unknown tool {t}")),
                }
            }
            ck.positive(&format!("{at}.dry_mass_kg"), s.dry_mass_kg);
            ck.nonneg(&format!("{at}.propellant_capacity_kg"), s.propellant_capacity_kg);
            ck.positive(&format!("{at}.isp_s"), s.isp_s);
            ck.nonneg(&format!("{at}.manufacturing_cost_usd_m"), s.manufacturing_cost_usd_m);
            ck.nonneg(&format!("{at}.operating_cost_usd_per_day"), s.operating_cost_usd_per_day);
            let payload = s.payload_capacity_kg.unwrap_or_else(|| {
                defaults.push(format!("{at}.payload_capacity_kg = {DEFAULT_PAYLOAD_KG}"));
                DEFAULT_PAYLOAD_KG
            });
            ck.nonneg(&format!("{at}.payload_capacity_kg"), payload);
            let propellant = s.propellant.unwrap_or(Commodity::Bipropellant);
            if propellant == Commodity::Spares {
                ck.errors.push(format!("{at}.propellant must be a propellant"));
            }
            let initial_prop = s.initial_propellant_kg.unwrap_or_else(|| {
                defaults.push(format!("{at}.initial_propellant_kg = full tank ({})", s.propellant_capacity_kg));
                s.propellant_capacity_kg
            });
            if !node_exists(&s.initial_node) {
                ck.errors.push(format!("{at}.initial_node: unknown node {}", s.initial_node));
            }
            servicers.push(ServicerDesign {
                name: s.name.clone(),
                tools: kit,
                dry_mass_kg: s.dry_mass_kg,
                tool_mass_kg: tool_mass,
                propellant,
                tank_kg: s.propellant_capacity_kg,
                payload_kg: payload,
                isp_s: s.isp_s,
                manufacturing_usd: s.manufacturing_cost_usd_m * 1e6,
                tool_cost_usd: tool_cost,
                operating_usd_per_day: s.operating_cost_usd_per_day,
            });
            vehicles.push(VehicleState {
                name: s.name.clone(),
                node: s.initial_node.clone(),
                propellant_kg: initial_prop,
                cargo: s.initial_cargo.to_vec(),
            });
        }
        let mut depots = Vec::new();
        for (i, d) in f.depots.iter().enumerate() {
            let at = format!("depots[{i}]");
            if !names.insert(d.name.clone()) {
                ck.errors.push(format!("{at}: duplicate vehicle name {}", d.name));
            }
            if !f.parking.iter().any(|p| p.name == d.parking) {
                ck.errors.push(format!("{at}.parking: unknown parking node {}", d.parking));
            }
            let dry = d.dry_mass_kg.unwrap_or_else(|| {
                defaults.push(format!("{at}.dry_mass_kg = {DEFAULT_DEPOT_DRY_MASS_KG}"));
                DEFAULT_DEPOT_DRY_MASS_KG
            });
            ck.nonneg(&format!("{at}.dry_mass_kg"), dry);
            ck.nonneg(&format!("{at}.stationkeeping_kg_per_day"), d.stationkeeping_kg_per_day);
            ck.nonneg(&format!("{at}.manufacturing_cost_usd_m"), d.manufacturing_cost_usd_m);
            ck.nonneg(&format!("{at}.operating_cost_usd_per_day"), d.operating_cost_usd_per_day);
            let sk = d.stationkeeping_propellant.unwrap_or(Commodity::Monopropellant);
            let node = d.initial_node.clone().unwrap_or_else(|| d.parking.clone());
            if node != d.parking && node != f.earth_node {
                ck.errors.push(format!("{at}.initial_node must be its parking node or the Earth node"));
            }
            let capacity = d.capacity.to_vec();
            let stock = d.initial_stock.to_vec();
            for c in Commodity::ALL {
                ck.nonneg(&format!("{at}.capacity.{c}"), capacity[c]);
                ck.nonneg(&format!("{at}.initial_stock.{c}"), stock[c]);
                if stock[c] > capacity[c] {
                    ck.errors.push(format!("{at}.initial_stock.{c} exceeds capacity"));
                }
            }
            depots.push(DepotDesign {
                name: d.name.clone(),
                parking: d.parking.clone(),
                dry_mass_kg: dry,
                capacity,
                manufacturing_usd: d.manufacturing_cost_usd_m * 1e6,
                operating_usd_per_day: d.operating_cost_usd_per_day,
                stationkeeping_kg_per_day: d.stationkeeping_kg_per_day,
                stationkeeping_propellant: sk,
            });
            vehicles.push(VehicleState { name: d.name.clone(), node, propellant_kg: 0.0, cargo: stock });
        }
        let launch = f.launch.map(|l| {
            if l.period_days == 0 {
                ck.errors.push("launch.period_days must be positive".into());
            }
            ck.nonneg("launch.capacity_kg", l.capacity_kg);
            ck.nonneg("launch.cost_usd_per_kg", l.cost_usd_per_kg);
            LaunchDesign { period_days: l.period_days, capacity_kg: l.capacity_kg, cost_usd_per_kg: l.cost_usd_per_kg }
        });
        let fleet = Fleet { servicers, depots, launch, prices };

        // Services under way at the start date.
        let mut in_progress = Vec::new();
        for (i, s) in f.initial_services.iter().enumerate() {
            let at = format!("initial_services[{i}]");
            let Some(servicer) = fleet.servicer(&s.servicer) else {
                ck.errors.push(format!("{at}.servicer: unknown servicer {}", s.servicer));
                continue;
            };
            let Some(ty) = catalog.get(s.kind) else {
                ck.errors.push(format!("{at}.kind: service type {} not in service_types", s.kind));
                continue;
            };
            if servicer.tool_count(&ty.tool) == 0 {
                ck.errors.push(format!("{at}: servicer {} lacks tool {}", s.servicer, ty.tool));
            }
            let start_node = &f.servicers.iter().find(|x| x.name == s.servicer).expect("servicer spec").initial_node;
            if start_node != &s.satellite {
                ck.errors.push(format!("{at}: servicer {} starts at {start_node}, not at {}", s.servicer, s.satellite));
            }
            if s.started_day > h.start_day {
                ck.errors.push(format!("{at}.started_day is after the start date"));
            }
            let t = g.interval_days.max(1) as i64;
            let end = occupancy_end(s.started_day, ty.duration_days, &grid);
            if end <= h.start_day {
                ck.errors.push(format!("{at}: service already finished by the start date"));
            }
            in_progress.push(InProgressService {
                need: ServiceNeed {
                    id: NeedId(i as u32),
                    satellite: s.satellite.clone(),
                    kind: s.kind,
                    occurrence_day: s.started_day.div_euclid(t) * t,
                    random: false,
                },
                servicer: s.servicer.clone(),
                start_day: s.started_day,
                end_day: end,
            });
        }
        let mut occupied = BTreeSet::new();
        for p in &in_progress {
            if !occupied.insert(p.servicer.clone()) {
                ck.errors.push(format!("servicer {} has two services under way", p.servicer));
            }
        }

        // Demand settings.
        if let PhaseSpec::Explicit(list) = &f.demand.phase_offsets {
            for o in list {
                if !f.satellites.iter().any(|s| s.name == o.satellite) {
                    ck.errors.push(format!("demand.phase_offsets: unknown satellite {}", o.satellite));
                }
            }
        }
        for n in f.demand.explicit_needs.iter().flatten() {
            if !f.satellites.iter().any(|s| s.name == n.satellite) {
                ck.errors.push(format!("demand.explicit_needs: unknown satellite {}", n.satellite));
            }
            if catalog.get(n.kind).is_none() {
                ck.errors.push(format!("demand.explicit_needs: service type {} not in service_types", n.kind));
            }
            if !grid.is_interval_boundary(n.day) {
                ck.errors.push(format!("demand.explicit_needs: day {} is not an interval boundary", n.day));
            }
        }

        let initial_state = InfrastructureState { day: h.start_day, vehicles, loose: BTreeMap::new(), in_progress };
        if let Err(e) = initial_state.validate(&fleet) {
            ck.errors.push(format!("initial state: {e}"));
        }
        if !ck.errors.is_empty() {
            return Err(ScenarioError::Invalid(ck.errors));
        }
        let problem = Problem { fleet, catalog, satellites, network: network.expect("network built"), grid };
        Ok(Self { file, problem, initial_state, horizon, defaults_applied: defaults })
    }

    /// Seeds from the file, or `[0]` when none are listed.
    pub fn seeds(&self) -> Vec<u64> {
        if self.file.demand.seeds.is_empty() {
            vec![0]
        } else {
            self.file.demand.seeds.clone()
        }
    }

    /// The full demand realization over the scheduling horizon for `seed`, numbered
    /// after the services already under way.
    pub fn needs(&self, seed: u64) -> Vec<ServiceNeed> {
        let d = &self.file.demand;
        let h = &self.horizon;
        let interval = self.problem.grid.interval_days;
        let mut needs = Vec::new();
        if let Some(list) = &d.explicit_needs {
            for n in list {
                needs.push(ServiceNeed { id: NeedId(0), satellite: n.satellite.clone(), kind: n.kind, occurrence_day: n.day, random: n.random });
            }
        } else {
            if d.deterministic {
                let offsets = match &d.phase_offsets {
                    PhaseSpec::Zero => PhaseOffsets::Zero,
                    PhaseSpec::Seeded => PhaseOffsets::Seeded(seed),
                    PhaseSpec::Explicit(list) => PhaseOffsets::Explicit(
                        list.iter().map(|o| ((o.satellite.clone(), o.kind), o.offset_days)).collect::<HashMap<_, _>>(),
                    ),
                };
                needs.extend(generate_deterministic(
                    &self.problem.satellites,
                    &self.problem.catalog,
                    h.scheduling_days,
                    h.start_day,
                    interval,
                    &offsets,
                ));
            }
            if d.random {
                needs.extend(generate_random(
                    &self.problem.satellites,
                    &self.problem.catalog,
                    h.scheduling_days,
                    h.start_day,
                    interval,
                    seed,
                ));
            }
        }
        let offset = self.initial_state.in_progress.len() as u32;
        let mut needs = number_needs(needs);
        for n in &mut needs {
            n.id = NeedId(n.id.0 + offset);
        }
        needs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn minimal() -> &'static str {
        r#"{
          "name": "mini",
          "time_grid": {"dt_days": 2, "interval_days": 10, "flight_steps": 2},
          "horizon": {"planning_days": 100},
          "commodities": {"bipropellant_usd_per_kg": 180, "monopropellant_usd_per_kg": 230, "spares_usd_per_kg": 1000},
          "tools": [{"name": "T1", "mass_kg": 100, "cost_usd": 100000}],
          "service_types": [{"kind": "refueling", "occurrence": "deterministic", "revenue_usd_m": 15,
             "delay_penalty_usd_per_day": 100000, "duration_days": 30, "window_days": 30,
             "interoccurrence_days": 2100, "tool": "T1", "propellant_delivery_kg": 200}],
          "satellites": [{"name": "A", "longitude_deg": -100, "propellant": "monopropellant"}],
          "parking": [{"name": "Depot", "longitude_deg": -170}],
          "servicers": [{"name": "S1", "tools": ["T1"], "dry_mass_kg": 2000, "propellant_capacity_kg": 1000,
             "isp_s": 316, "manufacturing_cost_usd_m": 50, "operating_cost_usd_per_day": 13000, "initial_node": "Depot"}]
        }"#
    }

    #[test]
    fn minimal_loads_with_defaults() {
        let s = Scenario::from_file(parse_scenario(minimal()).unwrap()).unwrap();
        assert_eq!(s.problem.fleet.servicers[0].payload_kg, DEFAULT_PAYLOAD_KG);
        assert_eq!(s.problem.fleet.servicers[0].structure_mass_kg(), 2100.0);
        assert_eq!(s.problem.fleet.servicers[0].pdm_usd(), 50_100_000.0);
        assert_eq!(s.horizon.scheduling_days, 100);
        assert_eq!(s.initial_state.vehicle("S1").unwrap().propellant_kg, 1000.0);
        assert!(s.defaults_applied.iter().any(|d| d.contains("payload_capacity_kg")));
        assert_eq!(s.problem.catalog.types[0].revenue_usd, 15e6);
    }

    #[test]
    fn missing_field_is_named() {
        let text = minimal().replace(r#""isp_s": 316, "#, "");
        let err = parse_scenario(&text).unwrap_err().to_string();
        assert!(err.contains("servicers[0]") && err.contains("isp_s"), "{err}");
    }

    #[test]
    fn dangling_references_are_reported() {
        let text = minimal().replace(r#""tools": ["T1"]"#, r#""tools": ["T9"]"#).replace(r#""initial_node": "Depot""#, r#""initial_node": "Nowhere""#);
        let err = Scenario::from_file(parse_scenario(&text).unwrap()).unwrap_err().to_string();
        assert!(err.contains("unknown tool T9"), "{err}");
        assert!(err.contains("unknown node Nowhere"), "{err}");
    }

    #[test]
    fn negative_mass_is_a_unit_error() {
        let text = minimal().replace(r#""dry_mass_kg": 2000"#, r#""dry_mass_kg": -5"#);
        let err = Scenario::from_file(parse_scenario(&text).unwrap()).unwrap_err().to_string();
        assert!(err.contains("servicers[0].dry_mass_kg"), "{err}");
    }
}
