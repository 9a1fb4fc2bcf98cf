//! Customer satellites, service types and the service needs they generate.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::commodity::{Commodity, CommodityVec};
use crate::network::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ServiceKind {
    Inspection,
    Refueling,
    StationKeeping,
    Repositioning,
    Retirement,
    Repair,
    MechanismDeployment,
}

impl ServiceKind {
    pub const ALL: [ServiceKind; 7] = [
        ServiceKind::Inspection,
        ServiceKind::Refueling,
        ServiceKind::StationKeeping,
        ServiceKind::Repositioning,
        ServiceKind::Retirement,
        ServiceKind::Repair,
        ServiceKind::MechanismDeployment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ServiceKind::Inspection => "inspection",
            ServiceKind::Refueling => "refueling",
            ServiceKind::StationKeeping => "station_keeping",
            ServiceKind::Repositioning => "repositioning",
            ServiceKind::Retirement => "retirement",
            ServiceKind::Repair => "repair",
            ServiceKind::MechanismDeployment => "mechanism_deployment",
        }
    }
}

impl fmt::Display for ServiceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Occurrence {
    Deterministic { interoccurrence_days: f64 },
    /// `None` means the need never occurs.
    Random { mean_interoccurrence_days: Option<f64> },
}

impl Occurrence {
    pub fn is_random(&self) -> bool {
        matches!(self, Occurrence::Random { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceType {
    pub kind: ServiceKind,
    pub occurrence: Occurrence,
    pub revenue_usd: f64,
    pub delay_penalty_usd_per_day: f64,
    pub duration_days: u32,
    pub window_days: u32,
    /// The single tool kind able to provide this service.
    pub tool: String,
    /// Propellant handed to the customer (its own propellant type), kg.
    pub propellant_delivery_kg: f64,
    pub spares_delivery_units: u32,
}

impl ServiceType {
    /// Commodities consumed at the customer when this service starts.
    pub fn delivery_for(&self, satellite: &Satellite) -> CommodityVec {
        let mut d = CommodityVec::ZERO;
        d[satellite.propellant] += self.propellant_delivery_kg;
        d[Commodity::Spares] += self.spares_delivery_units as f64;
        d
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ServiceCatalog {
    pub types: Vec<ServiceType>,
}

impl ServiceCatalog {
    pub fn get(&self, kind: ServiceKind) -> Option<&ServiceType> {
        self.types.iter().find(|t| t.kind == kind)
    }

    pub fn expect(&self, kind: ServiceKind) -> &ServiceType {
        self.get(kind).unwrap_or_else(|| panic!("service type {kind} missing from catalog"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Satellite {
    pub name: String,
    pub longitude_deg: f64,
    pub wet_mass_kg: f64,
    pub propellant: Commodity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NeedId(pub u32);

impl fmt::Display for NeedId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s{}", self.0)
    }
}

/// One demanded service at a customer satellite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceNeed {
    pub id: NeedId,
    pub satellite: String,
    pub kind: ServiceKind,
    /// Occurrence date tau_s, always an interval boundary.
    pub occurrence_day: i64,
    pub random: bool,
}

/// Rounds `day` half-up to the nearest multiple of `interval_days`.
pub fn snap_to_interval(day: f64, interval_days: u32) -> i64 {
    let t = interval_days as f64;
    ((day / t) + 0.5).floor() as i64 * interval_days as i64
}

/// Admissible service start dates: `{kT + n*dt : tau_s <= kT <= tau_s + window}`.
pub fn build_window(occurrence_day: i64, window_days: u32, grid: &TimeGrid) -> Vec<i64> {
    let t = grid.interval_days as i64;
    debug_assert!(grid.is_interval_boundary(occurrence_day));
    let first = occurrence_day.div_euclid(t);
    let last = (occurrence_day + window_days as i64).div_euclid(t);
    (first..=last).map(|k| k * t + grid.flight_span_days()).collect()
}

/// Exclusive end of the occupancy started at `start`: the interval boundary
/// `floor(start/T)*T + ceil(duration/T)*T`.
pub fn occupancy_end(start: i64, duration_days: u32, grid: &TimeGrid) -> i64 {
    let t = grid.interval_days as i64;
    let intervals = (duration_days as i64 + t - 1) / t;
    start.div_euclid(t) * t + intervals * t
}

/// Time nodes among `times` at which a servicer starting at `start` is busy.
pub fn build_occupancy(start: i64, duration_days: u32, grid: &TimeGrid, times: &[i64]) -> Vec<i64> {
    let end = occupancy_end(start, duration_days, grid);
    times.iter().copied().filter(|&t| t >= start && t < end).collect()
}

/// Occupancy rows for every admissible start of one need.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTable {
    pub rows: Vec<(i64, Vec<i64>)>,
}

impl OccupancyTable {
    pub fn build(occurrence_day: i64, service: &ServiceType, grid: &TimeGrid, times: &[i64]) -> Self {
        let rows = build_window(occurrence_day, service.window_days, grid)
            .into_iter()
            .map(|tau| (tau, build_occupancy(tau, service.duration_days, grid, times)))
            .collect();
        Self { rows }
    }

    pub fn is_busy(&self, tau: i64, t: i64) -> bool {
        self.rows.iter().any(|(s, ts)| *s == tau && ts.contains(&t))
    }
}

/// How deterministic needs are phased per (satellite, service).
#[derive(Debug, Clone, PartialEq)]
pub enum PhaseOffsets {
    /// Everyone in lockstep at t0.
    Zero,
    /// Uniform draw in `[0, interoccurrence)` per pair.
    Seeded(u64),
    Explicit(HashMap<(String, ServiceKind), f64>),
}

const STREAMS_PER_SATELLITE: u64 = 16;
const PHASE_STREAM_BASE: u64 = 1 << 40;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pair_stream(sat_idx: usize, kind: ServiceKind) -> u64 {
    sat_idx as u64 * STREAMS_PER_SATELLITE + kind as u64
}

fn placeholder_need(sat: &Satellite, kind: ServiceKind, day: i64, random: bool) -> ServiceNeed {
    ServiceNeed { id: NeedId(0), satellite: sat.name.clone(), kind, occurrence_day: day, random }
}

/// Regularly spaced needs for every deterministic service type.
///
/// Dates `t0 + offset + m * interoccurrence` are kept while the raw date is within the
/// horizon, then snapped half-up to interval boundaries; dates snapping onto the
/// horizon end are dropped. Ids are placeholders until [`number_needs`].
pub fn generate_deterministic(
    satellites: &[Satellite],
    catalog: &ServiceCatalog,
    horizon_days: u32,
    t0: i64,
    interval_days: u32,
    offsets: &PhaseOffsets,
) -> Vec<ServiceNeed> {
    let end = t0 + horizon_days as i64;
    let mut needs = Vec::new();
    for (si, sat) in satellites.iter().enumerate() {
        for ty in &catalog.types {
            let Occurrence::Deterministic { interoccurrence_days } = ty.occurrence else { continue };
            if !(interoccurrence_days > 0.0) {
                continue;
            }
            let offset = match offsets {
                PhaseOffsets::Zero => 0.0,
                PhaseOffsets::Seeded(seed) => {
                    let mut rng = stream_rng(*seed, PHASE_STREAM_BASE + pair_stream(si, ty.kind));
                    rng.random_range(0.0..interoccurrence_days)
                }
                PhaseOffsets::Explicit(map) => map.get(&(sat.name.clone(), ty.kind)).copied().unwrap_or(0.0),
            };
            let mut m = 0u32;
            loop {
                let raw = t0 as f64 + offset + m as f64 * interoccurrence_days;
                if raw > end as f64 {
                    break;
                }
                let day = snap_to_interval(raw, interval_days);
                if day >= t0 && day < end {
                    needs.push(placeholder_need(sat, ty.kind, day, false));
                }
                m += 1;
            }
        }
    }
    needs
}

/// Seeded exponential inter-arrival source for one (satellite, service) pair.
pub struct PoissonStream {
    rng: ChaCha8Rng,
    exp: Option<Exp<f64>>,
}

impl PoissonStream {
    pub fn new(seed: u64, stream: u64, mean_interoccurrence_days: Option<f64>) -> Self {
        let exp = mean_interoccurrence_days
            .filter(|m| m.is_finite() && *m > 0.0)
            .map(|m| Exp::new(1.0 / m).expect("positive rate"));
        Self { rng: stream_rng(seed, stream), exp }
    }

    /// Next gap in days, `None` when the process never fires.
    pub fn next_gap(&mut self) -> Option<f64> {
        self.exp.as_ref().map(|e| e.sample(&mut self.rng))
    }
}

/// Poisson-arrival needs for every random service type, reproducible from `seed`.
/// Each (satellite, type) pair draws from its own stream.
pub fn generate_random(
    satellites: &[Satellite],
    catalog: &ServiceCatalog,
    horizon_days: u32,
    t0: i64,
    interval_days: u32,
    seed: u64,
) -> Vec<ServiceNeed> {
    let end = t0 + horizon_days as i64;
    let mut needs = Vec::new();
    for (si, sat) in satellites.iter().enumerate() {
        for ty in &catalog.types {
            let Occurrence::Random { mean_interoccurrence_days } = ty.occurrence else { continue };
            let mut stream = PoissonStream::new(seed, pair_stream(si, ty.kind), mean_interoccurrence_days);
            let mut t = t0 as f64;
            while let Some(gap) = stream.next_gap() {
                t += gap;
                if t > end as f64 {
                    break;
                }
                let day = snap_to_interval(t, interval_days);
                if day >= t0 && day < end {
                    needs.push(placeholder_need(sat, ty.kind, day, true));
                }
            }
        }
    }
    needs
}

/// Sorts by (date, satellite, kind) and assigns sequential ids.
pub fn number_needs(mut needs: Vec<ServiceNeed>) -> Vec<ServiceNeed> {
    needs.sort_by(|a, b| {
        (a.occurrence_day, &a.satellite, a.kind, a.random).cmp(&(b.occurrence_day, &b.satellite, b.kind, b.random))
    });
    for (i, n) in needs.iter_mut().enumerate() {
        n.id = NeedId(i as u32);
    }
    needs
}
