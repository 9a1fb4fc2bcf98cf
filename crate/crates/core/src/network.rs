//! Static servicing network and its replication over the time grid.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::astro::{lead_angle, solve_phasing, AstroError, OrbitGeometry, PhasingSolution};

pub const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("duplicate node id `{0}`")]
    DuplicateNode(String),
    #[error("node `{0}`: {1}")]
    InvalidNode(String, String),
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("network needs at least one {0} node")]
    MissingNodeKind(&'static str),
    #[error(transparent)]
    Astro(#[from] AstroError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeKind {
    Customer,
    Parking,
    Earth,
}

impl NodeKind {
    pub fn is_orbital(self) -> bool {
        !matches!(self, NodeKind::Earth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Unique label, e.g. the satellite name.
    pub id: String,
    pub kind: NodeKind,
    /// Degrees East in [-180, 180); `None` for Earth nodes.
    pub longitude_deg: Option<f64>,
}

impl Node {
    pub fn customer(id: impl Into<String>, longitude_deg: f64) -> Self {
        Self { id: id.into(), kind: NodeKind::Customer, longitude_deg: Some(longitude_deg) }
    }

    pub fn parking(id: impl Into<String>, longitude_deg: f64) -> Self {
        Self { id: id.into(), kind: NodeKind::Parking, longitude_deg: Some(longitude_deg) }
    }

    pub fn earth(id: impl Into<String>) -> Self {
        Self { id: id.into(), kind: NodeKind::Earth, longitude_deg: None }
    }

    fn validate(&self) -> Result<(), NetworkError> {
        match (self.kind, self.longitude_deg) {
            (NodeKind::Earth, None) => Ok(()),
            (NodeKind::Earth, Some(_)) => {
                Err(NetworkError::InvalidNode(self.id.clone(), "Earth nodes carry no longitude".into()))
            }
            (_, None) => Err(NetworkError::InvalidNode(self.id.clone(), "orbital node needs a longitude".into())),
            (_, Some(lon)) if !(-180.0..180.0).contains(&lon) => Err(NetworkError::InvalidNode(
                self.id.clone(),
                format!("longitude {lon} outside [-180, 180)"),
            )),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ArcKind {
    Transport,
    Holdover,
    Launch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticArc {
    pub origin: NodeId,
    pub destination: NodeId,
    pub kind: ArcKind,
    /// Zero for holdover and launch arcs.
    pub delta_v_km_s: f64,
    pub phasing: Option<PhasingSolution>,
}

/// A transfer that was dropped because no phasing maneuver fits the flight step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmittedArc {
    pub origin: String,
    pub destination: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaticNetwork {
    nodes: Vec<Node>,
    arcs: Vec<StaticArc>,
    pub geometry: OrbitGeometry,
    pub flight_time_limit_s: f64,
    pub omitted: Vec<OmittedArc>,
}

impl StaticNetwork {
    /// Builds the full static network: launch arcs Earth -> parking, phasing transfers
    /// between every ordered pair of orbital nodes, and a holdover at each orbital node.
    ///
    /// Transfers are sized with a time-of-flight limit of one spaceflight step.
    pub fn build(nodes: Vec<Node>, geometry: OrbitGeometry, flight_step_days: u32) -> Result<Self, NetworkError> {
        geometry.validate()?;
        let mut seen = BTreeSet::new();
        for node in &nodes {
            node.validate()?;
            if !seen.insert(node.id.clone()) {
                return Err(NetworkError::DuplicateNode(node.id.clone()));
            }
        }
        if !nodes.iter().any(|n| n.kind == NodeKind::Earth) {
            return Err(NetworkError::MissingNodeKind("Earth"));
        }
        if !nodes.iter().any(|n| n.kind == NodeKind::Parking) {
            return Err(NetworkError::MissingNodeKind("parking"));
        }
        let tof_max = flight_step_days as f64 * SECONDS_PER_DAY;
        let mut net = Self { nodes, arcs: Vec::new(), geometry, flight_time_limit_s: tof_max, omitted: Vec::new() };
        net.rebuild_arcs()?;
        Ok(net)
    }

    fn rebuild_arcs(&mut self) -> Result<(), NetworkError> {
        let mut arcs = Vec::new();
        let mut omitted = Vec::new();
        let n = self.nodes.len();
        for i in 0..n {
            let from = &self.nodes[i];
            match from.kind {
                NodeKind::Earth => {
                    for (j, to) in self.nodes.iter().enumerate() {
                        if to.kind == NodeKind::Parking {
                            arcs.push(StaticArc {
                                origin: NodeId(i),
                                destination: NodeId(j),
                                kind: ArcKind::Launch,
                                delta_v_km_s: 0.0,
                                phasing: None,
                            });
                        }
                    }
                }
                _ => {
                    arcs.push(StaticArc {
                        origin: NodeId(i),
                        destination: NodeId(i),
                        kind: ArcKind::Holdover,
                        delta_v_km_s: 0.0,
                        phasing: None,
                    });
                    for (j, to) in self.nodes.iter().enumerate() {
                        if j == i || !to.kind.is_orbital() {
                            continue;
                        }
                        let alpha = lead_angle(from.longitude_deg.unwrap(), to.longitude_deg.unwrap());
                        match solve_phasing(alpha, &self.geometry, self.flight_time_limit_s) {
                            Ok(sol) => arcs.push(StaticArc {
                                origin: NodeId(i),
                                destination: NodeId(j),
                                kind: ArcKind::Transport,
                                delta_v_km_s: sol.delta_v_km_s,
                                phasing: Some(sol),
                            }),
                            Err(AstroError::NoFeasibleTransfer { .. }) => {
                                log::warn!("no phasing transfer {} -> {}; arc omitted", from.id, to.id);
                                omitted.push(OmittedArc {
                                    origin: from.id.clone(),
                                    destination: to.id.clone(),
                                    reason: "no feasible phasing maneuver within one flight step".into(),
                                });
                            }
                            Err(e) => return Err(e.into()),
                        }
                    }
                }
            }
        }
        self.arcs = arcs;
        self.omitted = omitted;
        Ok(())
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn arcs(&self) -> &[StaticArc] {
        &self.arcs
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn find(&self, label: &str) -> Option<NodeId> {
        self.nodes.iter().position(|n| n.id == label).map(NodeId)
    }

    pub fn nodes_of(&self, kind: NodeKind) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().enumerate().filter(move |(_, n)| n.kind == kind).map(|(i, _)| NodeId(i))
    }

    /// Drops customer nodes that neither host a need in `customers_with_needs` nor
    /// currently hold a vehicle (`occupied`). Arcs among the retained nodes are kept as is.
    pub fn prune_to_demand<'a>(
        &self,
        customers_with_needs: impl IntoIterator<Item = &'a str>,
        occupied: impl IntoIterator<Item = &'a str>,
    ) -> StaticNetwork {
        let keep: BTreeSet<&str> = customers_with_needs.into_iter().chain(occupied).collect();
        let mut remap = vec![None; self.nodes.len()];
        let mut nodes = Vec::new();
        for (i, n) in self.nodes.iter().enumerate() {
            if n.kind != NodeKind::Customer || keep.contains(n.id.as_str()) {
                remap[i] = Some(NodeId(nodes.len()));
                nodes.push(n.clone());
            }
        }
        let arcs = self
            .arcs
            .iter()
            .filter_map(|a| {
                let o = remap[a.origin.0]?;
                let d = remap[a.destination.0]?;
                Some(StaticArc { origin: o, destination: d, ..a.clone() })
            })
            .collect();
        let kept: BTreeSet<&str> = nodes.iter().map(|n: &Node| n.id.as_str()).collect();
        let omitted = self
            .omitted
            .iter()
            .filter(|o| kept.contains(o.origin.as_str()) && kept.contains(o.destination.as_str()))
            .cloned()
            .collect();
        StaticNetwork {
            nodes,
            arcs,
            geometry: self.geometry,
            flight_time_limit_s: self.flight_time_limit_s,
            omitted,
        }
    }
}

/// Time discretization: `n` spaceflight steps of `dt` days open every service interval `T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub dt_days: u32,
    pub interval_days: u32,
    pub flight_steps: u32,
    pub horizon_days: u32,
}

impl TimeGrid {
    pub fn new(dt_days: u32, interval_days: u32, flight_steps: u32, horizon_days: u32) -> Result<Self, NetworkError> {
        let grid = Self { dt_days, interval_days, flight_steps, horizon_days };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: String| Err(NetworkError::InvalidGrid(m));
        if self.dt_days == 0 || self.interval_days == 0 {
            return bad("dt and T must be positive".into());
        }
        if self.flight_steps == 0 {
            return bad("n = 0 leaves no spaceflight step".into());
        }
        if self.interval_days % self.dt_days != 0 {
            return bad(format!("T = {} is not a multiple of dt = {}", self.interval_days, self.dt_days));
        }
        if self.flight_steps * self.dt_days >= self.interval_days {
            return bad(format!(
                "n*dt = {} must be shorter than T = {}",
                self.flight_steps * self.dt_days,
                self.interval_days
            ));
        }
        if self.horizon_days % self.interval_days != 0 {
            return bad(format!("horizon {} is not a multiple of T = {}", self.horizon_days, self.interval_days));
        }
        Ok(())
    }

    pub fn with_horizon(&self, horizon_days: u32) -> Result<Self, NetworkError> {
        Self::new(self.dt_days, self.interval_days, self.flight_steps, horizon_days)
    }

    pub fn intervals(&self) -> u32 {
        self.horizon_days / self.interval_days
    }

    /// Offset of the last spaceflight node within an interval (n * dt).
    pub fn flight_span_days(&self) -> i64 {
        (self.flight_steps * self.dt_days) as i64
    }

    pub fn is_interval_boundary(&self, day: i64) -> bool {
        day.rem_euclid(self.interval_days as i64) == 0
    }

    /// Time nodes `{kT, kT+dt, ..., kT+n*dt}` for each interval, then the horizon end.
    pub fn time_nodes(&self, t0: i64) -> Vec<i64> {
        let t = self.interval_days as i64;
        let mut nodes = Vec::with_capacity((self.intervals() * (self.flight_steps + 1) + 1) as usize);
        for k in 0..self.intervals() as i64 {
            for j in 0..=self.flight_steps as i64 {
                nodes.push(t0 + k * t + j * self.dt_days as i64);
            }
        }
        nodes.push(t0 + self.horizon_days as i64);
        nodes
    }
}

/// One arc of the static network instantiated between two time nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DynArc {
    pub static_arc: usize,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicNetwork {
    pub statics: StaticNetwork,
    pub grid: TimeGrid,
    pub t0: i64,
    times: Vec<i64>,
    arcs: Vec<DynArc>,
    out_index: HashMap<(NodeId, usize), Vec<usize>>,
    in_index: HashMap<(NodeId, usize), Vec<usize>>,
}

impl DynamicNetwork {
    /// Replicates `statics` over the grid starting at `t0` (an interval boundary).
    ///
    /// Transfers are instantiated on spaceflight steps only, holdovers between every
    /// pair of consecutive time nodes, and launches at the first interval boundary on
    /// or after each multiple of `launch_period_days` (absolute calendar).
    pub fn expand(
        statics: StaticNetwork,
        grid: TimeGrid,
        t0: i64,
        launch_period_days: Option<u32>,
    ) -> Result<Self, NetworkError> {
        grid.validate()?;
        if !grid.is_interval_boundary(t0) {
            return Err(NetworkError::InvalidGrid(format!("start date {t0} is not an interval boundary")));
        }
        let times = grid.time_nodes(t0);
        let interval = grid.interval_days as i64;
        let steps_per_interval = grid.flight_steps as usize + 1;
        let last = times.len() - 1;
        let mut arcs = Vec::new();
        for (a_idx, arc) in statics.arcs().iter().enumerate() {
            match arc.kind {
                ArcKind::Holdover => {
                    for s in 0..last {
                        arcs.push(DynArc { static_arc: a_idx, start: s, end: s + 1 });
                    }
                }
                ArcKind::Transport => {
                    for s in 0..last {
                        let within = s % steps_per_interval;
                        if within < grid.flight_steps as usize {
                            arcs.push(DynArc { static_arc: a_idx, start: s, end: s + 1 });
                        }
                    }
                }
                ArcKind::Launch => {
                    let Some(period) = launch_period_days else { continue };
                    for s in (0..last).step_by(steps_per_interval) {
                        if is_launch_boundary(times[s], interval, period as i64) {
                            arcs.push(DynArc { static_arc: a_idx, start: s, end: s + 1 });
                        }
                    }
                }
            }
        }
        let mut out_index: HashMap<(NodeId, usize), Vec<usize>> = HashMap::new();
        let mut in_index: HashMap<(NodeId, usize), Vec<usize>> = HashMap::new();
        for (i, a) in arcs.iter().enumerate() {
            let sa = &statics.arcs()[a.static_arc];
            out_index.entry((sa.origin, a.start)).or_default().push(i);
            in_index.entry((sa.destination, a.end)).or_default().push(i);
        }
        Ok(Self { statics, grid, t0, times, arcs, out_index, in_index })
    }

    pub fn times(&self) -> &[i64] {
        &self.times
    }

    pub fn time(&self, idx: usize) -> i64 {
        self.times[idx]
    }

    pub fn time_index(&self, day: i64) -> Option<usize> {
        self.times.binary_search(&day).ok()
    }

    pub fn last_time(&self) -> usize {
        self.times.len() - 1
    }

    pub fn end_day(&self) -> i64 {
        *self.times.last().unwrap()
    }

    pub fn arcs(&self) -> &[DynArc] {
        &self.arcs
    }

    pub fn static_arc(&self, arc: &DynArc) -> &StaticArc {
        &self.statics.arcs()[arc.static_arc]
    }

    pub fn origin(&self, arc: &DynArc) -> NodeId {
        self.static_arc(arc).origin
    }

    pub fn destination(&self, arc: &DynArc) -> NodeId {
        self.static_arc(arc).destination
    }

    pub fn kind(&self, arc: &DynArc) -> ArcKind {
        self.static_arc(arc).kind
    }

    /// Arc length in days.
    pub fn duration(&self, arc: &DynArc) -> i64 {
        self.times[arc.end] - self.times[arc.start]
    }

    pub fn arcs_out(&self, node: NodeId, time: usize) -> &[usize] {
        self.out_index.get(&(node, time)).map_or(&[], |v| v.as_slice())
    }

    pub fn arcs_in(&self, node: NodeId, time: usize) -> &[usize] {
        self.in_index.get(&(node, time)).map_or(&[], |v| v.as_slice())
    }

    pub fn holdover(&self, node: NodeId, time: usize) -> Option<usize> {
        self.arcs_out(node, time)
            .iter()
            .copied()
            .find(|&a| self.kind(&self.arcs[a]) == ArcKind::Holdover)
    }

    /// True when `[times[idx], times[idx+1])` is a spaceflight step.
    pub fn is_flight_step(&self, idx: usize) -> bool {
        idx < self.last_time() && idx % (self.grid.flight_steps as usize + 1) < self.grid.flight_steps as usize
    }

    /// Plain-text edge list for inspection.
    pub fn edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# nodes (tab-separated): id kind longitude_deg");
        for n in self.statics.nodes() {
            let lon = n.longitude_deg.map_or("-".to_string(), |l| format!("{l}"));
            let _ = writeln!(out, "node\t{}\t{:?}\t{}", n.id, n.kind, lon);
        }
        let _ = writeln!(out, "# arcs (tab-separated): kind origin destination start_day end_day delta_v_km_s");
        for a in &self.arcs {
            let sa = self.static_arc(a);
            let _ = writeln!(
                out,
                "arc\t{:?}\t{}\t{}\t{}\t{}\t{:.6}",
                sa.kind,
                self.statics.node(sa.origin).id,
                self.statics.node(sa.destination).id,
                self.times[a.start],
                self.times[a.end],
                sa.delta_v_km_s
            );
        }
        out
    }
}

fn is_launch_boundary(day: i64, interval: i64, period: i64) -> bool {
    if period <= 0 {
        return false;
    }
    // first boundary at or after some multiple of the period: (day - interval, day] holds a multiple
    let m = day.div_euclid(period) * period;
    m > day - interval
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geo() -> OrbitGeometry {
        OrbitGeometry::default()
    }

    #[test]
    fn time_nodes_per_interval() {
        let grid = TimeGrid::new(1, 10, 2, 20).unwrap();
        assert_eq!(grid.time_nodes(0), vec![0, 1, 2, 10, 11, 12, 20]);
    }

    #[test]
    fn grid_invariants() {
        assert!(TimeGrid::new(1, 10, 0, 20).is_err());
        assert!(TimeGrid::new(2, 10, 5, 20).is_err());
        assert!(TimeGrid::new(3, 10, 2, 20).is_err());
        assert!(TimeGrid::new(2, 10, 2, 25).is_err());
        assert!(TimeGrid::new(2, 10, 2, 100).is_ok());
    }

    #[test]
    fn minimal_network() {
        let net = StaticNetwork::build(vec![Node::earth("KSC"), Node::parking("P", -170.0)], geo(), 2).unwrap();
        let kinds: Vec<ArcKind> = net.arcs().iter().map(|a| a.kind).collect();
        assert_eq!(kinds.len(), 2);
        assert!(kinds.contains(&ArcKind::Launch));
        assert!(kinds.contains(&ArcKind::Holdover));
    }

    #[test]
    fn duplicate_and_malformed_nodes_rejected() {
        let dup = StaticNetwork::build(
            vec![Node::earth("E"), Node::parking("P", 0.0), Node::customer("P", 10.0)],
            geo(),
            2,
        );
        assert_eq!(dup.unwrap_err(), NetworkError::DuplicateNode("P".into()));
        let bad = Node { id: "E".into(), kind: NodeKind::Earth, longitude_deg: Some(1.0) };
        assert!(StaticNetwork::build(vec![bad, Node::parking("P", 0.0)], geo(), 2).is_err());
        assert!(StaticNetwork::build(vec![Node::parking("P", 0.0)], geo(), 2).is_err());
    }

    #[test]
    fn co_located_customers_have_zero_delta_v() {
        let net = StaticNetwork::build(
            vec![Node::earth("E"), Node::parking("P", -170.0), Node::customer("A", 20.0), Node::customer("B", 20.0)],
            geo(),
            2,
        )
        .unwrap();
        let a = net.find("A").unwrap();
        let b = net.find("B").unwrap();
        let arc = net.arcs().iter().find(|x| x.origin == a && x.destination == b).unwrap();
        assert_eq!(arc.kind, ArcKind::Transport);
        assert!(arc.delta_v_km_s.abs() < 1e-12);
    }

    #[test]
    fn prune_keeps_needed_and_occupied() {
        let net = StaticNetwork::build(
            vec![
                Node::earth("E"),
                Node::parking("P", -170.0),
                Node::customer("A", 10.0),
                Node::customer("B", 20.0),
                Node::customer("C", 30.0),
            ],
            geo(),
            2,
        )
        .unwrap();
        let pruned = net.prune_to_demand(["A"], ["C"]);
        let ids: Vec<&str> = pruned.nodes().iter().map(|n| n.id.as_str()).collect();
        assert_eq!(ids, vec!["E", "P", "A", "C"]);
        for arc in pruned.arcs() {
            assert!(arc.origin.0 < 4 && arc.destination.0 < 4);
        }
        let none = net.prune_to_demand([], []);
        assert_eq!(none.nodes().len(), 2);
        let all = net.prune_to_demand(["A", "B", "C"], []);
        assert_eq!(all.nodes(), net.nodes());
        assert_eq!(all.arcs(), net.arcs());
    }

    #[test]
    fn expansion_structure() {
        let net = StaticNetwork::build(
            vec![Node::earth("E"), Node::parking("P", -170.0), Node::customer("A", -100.0)],
            geo(),
            1,
        )
        .unwrap();
        let grid = TimeGrid::new(1, 10, 2, 20).unwrap();
        let dynet = DynamicNetwork::expand(net, grid, 0, Some(10)).unwrap();
        let p = dynet.statics.find("P").unwrap();
        let a = dynet.statics.find("A").unwrap();
        // a transfer leaving t = 10 arrives at t = 11
        let t10 = dynet.time_index(10).unwrap();
        let leg = dynet
            .arcs_out(p, t10)
            .iter()
            .map(|&i| dynet.arcs()[i])
            .find(|x| dynet.destination(x) == a)
            .unwrap();
        assert_eq!(dynet.time(leg.end), 11);
        // no transfer leaves the last flight node of an interval
        let t12 = dynet.time_index(12).unwrap();
        assert!(dynet.arcs_out(p, t12).iter().all(|&i| dynet.kind(&dynet.arcs()[i]) == ArcKind::Holdover));
        // launches at 0 and 10
        let launches: Vec<i64> = dynet
            .arcs()
            .iter()
            .filter(|x| dynet.kind(x) == ArcKind::Launch)
            .map(|x| dynet.time(x.start))
            .collect();
        assert_eq!(launches, vec![0, 10]);
    }

    #[test]
    fn launch_boundaries_follow_calendar() {
        let hits: Vec<i64> = (0..10).map(|k| k * 10).filter(|&d| is_launch_boundary(d, 10, 30)).collect();
        assert_eq!(hits, vec![0, 30, 60, 90]);
        let odd: Vec<i64> = (0..10).map(|k| k * 10).filter(|&d| is_launch_boundary(d, 10, 25)).collect();
        assert_eq!(odd, vec![0, 30, 50, 80]);
    }
}
