//! Reference solver for tiny instances.
//!
//! Works on the physical problem rather than on the matrix: enumerates every
//! assignment of needs to (servicer, start) pairs, orders them by assignment profit,
//! and for each one searches servicer itineraries that honour the service pins and
//! the propellant/cargo logistics. The first combination that can be realised is
//! materialised into a full model point, re-checked against every row, and returned.
//!
//! Scope: no launches, and propellant/cargo are exchanged only at parking nodes that
//! host a depot; everything at a depot node that no servicer takes must fit in the
//! depot. With several servicers, every parking node they can reach must host a
//! depot. Other instances are reported as [`SolveError::InstanceTooLarge`].

use std::collections::{BTreeMap, HashMap};
use std::time::Instant;

use super::verify::check_point;
use super::{Solution, SolveError, SolveStatus};
use crate::astro::consumption_fraction;
use crate::commodity::{Commodity, CommodityVec};
use crate::demand::build_occupancy;
use crate::model::{OosModel, VehicleRole};
use crate::network::{ArcKind, NodeId, NodeKind};

const TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExhaustiveLimits {
    pub max_combinations: usize,
    pub max_paths: usize,
    pub max_joint_checks: usize,
}

impl Default for ExhaustiveLimits {
    fn default() -> Self {
        Self { max_combinations: 2_000_000, max_paths: 200_000, max_joint_checks: 100_000 }
    }
}

/// One servicer itinerary with the propellant and cargo it needs.
#[derive(Debug, Clone)]
struct Plan {
    arcs: Vec<usize>,
    fuel_out: Vec<f64>,
    fuel_in: Vec<f64>,
    cargo: Vec<CommodityVec>,
    /// Withdrawals from depot nodes: (time index, node, commodity vector incl. propellant).
    draws: Vec<(usize, NodeId, CommodityVec)>,
}

struct Servicer {
    vehicle: usize,
    start: NodeId,
    structure: f64,
    tank: f64,
    payload: f64,
    isp: f64,
    propellant: Commodity,
    initial_fuel: f64,
    initial_cargo: CommodityVec,
}

type Choice = Option<(usize, i64)>;

/// Solves `model` by enumeration. Returns an optimal point or `Infeasible`.
pub fn solve_exhaustive(model: &OosModel, limits: &ExhaustiveLimits) -> Result<Solution, SolveError> {
    let started = Instant::now();
    let net = &model.network;
    let statics = &net.statics;
    let fleet = &model.fleet;
    let last = net.last_time();
    let too_large = |m: String| Err(SolveError::InstanceTooLarge(m));

    if net.arcs().iter().any(|a| net.kind(a) == ArcKind::Launch) {
        return too_large("launch arcs present".into());
    }
    let mut servicers: Vec<Servicer> = Vec::new();
    let mut depots: Vec<(usize, usize, NodeId)> = Vec::new();
    for (vi, v) in model.vehicles.iter().enumerate() {
        if statics.node(v.start).kind == NodeKind::Earth {
            return too_large(format!("{} starts on the ground", v.name));
        }
        let vs = model.initial.vehicle(&v.name).expect("vehicle in state");
        match v.role {
            VehicleRole::Servicer(si) => {
                let d = &fleet.servicers[si];
                servicers.push(Servicer {
                    vehicle: vi,
                    start: v.start,
                    structure: d.structure_mass_kg(),
                    tank: d.tank_kg,
                    payload: d.payload_kg,
                    isp: d.isp_s,
                    propellant: d.propellant,
                    initial_fuel: vs.propellant_kg,
                    initial_cargo: vs.cargo,
                });
            }
            VehicleRole::Depot(di) => depots.push((vi, di, v.start)),
            VehicleRole::Launcher => return too_large("launcher present".into()),
        }
    }
    let depot_nodes: Vec<NodeId> = depots.iter().map(|d| d.2).collect();
    // Two servicers meeting at a parking node without a depot may pool their loads,
    // which the itinerary search does not model.
    if servicers.len() > 1 {
        let mut visitors: HashMap<NodeId, Vec<usize>> = HashMap::new();
        for &(vi, ai) in model.arc_vars.keys() {
            if !servicers.iter().any(|s| s.vehicle == vi) {
                continue;
            }
            let a = &net.arcs()[ai];
            for node in [net.origin(a), net.destination(a)] {
                if statics.node(node).kind == NodeKind::Parking && !depot_nodes.contains(&node) {
                    let v = visitors.entry(node).or_default();
                    if !v.contains(&vi) {
                        v.push(vi);
                    }
                }
            }
        }
        if let Some((node, _)) = visitors.iter().find(|(_, v)| v.len() > 1) {
            return too_large(format!("servicers may meet at {} without a depot", statics.node(*node).id));
        }
    }
    let usable_times: Vec<i64> = net.times()[..last].to_vec();

    // Occupancy (time indices) and location of each candidate assignment.
    let occupancy = |need: usize, tau: i64| -> Vec<usize> {
        let p = &model.needs[need];
        let days = match &p.in_progress {
            Some((_, _, end)) => usable_times.iter().copied().filter(|t| t < end).collect(),
            None => build_occupancy(tau, p.service.duration_days, &net.grid, &usable_times),
        };
        days.into_iter().map(|d| net.time_index(d).expect("grid day")).collect()
    };
    let site = |need: usize| statics.find(&model.needs[need].need.satellite).expect("customer node");

    // Options per need.
    let mut fixed: Vec<(usize, usize, i64)> = Vec::new();
    let mut options: Vec<(usize, Vec<(Choice, f64)>)> = Vec::new();
    for (ni, p) in model.needs.iter().enumerate() {
        let cands: Vec<(usize, i64)> = model
            .assign
            .iter()
            .filter(|a| a.0 == ni)
            .map(|&(_, vi, tau, _)| (vi, tau))
            .collect();
        if p.in_progress.is_some() {
            let &(vi, tau) = cands.first().expect("in-progress assignment column");
            fixed.push((ni, vi, tau));
            continue;
        }
        let mut opts: Vec<(Choice, f64)> = vec![(None, 0.0)];
        for (vi, tau) in cands {
            let value = p.service.revenue_usd - p.service.delay_penalty_usd_per_day * (tau - p.need.occurrence_day) as f64;
            opts.push((Some((vi, tau)), value));
        }
        options.push((ni, opts));
    }
    let combos_total = options.iter().try_fold(1usize, |acc, (_, o)| acc.checked_mul(o.len()));
    match combos_total {
        Some(n) if n <= limits.max_combinations => {}
        _ => return too_large(format!("more than {} assignment combinations", limits.max_combinations)),
    }
    let mut combos: Vec<(f64, Vec<Choice>)> = Vec::new();
    let mut idx = vec![0usize; options.len()];
    loop {
        let choice: Vec<Choice> = idx.iter().zip(&options).map(|(&i, (_, o))| o[i].0).collect();
        let value: f64 = idx.iter().zip(&options).map(|(&i, (_, o))| o[i].1).sum();
        combos.push((value, choice));
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < options[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            break;
        }
    }
    combos.sort_by(|a, b| b.0.total_cmp(&a.0));

    let operating: f64 = model
        .vehicles
        .iter()
        .map(|v| match v.role {
            VehicleRole::Servicer(si) => fleet.servicers[si].operating_usd_per_day,
            VehicleRole::Depot(di) => fleet.depots[di].operating_usd_per_day,
            VehicleRole::Launcher => 0.0,
        })
        .sum::<f64>()
        * (net.end_day() - net.t0) as f64;

    let mut plan_cache: HashMap<(usize, Vec<(usize, i64)>), Vec<Plan>> = HashMap::new();
    let mut joint_checks = 0usize;
    for (value, choice) in &combos {
        let mut chosen: Vec<(usize, usize, i64)> = fixed.clone();
        for ((ni, _), c) in options.iter().zip(choice) {
            if let Some((vi, tau)) = c {
                chosen.push((*ni, *vi, *tau));
            }
        }
        if !occupancies_disjoint(&chosen, &occupancy, &site) {
            continue;
        }
        let mut plan_lists: Vec<Vec<Plan>> = Vec::new();
        let mut ok = true;
        for s in &servicers {
            let mut mine: Vec<(usize, i64)> =
                chosen.iter().filter(|c| c.1 == s.vehicle).map(|c| (c.0, c.2)).collect();
            mine.sort();
            let key = (s.vehicle, mine.clone());
            if !plan_cache.contains_key(&key) {
                let plans = servicer_plans(model, s, &mine, &occupancy, &site, &depot_nodes, limits)?;
                plan_cache.insert(key.clone(), plans);
            }
            let plans = &plan_cache[&key];
            if plans.is_empty() {
                ok = false;
                break;
            }
            plan_lists.push(plans.clone());
        }
        if !ok {
            continue;
        }
        // Joint check over the product of plan lists.
        let mut pick = vec![0usize; plan_lists.len()];
        loop {
            joint_checks += 1;
            if joint_checks > limits.max_joint_checks {
                return too_large(format!("more than {} joint itinerary checks", limits.max_joint_checks));
            }
            let plans: Vec<&Plan> = pick.iter().zip(&plan_lists).map(|(&i, l)| &l[i]).collect();
            if let Some(values) = materialize(model, &servicers, &plans, &depots, &chosen, &occupancy) {
                let objective = check_point(&model.milp, &values)
                    .map_err(|e| SolveError::ProtocolError { message: format!("exhaustive point rejected: {e}"), captured: String::new() })?;
                let expected = value - operating;
                if (objective - expected).abs() > 1e-6 * expected.abs().max(1.0) {
                    return Err(SolveError::ProtocolError {
                        message: format!("exhaustive objective {objective} differs from enumerated profit {expected}"),
                        captured: String::new(),
                    });
                }
                return Ok(Solution {
                    status: SolveStatus::Optimal,
                    objective: Some(objective),
                    values,
                    gap: Some(0.0),
                    wall_time_s: started.elapsed().as_secs_f64(),
                });
            }
            let mut k = 0;
            while k < pick.len() {
                pick[k] += 1;
                if pick[k] < plan_lists[k].len() {
                    break;
                }
                pick[k] = 0;
                k += 1;
            }
            if k == pick.len() {
                break;
            }
        }
    }
    Ok(Solution::without_values(SolveStatus::Infeasible, started.elapsed().as_secs_f64()))
}

fn occupancies_disjoint(
    chosen: &[(usize, usize, i64)],
    occupancy: &impl Fn(usize, i64) -> Vec<usize>,
    site: &impl Fn(usize) -> NodeId,
) -> bool {
    let mut by_vehicle: HashMap<(usize, usize), ()> = HashMap::new();
    let mut by_site: HashMap<(NodeId, usize), ()> = HashMap::new();
    for &(ni, vi, tau) in chosen {
        for t in occupancy(ni, tau) {
            if by_vehicle.insert((vi, t), ()).is_some() || by_site.insert((site(ni), t), ()).is_some() {
                return false;
            }
        }
    }
    true
}

/// All itineraries of `s` that honour the pins of its assignments and are
/// logistically feasible on their own.
fn servicer_plans(
    model: &OosModel,
    s: &Servicer,
    mine: &[(usize, i64)],
    occupancy: &impl Fn(usize, i64) -> Vec<usize>,
    site: &impl Fn(usize) -> NodeId,
    depot_nodes: &[NodeId],
    limits: &ExhaustiveLimits,
) -> Result<Vec<Plan>, SolveError> {
    let net = &model.network;
    let last = net.last_time();
    let mut pinned: BTreeMap<usize, NodeId> = BTreeMap::new();
    let mut deliveries: Vec<(usize, CommodityVec)> = Vec::new();
    for &(ni, tau) in mine {
        for t in occupancy(ni, tau) {
            if pinned.insert(t, site(ni)).is_some() {
                return Ok(Vec::new());
            }
        }
        let p = &model.needs[ni];
        if p.in_progress.is_none() && !p.delivery.is_zero() {
            deliveries.push((net.time_index(tau).expect("grid day"), p.delivery));
        }
    }
    let mut plans = Vec::new();
    let mut path: Vec<usize> = Vec::with_capacity(last);
    let mut visited = 0usize;
    let mut search = Search { model, s, pinned: &pinned, deliveries: &deliveries, depot_nodes, limits };
    search.walk(s.start, 0, &mut path, &mut plans, &mut visited)?;
    Ok(plans)
}

struct Search<'a> {
    model: &'a OosModel,
    s: &'a Servicer,
    pinned: &'a BTreeMap<usize, NodeId>,
    deliveries: &'a [(usize, CommodityVec)],
    depot_nodes: &'a [NodeId],
    limits: &'a ExhaustiveLimits,
}

impl Search<'_> {
    fn walk(
        &mut self,
        node: NodeId,
        t: usize,
        path: &mut Vec<usize>,
        plans: &mut Vec<Plan>,
        visited: &mut usize,
    ) -> Result<(), SolveError> {
        let net = &self.model.network;
        if t == net.last_time() {
            *visited += 1;
            if *visited > self.limits.max_paths {
                return Err(SolveError::InstanceTooLarge(format!("more than {} itineraries", self.limits.max_paths)));
            }
            if let Some(plan) = evaluate(self.model, self.s, path, self.deliveries, self.depot_nodes) {
                plans.push(plan);
            }
            return Ok(());
        }
        let pin = self.pinned.get(&t).copied();
        if pin.is_some_and(|p| p != node) {
            return Ok(());
        }
        for &a in net.arcs_out(node, t) {
            let usable = match net.kind(&net.arcs()[a]) {
                ArcKind::Holdover => true,
                ArcKind::Transport => pin.is_none(),
                ArcKind::Launch => false,
            };
            if !usable || !self.model.arc_vars.contains_key(&(self.s.vehicle, a)) {
                continue;
            }
            path.push(a);
            self.walk(net.destination(&net.arcs()[a]), t + 1, path, plans, visited)?;
            path.pop();
        }
        Ok(())
    }
}

/// Minimal propellant and cargo along `path`; `None` when a tank or payload limit is
/// exceeded or the starting load is insufficient.
fn evaluate(
    model: &OosModel,
    s: &Servicer,
    path: &[usize],
    deliveries: &[(usize, CommodityVec)],
    depot_nodes: &[NodeId],
) -> Option<Plan> {
    let net = &model.network;
    let geom = &net.statics.geometry;
    let prices = &model.fleet.prices;
    let n = path.len();
    let origin = |k: usize| net.origin(&net.arcs()[path[k]]);
    let is_depot = |node: NodeId| depot_nodes.contains(&node);
    let mut seg_starts: Vec<usize> = (0..n).filter(|&k| k == 0 || is_depot(origin(k))).collect();
    seg_starts.push(n);
    let mut fuel_out = vec![0.0; n];
    let mut fuel_in = vec![0.0; n];
    let mut cargo = vec![CommodityVec::ZERO; n];
    let mut draws = Vec::new();
    let phi = |k: usize| {
        let a = &net.arcs()[path[k]];
        if net.kind(a) == ArcKind::Transport {
            consumption_fraction(net.static_arc(a).delta_v_km_s, s.isp, geom)
        } else {
            0.0
        }
    };
    for w in seg_starts.windows(2) {
        let (k0, k1) = (w[0], w[1]);
        if !is_depot(origin(k0)) {
            // Leaving the start away from a depot: the initial load is carried as is.
            let mut f = s.initial_fuel;
            let mut c = s.initial_cargo;
            for k in k0..k1 {
                for &(d, q) in deliveries {
                    if d == k {
                        c = c - q;
                    }
                }
                if c.0.iter().any(|&x| x < -TOL) {
                    return None;
                }
                let mass = c.mass_kg(prices.spare_unit_mass_kg);
                if mass > s.payload + TOL || f > s.tank + TOL {
                    return None;
                }
                cargo[k] = c;
                fuel_out[k] = f;
                let p = phi(k);
                let arrive = if p > 0.0 { (1.0 - p) * f - p * (s.structure + mass) } else { f };
                if arrive < -TOL {
                    return None;
                }
                fuel_in[k] = arrive.max(0.0);
                f = fuel_in[k];
            }
            continue;
        }
        for k in k0..k1 {
            for &(d, q) in deliveries {
                if d > k && d < k1 {
                    cargo[k] += q;
                }
            }
        }
        let mut need = 0.0;
        for k in (k0..k1).rev() {
            let p = phi(k);
            let mass = cargo[k].mass_kg(prices.spare_unit_mass_kg);
            if mass > s.payload + TOL {
                return None;
            }
            fuel_in[k] = need;
            fuel_out[k] = if p > 0.0 { (need + p * (s.structure + mass)) / (1.0 - p) } else { need };
            if fuel_out[k] > s.tank + TOL {
                return None;
            }
            need = fuel_out[k];
        }
        let mut take = cargo[k0];
        take[s.propellant] += fuel_out[k0];
        draws.push((k0, origin(k0), take));
    }
    Some(Plan { arcs: path.to_vec(), fuel_out, fuel_in, cargo, draws })
}

/// Builds the full model point for a set of itineraries, simulating depot stock.
/// `None` when depots run dry.
fn materialize(
    model: &OosModel,
    servicers: &[Servicer],
    plans: &[&Plan],
    depots: &[(usize, usize, NodeId)],
    chosen: &[(usize, usize, i64)],
    occupancy: &impl Fn(usize, i64) -> Vec<usize>,
) -> Option<Vec<f64>> {
    let net = &model.network;
    let fleet = &model.fleet;
    let last = net.last_time();
    let mut values = vec![0.0; model.milp.num_vars()];
    let set = |values: &mut Vec<f64>, v: Option<crate::milp::VarId>, x: f64| -> Option<()> {
        match v {
            Some(v) => values[v.0] = x,
            None if x.abs() <= TOL => {}
            None => return None,
        }
        Some(())
    };

    for (s, plan) in servicers.iter().zip(plans) {
        for (k, &ai) in plan.arcs.iter().enumerate() {
            let vars = model.arc_vars.get(&(s.vehicle, ai))?;
            values[vars.y.0] = 1.0;
            set(&mut values, vars.prop_out, plan.fuel_out[k])?;
            if vars.prop_in.is_some() {
                set(&mut values, vars.prop_in, plan.fuel_in[k])?;
            }
            for c in Commodity::ALL {
                set(&mut values, vars.cargo_out[c.index()], plan.cargo[k][c])?;
            }
        }
    }

    // Initial pool at each depot node.
    let mut pool: HashMap<NodeId, CommodityVec> = HashMap::new();
    for (vi, v) in model.vehicles.iter().enumerate() {
        if !depots.iter().any(|d| d.2 == v.start) {
            continue;
        }
        let vs = model.initial.vehicle(&v.name)?;
        let mut q = vs.cargo;
        if let VehicleRole::Servicer(si) = v.role {
            q[fleet.servicers[si].propellant] += vs.propellant_kg;
        }
        let _ = vi;
        *pool.entry(v.start).or_default() += q;
    }
    for (node, q) in &model.initial.loose {
        let n = net.statics.find(node)?;
        *pool.entry(n).or_default() += *q;
    }
    let mut depot_in: Vec<CommodityVec> = vec![CommodityVec::ZERO; depots.len()];
    for t in 0..last {
        let mut avail: HashMap<NodeId, CommodityVec> = HashMap::new();
        if t == 0 {
            avail = pool.clone();
        }
        for (j, d) in depots.iter().enumerate() {
            *avail.entry(d.2).or_default() += depot_in[j];
        }
        for (s, plan) in servicers.iter().zip(plans) {
            // Arrival of the previous arc at a depot node returns leftovers.
            if t > 0 {
                let a = &net.arcs()[plan.arcs[t - 1]];
                let dest = net.destination(a);
                if depots.iter().any(|d| d.2 == dest) {
                    let mut q = plan.cargo[t - 1];
                    q[s.propellant] += plan.fuel_in[t - 1];
                    *avail.entry(dest).or_default() += q;
                }
            }
            for &(k, node, take) in &plan.draws {
                if k == t {
                    let a = avail.entry(node).or_default();
                    *a = *a - take;
                }
            }
        }
        for (j, &(vi, di, node)) in depots.iter().enumerate() {
            let d = &fleet.depots[di];
            let a = avail.entry(node).or_default();
            if a.0.iter().any(|&x| x < -1e-7) {
                return None;
            }
            let ai = net.holdover(node, t)?;
            let vars = model.arc_vars.get(&(vi, ai))?;
            values[vars.y.0] = 1.0;
            let mut next = CommodityVec::ZERO;
            for c in Commodity::ALL {
                let Some(x) = vars.cargo_out[c.index()] else { continue };
                let stored = a[c].max(0.0).min(d.capacity[c]);
                values[x.0] = stored;
                a[c] -= stored;
                next[c] = stored;
                if let Some(x_in) = vars.cargo_in[c.index()] {
                    let left = stored - d.stationkeeping_kg_per_day * net.duration(&net.arcs()[ai]) as f64;
                    if left < -TOL {
                        return None;
                    }
                    values[x_in.0] = left.max(0.0);
                    next[c] = left.max(0.0);
                }
            }
            depot_in[j] = next;
        }
        if avail.values().any(|a| a.0.iter().any(|&x| x.abs() > 1e-7)) {
            return None;
        }
    }

    for &(ni, vi, tau) in chosen {
        let &(_, _, _, h) = model.assign.iter().find(|a| a.0 == ni && a.1 == vi && a.2 == tau)?;
        values[h.0] = 1.0;
        for t in occupancy(ni, tau) {
            let day = net.time(t);
            let &(_, _, _, b) = model.dispatch.iter().find(|d| d.0 == ni && d.1 == vi && d.2 == day)?;
            values[b.0] = 1.0;
        }
    }
    Some(values)
}
