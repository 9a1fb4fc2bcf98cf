//! Two-body phasing maneuvers between slots of one circular orbit, and the
//! impulsive rocket equation used to turn their delta-V into propellant.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earth gravitational parameter, km^3/s^2.
pub const MU_EARTH_KM3_S2: f64 = 398_600.4418;
/// Standard gravity, m/s^2.
pub const G0_M_S2: f64 = 9.80665;
/// Geostationary orbit radius, km.
pub const GEO_RADIUS_KM: f64 = 42_164.0;
/// Earth radius plus 2000 km: keeps every phasing perigee clear of the LEO belt.
pub const DEFAULT_R_CRIT_KM: f64 = 6_378.137 + 2_000.0;

const TIME_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AstroError {
    #[error("no phasing transfer satisfies the altitude and time-of-flight limits (alpha = {alpha} rad, tof_max = {tof_max_s} s)")]
    NoFeasibleTransfer { alpha: f64, tof_max_s: f64 },
    #[error("invalid orbit geometry: {0}")]
    InvalidGeometry(String),
    #[error("invalid maneuver input: {0}")]
    InvalidInput(String),
}

/// Shared circular orbit of the customer fleet plus the forbidden zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitGeometry {
    pub radius_km: f64,
    pub r_crit_km: f64,
    pub mu_km3_s2: f64,
    pub g0_m_s2: f64,
}

impl Default for OrbitGeometry {
    fn default() -> Self {
        Self {
            radius_km: GEO_RADIUS_KM,
            r_crit_km: DEFAULT_R_CRIT_KM,
            mu_km3_s2: MU_EARTH_KM3_S2,
            g0_m_s2: G0_M_S2,
        }
    }
}

impl OrbitGeometry {
    pub fn new(radius_km: f64, r_crit_km: f64, mu_km3_s2: f64, g0_m_s2: f64) -> Result<Self, AstroError> {
        let geom = Self { radius_km, r_crit_km, mu_km3_s2, g0_m_s2 };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<(), AstroError> {
        let finite = [self.radius_km, self.r_crit_km, self.mu_km3_s2, self.g0_m_s2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(AstroError::InvalidGeometry("non-finite parameter".into()));
        }
        if !(self.r_crit_km > 0.0 && self.radius_km > self.r_crit_km) {
            return Err(AstroError::InvalidGeometry(format!(
                "need r > r_crit > 0, got r = {} km, r_crit = {} km",
                self.radius_km, self.r_crit_km
            )));
        }
        if self.mu_km3_s2 <= 0.0 || self.g0_m_s2 <= 0.0 {
            return Err(AstroError::InvalidGeometry("mu and g0 must be positive".into()));
        }
        Ok(())
    }

    /// Seconds per radian of mean motion on the reference orbit.
    pub fn time_per_radian_s(&self) -> f64 {
        (self.radius_km.powi(3) / self.mu_km3_s2).sqrt()
    }

    pub fn period_s(&self) -> f64 {
        TAU * self.time_per_radian_s()
    }

    /// Smallest phasing semi-major axis whose perigee stays outside r_crit.
    pub fn min_semi_major_axis_km(&self) -> f64 {
        0.5 * (self.radius_km + self.r_crit_km)
    }

    pub fn circular_speed_km_s(&self) -> f64 {
        (self.mu_km3_s2 / self.radius_km).sqrt()
    }
}

/// A selected phasing maneuver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasingSolution {
    pub semi_major_axis_km: f64,
    /// Complete revolutions flown by the servicer on the phasing orbit (k1 >= 1).
    pub servicer_revolutions: u32,
    /// Complete revolutions flown by the target before rendezvous (k2 >= 0).
    pub target_revolutions: u32,
    pub delta_v_km_s: f64,
    pub travel_time_s: f64,
}

/// Lead angle used by the phasing equations, from servicer and target longitudes (deg East).
///
/// The target sits `dtheta = (target - servicer) mod 360` ahead in the direction of motion
/// and must cover `alpha = 2*pi - dtheta` to reach the servicer's starting point, so a
/// co-located pair maps to `alpha = 2*pi`.
pub fn lead_angle(servicer_lon_deg: f64, target_lon_deg: f64) -> f64 {
    let dtheta = (target_lon_deg - servicer_lon_deg).rem_euclid(360.0).to_radians();
    let alpha = TAU - dtheta;
    if alpha <= 0.0 {
        TAU
    } else {
        alpha
    }
}

/// Semi-major axis that makes k1 servicer revolutions last as long as the target's
/// `alpha + 2*pi*k2` sweep.
pub fn phasing_semi_major_axis(alpha: f64, servicer_revs: u32, target_revs: u32, geom: &OrbitGeometry) -> f64 {
    let ratio = (alpha + TAU * target_revs as f64) / (TAU * servicer_revs as f64);
    ratio.powf(2.0 / 3.0) * geom.radius_km
}

/// Two-impulse delta-V to enter and leave a phasing orbit of semi-major axis `a`.
pub fn phasing_delta_v(a_km: f64, geom: &OrbitGeometry) -> f64 {
    let mu = geom.mu_km3_s2;
    let r = geom.radius_km;
    let v_circ = (mu / r).sqrt();
    let v_phase = (mu * (2.0 / r - 1.0 / a_km)).sqrt();
    2.0 * (v_circ - v_phase).abs()
}

/// Target-side travel time for `target_revs` extra revolutions.
pub fn target_travel_time(alpha: f64, target_revs: u32, geom: &OrbitGeometry) -> f64 {
    (alpha + TAU * target_revs as f64) * geom.time_per_radian_s()
}

/// Minimum delta-V phasing rendezvous under the altitude and time-of-flight limits.
///
/// `alpha` is the target's lead angle in `(0, 2*pi]` (see [`lead_angle`]). Candidate
/// target revolution counts are scanned while the target-side travel time fits in
/// `tof_max_s`; for each, servicer revolution counts are scanned while the phasing
/// orbit stays above the forbidden zone. Equal delta-V candidates are resolved by the
/// shorter travel time and then by the smaller servicer revolution count.
pub fn solve_phasing(alpha: f64, geom: &OrbitGeometry, tof_max_s: f64) -> Result<PhasingSolution, AstroError> {
    geom.validate()?;
    if !(alpha > 0.0 && alpha <= TAU) {
        return Err(AstroError::InvalidInput(format!("alpha must lie in (0, 2pi], got {alpha}")));
    }
    if !(tof_max_s > 0.0) || !tof_max_s.is_finite() {
        return Err(AstroError::InvalidInput(format!("tof_max must be positive, got {tof_max_s}")));
    }

    let a_min = geom.min_semi_major_axis_km();
    let mut best: Option<PhasingSolution> = None;
    let mut k2 = 0u32;
    loop {
        let travel = target_travel_time(alpha, k2, geom);
        if travel > tof_max_s * (1.0 + TIME_TOLERANCE) {
            break;
        }
        let mut k1 = 1u32;
        loop {
            let a = phasing_semi_major_axis(alpha, k1, k2, geom);
            // a shrinks as k1 grows, so the first violation ends the scan
            if a < a_min {
                break;
            }
            let candidate = PhasingSolution {
                semi_major_axis_km: a,
                servicer_revolutions: k1,
                target_revolutions: k2,
                delta_v_km_s: phasing_delta_v(a, geom),
                travel_time_s: travel,
            };
            if best.as_ref().map_or(true, |b| better(&candidate, b)) {
                best = Some(candidate);
            }
            k1 += 1;
        }
        k2 += 1;
    }
    best.ok_or(AstroError::NoFeasibleTransfer { alpha, tof_max_s })
}

fn better(c: &PhasingSolution, incumbent: &PhasingSolution) -> bool {
    if c.delta_v_km_s != incumbent.delta_v_km_s {
        return c.delta_v_km_s < incumbent.delta_v_km_s;
    }
    if c.travel_time_s != incumbent.travel_time_s {
        return c.travel_time_s < incumbent.travel_time_s;
    }
    c.servicer_revolutions < incumbent.servicer_revolutions
}

/// Fraction of the departing wet mass burned for `delta_v_km_s`: `1 - exp(-dv / (g0 Isp))`.
pub fn consumption_fraction(delta_v_km_s: f64, isp_s: f64, geom: &OrbitGeometry) -> f64 {
    debug_assert!(delta_v_km_s >= 0.0 && isp_s > 0.0);
    let exhaust_km_s = geom.g0_m_s2 * isp_s / 1000.0;
    -(-delta_v_km_s / exhaust_km_s).exp_m1()
}

/// Propellant consumed by an impulsive maneuver starting at wet mass `m0_kg`.
pub fn propellant_for_maneuver(delta_v_km_s: f64, isp_s: f64, m0_kg: f64, geom: &OrbitGeometry) -> f64 {
    m0_kg * consumption_fraction(delta_v_km_s, isp_s, geom)
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;

    fn geo() -> OrbitGeometry {
        OrbitGeometry::default()
    }

    #[test]
    fn co_located_rendezvous_is_free() {
        let g = geo();
        let sol = solve_phasing(TAU, &g, g.period_s()).unwrap();
        assert_eq!((sol.servicer_revolutions, sol.target_revolutions), (1, 0));
        assert!((sol.semi_major_axis_km - g.radius_km).abs() < 1e-9);
        assert!(sol.delta_v_km_s.abs() < 1e-12);
    }

    #[test]
    fn half_orbit_lead_semi_major_axis() {
        let g = geo();
        // (1/2)^(2/3) * 42164
        let a = phasing_semi_major_axis(PI, 1, 0, &g);
        assert!((a - 26_561.655_573_883_716).abs() < 1e-6);
    }

    #[test]
    fn half_orbit_lead_blocked_by_high_forbidden_zone() {
        // (r + 23000)/2 = 32582 km exceeds the only time-feasible axis (26561.7 km)
        let g = OrbitGeometry::new(GEO_RADIUS_KM, 23_000.0, MU_EARTH_KM3_S2, G0_M_S2).unwrap();
        let err = solve_phasing(PI, &g, 86_164.0).unwrap_err();
        assert!(matches!(err, AstroError::NoFeasibleTransfer { .. }));
    }

    #[test]
    fn half_orbit_lead_with_default_forbidden_zone() {
        let g = geo();
        let sol = solve_phasing(PI, &g, 86_164.0).unwrap();
        assert_eq!((sol.servicer_revolutions, sol.target_revolutions), (1, 0));
        // frozen from a standalone evaluation of the phasing equations
        assert!((sol.delta_v_km_s - 2.199_378_555_660_805).abs() < 1e-9);
        assert!((sol.travel_time_s - 43_081.785_275_289_14).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = geo();
        assert!(solve_phasing(0.0, &g, 1.0e5).is_err());
        assert!(solve_phasing(7.0, &g, 1.0e5).is_err());
        assert!(solve_phasing(1.0, &g, 0.0).is_err());
        assert!(OrbitGeometry::new(8000.0, 9000.0, MU_EARTH_KM3_S2, G0_M_S2).is_err());
    }

    #[test]
    fn short_tof_can_be_infeasible() {
        let g = geo();
        // a target 10 deg behind needs a full extra target revolution
        let alpha = 10f64.to_radians();
        assert!(solve_phasing(alpha, &g, 0.5 * g.period_s()).is_err());
        assert!(solve_phasing(alpha, &g, 2.0 * g.period_s()).is_ok());
    }

    #[test]
    fn lead_angle_convention() {
        assert!((lead_angle(10.0, 10.0) - TAU).abs() < 1e-15);
        // target 90 deg east (ahead) -> alpha = 270 deg
        assert!((lead_angle(0.0, 90.0) - 1.5 * PI).abs() < 1e-12);
        // target 90 deg west (behind) -> alpha = 90 deg
        assert!((lead_angle(0.0, -90.0) - 0.5 * PI).abs() < 1e-12);
        assert!((lead_angle(-170.0, -100.0) - (TAU - 70f64.to_radians())).abs() < 1e-12);
    }

    #[test]
    fn rocket_equation_values() {
        let g = geo();
        assert_eq!(propellant_for_maneuver(0.0, 316.0, 3000.0, &g), 0.0);
        let mp = propellant_for_maneuver(0.1, 316.0, 3000.0, &g);
        assert!((mp - 95.263_187_022_141_42).abs() < 1e-9, "{mp}");
        let phi = consumption_fraction(0.1, 316.0, &g);
        assert!((phi - 0.031_754_395_674_047_14).abs() < 1e-12);
        // inverting recovers the delta-V
        let dv = g.g0_m_s2 * 316.0 / 1000.0 * (3000.0 / (3000.0 - mp)).ln();
        assert!((dv - 0.1).abs() < 1e-12);
    }

    #[test]
    fn consumption_composes_multiplicatively() {
        let g = geo();
        let (a, b) = (0.37, 1.21);
        let lhs = consumption_fraction(a + b, 316.0, &g);
        let rhs = 1.0 - (1.0 - consumption_fraction(a, 316.0, &g)) * (1.0 - consumption_fraction(b, 316.0, &g));
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn propellant_approaches_wet_mass() {
        let g = geo();
        let mut last = 0.0;
        for dv in [1.0, 5.0, 20.0, 50.0, 100.0] {
            let mp = propellant_for_maneuver(dv, 316.0, 3000.0, &g);
            assert!(mp > last && mp < 3000.0);
            last = mp;
        }
        assert!(3000.0 - last < 1e-6);
    }
}
