//! Position and content of every asset at a date; the hand-off between planning
//! horizons.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commodity::{Commodity, CommodityVec};
use crate::demand::ServiceNeed;
use crate::fleet::Fleet;

/// Quantities below this magnitude are treated as rounding noise.
pub const STATE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub name: String,
    pub node: String,
    /// Own propellant of a servicer (zero for depots).
    pub propellant_kg: f64,
    pub cargo: CommodityVec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InProgressService {
    pub need: ServiceNeed,
    pub servicer: String,
    pub start_day: i64,
    /// Exclusive end of the occupancy (an interval boundary).
    pub end_day: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfrastructureState {
    pub day: i64,
    pub vehicles: Vec<VehicleState>,
    /// Commodities lying at a parking node outside any vehicle (e.g. just delivered by
    /// a launcher).
    pub loose: BTreeMap<String, CommodityVec>,
    pub in_progress: Vec<InProgressService>,
}

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("{0}: negative quantity {1}")]
    Negative(String, f64),
    #[error("{vehicle}: {what} {value} exceeds capacity {capacity}")]
    OverCapacity { vehicle: String, what: String, value: f64, capacity: f64 },
    #[error("servicer {servicer} is at {at} but serves {need_at}")]
    MisplacedService { servicer: String, at: String, need_at: String },
    #[error("unknown vehicle {0}")]
    UnknownVehicle(String),
}

impl InfrastructureState {
    pub fn vehicle(&self, name: &str) -> Option<&VehicleState> {
        self.vehicles.iter().find(|v| v.name == name)
    }

    pub fn vehicle_mut(&mut self, name: &str) -> Option<&mut VehicleState> {
        self.vehicles.iter_mut().find(|v| v.name == name)
    }

    /// Total quantity of each commodity, counting servicer propellant under its type.
    pub fn total_commodities(&self, fleet: &Fleet) -> CommodityVec {
        let mut total = CommodityVec::ZERO;
        for v in &self.vehicles {
            total += v.cargo;
            if let Some(s) = fleet.servicer(&v.name) {
                total[s.propellant] += v.propellant_kg;
            }
        }
        for q in self.loose.values() {
            total += *q;
        }
        total
    }

    pub fn validate(&self, fleet: &Fleet) -> Result<(), StateError> {
        for v in &self.vehicles {
            if v.propellant_kg < 0.0 {
                return Err(StateError::Negative(format!("{} propellant", v.name), v.propellant_kg));
            }
            for (c, q) in v.cargo.iter() {
                if q < 0.0 {
                    return Err(StateError::Negative(format!("{} {c}", v.name), q));
                }
            }
            if let Some(s) = fleet.servicer(&v.name) {
                if v.propellant_kg > s.tank_kg + STATE_TOL {
                    return Err(StateError::OverCapacity {
                        vehicle: v.name.clone(),
                        what: "propellant".into(),
                        value: v.propellant_kg,
                        capacity: s.tank_kg,
                    });
                }
                let m = v.cargo.mass_kg(fleet.prices.spare_unit_mass_kg);
                if m > s.payload_kg + STATE_TOL {
                    return Err(StateError::OverCapacity {
                        vehicle: v.name.clone(),
                        what: "cargo mass".into(),
                        value: m,
                        capacity: s.payload_kg,
                    });
                }
            } else if let Some(d) = fleet.depot(&v.name) {
                for c in Commodity::ALL {
                    if v.cargo[c] > d.capacity[c] + STATE_TOL {
                        return Err(StateError::OverCapacity {
                            vehicle: v.name.clone(),
                            what: c.to_string(),
                            value: v.cargo[c],
                            capacity: d.capacity[c],
                        });
                    }
                }
            } else {
                return Err(StateError::UnknownVehicle(v.name.clone()));
            }
        }
        for (node, q) in &self.loose {
            for (c, x) in q.iter() {
                if x < 0.0 {
                    return Err(StateError::Negative(format!("loose {c} at {node}"), x));
                }
            }
        }
        for p in &self.in_progress {
            let v = self.vehicle(&p.servicer).ok_or_else(|| StateError::UnknownVehicle(p.servicer.clone()))?;
            if v.node != p.need.satellite {
                return Err(StateError::MisplacedService {
                    servicer: p.servicer.clone(),
                    at: v.node.clone(),
                    need_at: p.need.satellite.clone(),
                });
            }
        }
        Ok(())
    }

    /// Nodes currently hosting a vehicle.
    pub fn occupied_nodes(&self) -> impl Iterator<Item = &str> {
        self.vehicles.iter().map(|v| v.node.as_str())
    }
}
