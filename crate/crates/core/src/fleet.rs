//! Vehicle designs and prices of the servicing infrastructure.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::commodity::{Commodity, CommodityVec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tool {
    pub name: String,
    pub mass_kg: f64,
    pub cost_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServicerDesign {
    pub name: String,
    /// Integrated tools by kind and count; tools travel with the servicer.
    pub tools: BTreeMap<String, u32>,
    pub dry_mass_kg: f64,
    pub tool_mass_kg: f64,
    pub propellant: Commodity,
    pub tank_kg: f64,
    pub payload_kg: f64,
    pub isp_s: f64,
    pub manufacturing_usd: f64,
    pub tool_cost_usd: f64,
    pub operating_usd_per_day: f64,
}

impl ServicerDesign {
    /// Mass that burns propellant besides propellant and cargo.
    pub fn structure_mass_kg(&self) -> f64 {
        self.dry_mass_kg + self.tool_mass_kg
    }

    /// Production cost of the complete vehicle.
    pub fn pdm_usd(&self) -> f64 {
        self.manufacturing_usd + self.tool_cost_usd
    }

    pub fn tool_count(&self, tool: &str) -> u32 {
        self.tools.get(tool).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepotDesign {
    pub name: String,
    pub parking: String,
    pub dry_mass_kg: f64,
    pub capacity: CommodityVec,
    pub manufacturing_usd: f64,
    pub operating_usd_per_day: f64,
    pub stationkeeping_kg_per_day: f64,
    pub stationkeeping_propellant: Commodity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaunchDesign {
    pub period_days: u32,
    pub capacity_kg: f64,
    pub cost_usd_per_kg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prices {
    /// Purchase price per unit (kg for propellants, one spare for spares).
    pub unit_cost_usd: CommodityVec,
    pub spare_unit_mass_kg: f64,
}

impl Prices {
    pub fn unit_mass_kg(&self, c: Commodity) -> f64 {
        if c.is_integer() {
            self.spare_unit_mass_kg
        } else {
            1.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub servicers: Vec<ServicerDesign>,
    pub depots: Vec<DepotDesign>,
    pub launch: Option<LaunchDesign>,
    pub prices: Prices,
}

impl Fleet {
    pub fn servicer(&self, name: &str) -> Option<&ServicerDesign> {
        self.servicers.iter().find(|s| s.name == name)
    }

    pub fn depot(&self, name: &str) -> Option<&DepotDesign> {
        self.depots.iter().find(|d| d.name == name)
    }

    /// Daily operating cost of every servicer and depot.
    pub fn daily_operating_usd(&self) -> f64 {
        self.servicers.iter().map(|s| s.operating_usd_per_day).sum::<f64>()
            + self.depots.iter().map(|d| d.operating_usd_per_day).sum::<f64>()
    }
}
