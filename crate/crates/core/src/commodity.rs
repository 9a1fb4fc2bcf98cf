use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Sub};

use serde::{Deserialize, Serialize};

/// Consumables moved through the network. Propellants are continuous (kg), spares are
/// integer units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Commodity {
    Bipropellant,
    Monopropellant,
    Spares,
}

impl Commodity {
    pub const ALL: [Commodity; 3] = [Commodity::Bipropellant, Commodity::Monopropellant, Commodity::Spares];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_integer(self) -> bool {
        matches!(self, Commodity::Spares)
    }

    pub fn short(self) -> &'static str {
        match self {
            Commodity::Bipropellant => "biprop",
            Commodity::Monopropellant => "monoprop",
            Commodity::Spares => "spares",
        }
    }
}

impl fmt::Display for Commodity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// Quantity per commodity (kg for propellants, units for spares).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CommodityVec(pub [f64; 3]);

impl CommodityVec {
    pub const ZERO: CommodityVec = CommodityVec([0.0; 3]);

    pub fn of(c: Commodity, q: f64) -> Self {
        let mut v = Self::ZERO;
        v[c] = q;
        v
    }

    pub fn iter(&self) -> impl Iterator<Item = (Commodity, f64)> + '_ {
        Commodity::ALL.iter().map(move |&c| (c, self[c]))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&q| q == 0.0)
    }

    pub fn min_component(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Mass in kg given the unit mass of a spare.
    pub fn mass_kg(&self, spare_unit_mass_kg: f64) -> f64 {
        self[Commodity::Bipropellant] + self[Commodity::Monopropellant] + self[Commodity::Spares] * spare_unit_mass_kg
    }
}

impl Index<Commodity> for CommodityVec {
    type Output = f64;
    fn index(&self, c: Commodity) -> &f64 {
        &self.0[c.index()]
    }
}

impl IndexMut<Commodity> for CommodityVec {
    fn index_mut(&mut self, c: Commodity) -> &mut f64 {
        &mut self.0[c.index()]
    }
}

impl Add for CommodityVec {
    type Output = CommodityVec;
    fn add(mut self, rhs: CommodityVec) -> CommodityVec {
        self += rhs;
        self
    }
}

impl AddAssign for CommodityVec {
    fn add_assign(&mut self, rhs: CommodityVec) {
        for i in 0..3 {
            self.0[i] += rhs.0[i];
        }
    }
}

impl Sub for CommodityVec {
    type Output = CommodityVec;
    fn sub(mut self, rhs: CommodityVec) -> CommodityVec {
        for i in 0..3 {
            self.0[i] -= rhs.0[i];
        }
        self
    }
}
