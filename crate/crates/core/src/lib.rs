//! Planning of on-orbit servicing operations in geostationary orbit.

pub mod astro;
pub mod commodity;
pub mod demand;
pub mod fleet;
pub mod horizon;
pub mod milp;
pub mod model;
pub mod network;
pub mod scenario;
pub mod schedule;
pub mod solve;
pub mod state;
