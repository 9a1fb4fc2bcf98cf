//! Solver boundary: MPS serialization, external solver invocation, solution parsing,
//! and an exhaustive reference solver for tiny instances.

pub mod exhaustive;
pub mod external;
pub mod mps;
pub mod solution;
pub mod verify;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use exhaustive::{solve_exhaustive, ExhaustiveLimits};
pub use external::{solve_external, SolverConfig};

pub const DEFAULT_GAP: f64 = 0.01;
pub const DEFAULT_TIME_LIMIT_S: f64 = 7200.0;
/// Tolerance for integrality repair and residual checks.
pub const FEASIBILITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveRequest {
    /// Relative MIP gap at which the solver may stop.
    pub gap: f64,
    pub time_limit_s: f64,
    pub seed: u64,
}

impl Default for SolveRequest {
    fn default() -> Self {
        Self { gap: DEFAULT_GAP, time_limit_s: DEFAULT_TIME_LIMIT_S, seed: 0 }
    }
}

impl SolveRequest {
    pub fn validate(&self) -> Result<(), SolveError> {
        if !(0.0..1.0).contains(&self.gap) {
            return Err(SolveError::InvalidRequest(format!("gap {} outside [0, 1)", self.gap)));
        }
        if !(self.time_limit_s > 0.0) {
            return Err(SolveError::InvalidRequest(format!("time limit {} must be positive", self.time_limit_s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    FeasibleAtLimit,
    Infeasible,
    Unbounded,
    Error(String),
}

impl SolveStatus {
    pub fn has_solution(&self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleAtLimit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    /// One value per model variable, empty without a solution.
    pub values: Vec<f64>,
    pub gap: Option<f64>,
    pub wall_time_s: f64,
}

impl Solution {
    pub fn without_values(status: SolveStatus, wall_time_s: f64) -> Self {
        Self { status, objective: None, values: Vec::new(), gap: None, wall_time_s }
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("solver protocol error: {message}\n--- captured output ---\n{captured}")]
    ProtocolError { message: String, captured: String },
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error("invalid solve request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Mps(#[from] mps::MpsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
