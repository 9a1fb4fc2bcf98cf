//! File-based invocation of an external MILP solver.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::mps::write_mps;
use super::solution::{finalize, parse, SolutionFormat};
use super::{Solution, SolveError, SolveRequest};
use crate::milp::MilpModel;

/// Bundled adapter driving HiGHS through Python (highspy or scipy).
pub const HIGHS_ADAPTER: &str = include_str!("../../solvers/highs_adapter.py");

pub const DEFAULT_COMMAND: &str =
    "python3 {adapter} {model} {solution} --gap {gap} --time-limit {time_limit} --seed {seed}";

/// Environment variable overriding the default command template.
pub const COMMAND_ENV: &str = "OOSPLAN_SOLVER_CMD";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Shell command template. Placeholders: `{model}`, `{solution}`, `{gap}`,
    /// `{time_limit}`, `{seed}`, `{adapter}` (path of the bundled adapter script).
    pub command: String,
    pub format: SolutionFormat,
    /// Parent directory for per-solve working directories (system temp if unset).
    pub work_dir: Option<PathBuf>,
    /// Keep the working directory after solving, for debugging.
    pub keep_files: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            command: std::env::var(COMMAND_ENV).unwrap_or_else(|_| DEFAULT_COMMAND.to_string()),
            format: SolutionFormat::Generic,
            work_dir: None,
            keep_files: false,
        }
    }
}

impl SolverConfig {
    pub fn with_command(command: impl Into<String>) -> Self {
        Self { command: command.into(), ..Self::default() }
    }
}

fn quote(p: &Path) -> String {
    format!("'{}'", p.display().to_string().replace('\'', "'\\''"))
}

/// Writes `model` to a private directory, runs the configured solver on it and
/// parses the result. The returned solution is integrality-repaired and checked
/// against bounds, rows and the reported objective.
pub fn solve_external(model: &MilpModel, req: &SolveRequest, cfg: &SolverConfig) -> Result<Solution, SolveError> {
    req.validate()?;
    let mut builder = tempfile::Builder::new();
    builder.prefix("oos-solve-");
    let dir = match &cfg.work_dir {
        Some(parent) => {
            fs::create_dir_all(parent)?;
            builder.tempdir_in(parent)?
        }
        None => builder.tempdir()?,
    };
    let model_path = dir.path().join("model.mps");
    let solution_path = dir.path().join("model.sol");
    fs::write(&model_path, write_mps(model)?)?;
    let mut command = cfg
        .command
        .replace("{model}", &quote(&model_path))
        .replace("{solution}", &quote(&solution_path))
        .replace("{gap}", &format!("{}", req.gap))
        .replace("{time_limit}", &format!("{}", req.time_limit_s))
        .replace("{seed}", &req.seed.to_string());
    if command.contains("{adapter}") {
        let adapter = dir.path().join("highs_adapter.py");
        fs::write(&adapter, HIGHS_ADAPTER)?;
        command = command.replace("{adapter}", &quote(&adapter));
    }
    log::debug!("solving {} with: {command}", model);
    let started = Instant::now();
    let output = Command::new("sh").arg("-c").arg(&command).output();
    let wall = started.elapsed().as_secs_f64();
    let output = output.map_err(|e| SolveError::BackendUnavailable(format!("cannot spawn shell: {e}")))?;
    let captured = format!(
        "{}{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
    if output.status.code() == Some(127) || output.status.code() == Some(126) {
        return Err(SolveError::BackendUnavailable(format!("`{}`: {}", cfg.command, captured.trim())));
    }
    let text = match fs::read_to_string(&solution_path) {
        Ok(t) => t,
        Err(e) => {
            return Err(SolveError::ProtocolError {
                message: format!("no solution file ({e}); exit status {}", output.status),
                captured,
            })
        }
    };
    let raw = parse(cfg.format, &text).map_err(|message| SolveError::ProtocolError {
        message,
        captured: format!("{captured}\n--- solution file ---\n{text}"),
    })?;
    let solution = finalize(model, raw, wall).map_err(|message| SolveError::ProtocolError {
        message,
        captured: captured.clone(),
    })?;
    if cfg.keep_files {
        let kept = dir.keep();
        log::info!("solver files kept in {}", kept.display());
    }
    Ok(solution)
}
