//! Solution-file parsers and post-processing of raw solver values.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::mps::column_index;
use super::{Solution, SolveStatus, FEASIBILITY_TOL};
use crate::milp::MilpModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionFormat {
    /// `# status`, `# objective`, `# gap` headers followed by `NAME VALUE` lines.
    #[default]
    Generic,
    /// HiGHS `writeSolution` raw style.
    Highs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSolution {
    pub status: SolveStatus,
    pub objective: Option<f64>,
    pub gap: Option<f64>,
    pub values: BTreeMap<String, f64>,
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    match s.trim() {
        "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
        "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
        t => t.parse::<f64>().map_err(|_| format!("bad {what} '{t}'")),
    }
}

pub fn parse(format: SolutionFormat, text: &str) -> Result<RawSolution, String> {
    match format {
        SolutionFormat::Generic => parse_generic(text),
        SolutionFormat::Highs => parse_highs(text),
    }
}

pub fn parse_generic(text: &str) -> Result<RawSolution, String> {
    let mut status = None;
    let mut objective = None;
    let mut gap = None;
    let mut values = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            let mut parts = rest.split_whitespace();
            match parts.next() {
                Some("status") => {
                    let word = parts.next().ok_or("status line without value")?;
                    let msg: Vec<&str> = parts.collect();
                    status = Some(match word {
                        "optimal" => SolveStatus::Optimal,
                        "feasible" => SolveStatus::FeasibleAtLimit,
                        "infeasible" => SolveStatus::Infeasible,
                        "unbounded" => SolveStatus::Unbounded,
                        "error" => SolveStatus::Error(msg.join(" ")),
                        other => return Err(format!("unknown status '{other}'")),
                    });
                }
                Some("objective") => objective = Some(number(parts.next().unwrap_or(""), "objective")?),
                Some("gap") => gap = Some(number(parts.next().unwrap_or(""), "gap")?),
                _ => {}
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(v), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(format!("line {}: expected 'NAME VALUE'", i + 1));
        };
        values.insert(name.to_string(), number(v, "value")?);
    }
    let status = status.ok_or("missing '# status' line")?;
    Ok(RawSolution { status, objective, gap, values })
}

pub fn parse_highs(text: &str) -> Result<RawSolution, String> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let pos = |needle: &str| lines.iter().position(|l| *l == needle);
    let ms = pos("Model status").ok_or("missing 'Model status'")?;
    let model_status = *lines.get(ms + 1).ok_or("truncated model status")?;
    let ps = pos("# Primal solution values").ok_or("missing primal solution block")?;
    let primal = *lines.get(ps + 1).ok_or("truncated primal block")?;
    let mut objective = None;
    let mut values = BTreeMap::new();
    if primal == "Feasible" || primal == "Infeasible" {
        let obj_line = lines.get(ps + 2).ok_or("missing objective line")?;
        let o = obj_line.strip_prefix("Objective").ok_or("missing objective line")?;
        objective = Some(number(o, "objective")?);
        let cols = lines.get(ps + 3).and_then(|l| l.strip_prefix("# Columns")).ok_or("missing column count")?;
        let n: usize = cols.trim().parse().map_err(|_| "bad column count")?;
        for k in 0..n {
            let l = lines.get(ps + 4 + k).ok_or("truncated column block")?;
            let mut parts = l.split_whitespace();
            let (Some(name), Some(v)) = (parts.next(), parts.next()) else {
                return Err(format!("bad column line '{l}'"));
            };
            values.insert(name.to_string(), number(v, "value")?);
        }
    }
    let has_primal = primal == "Feasible";
    let status = match model_status {
        "Optimal" => SolveStatus::Optimal,
        "Infeasible" => SolveStatus::Infeasible,
        "Unbounded" => SolveStatus::Unbounded,
        "Time limit reached" | "Iteration limit reached" | "Solution limit reached" | "Interrupted by user"
            if has_primal =>
        {
            SolveStatus::FeasibleAtLimit
        }
        other => SolveStatus::Error(format!("solver reported '{other}'")),
    };
    Ok(RawSolution { status, objective, gap: None, values })
}

/// Maps named values onto the model, repairs integrality within tolerance, and
/// demotes anything that fails the hard re-check to an error.
pub fn finalize(model: &MilpModel, raw: RawSolution, wall_time_s: f64) -> Result<Solution, String> {
    if !raw.status.has_solution() {
        return Ok(Solution::without_values(raw.status, wall_time_s));
    }
    let mut values = vec![0.0; model.num_vars()];
    for (name, v) in &raw.values {
        let j = column_index(name)
            .filter(|&j| j < values.len())
            .or_else(|| model.vars().iter().position(|var| &var.name == name))
            .ok_or_else(|| format!("solution names unknown column '{name}'"))?;
        values[j] = *v;
    }
    let demote = |msg: String| {
        Ok(Solution { status: SolveStatus::Error(msg), objective: raw.objective, values: Vec::new(), gap: raw.gap, wall_time_s })
    };
    for (x, var) in values.iter_mut().zip(model.vars()) {
        if !x.is_finite() {
            return demote(format!("non-finite value for {}", var.name));
        }
        if var.ty.is_integral() {
            let r = x.round();
            if (*x - r).abs() > FEASIBILITY_TOL {
                return demote(format!("{} = {} is not integral", var.name, x));
            }
            *x = r;
        }
        if *x < var.lower - FEASIBILITY_TOL || *x > var.upper + FEASIBILITY_TOL {
            return demote(format!("{} = {} outside [{}, {}]", var.name, x, var.lower, var.upper));
        }
        *x = x.clamp(var.lower, var.upper);
        if *x == 0.0 {
            *x = 0.0;
        }
    }
    let (viol, row) = model.max_row_violation(&values);
    if viol > FEASIBILITY_TOL {
        return demote(format!("row {} violated by {viol:e}", row.unwrap_or("?")));
    }
    let computed = model.objective_value(&values);
    if let Some(reported) = raw.objective {
        if (computed - reported).abs() > 1e-6 * reported.abs().max(1.0) {
            return demote(format!("reported objective {reported} differs from re-evaluated {computed}"));
        }
    }
    let gap = match (&raw.status, raw.gap) {
        (_, Some(g)) => Some(g),
        (SolveStatus::Optimal, None) => Some(0.0),
        _ => None,
    };
    Ok(Solution { status: raw.status, objective: Some(computed), values, gap, wall_time_s })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, VarType};

    fn model() -> MilpModel {
        let mut m = MilpModel::new("t", true);
        let x = m.add_var("x", VarType::Integer, 0.0, 10.0, 1.0).unwrap();
        let y = m.add_var("y", VarType::Continuous, 0.0, 1.0, 2.5).unwrap();
        m.add_row("cap", [(x, 1.0), (y, 1.0)], Sense::Le, 3.5).unwrap();
        m
    }

    #[test]
    fn generic_round_trip() {
        let raw = parse_generic("# status optimal\n# objective 4.5\n# gap 0\nX0000001 2.0000000001\nX0000002 1\n").unwrap();
        let sol = finalize(&model(), raw, 0.1).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_eq!(sol.values, vec![2.0, 1.0]);
        assert_eq!(sol.objective, Some(4.5));
    }

    #[test]
    fn generic_rejects_garbage() {
        assert!(parse_generic("hello world again\n").is_err());
        assert!(parse_generic("X0000001 1\n").is_err());
        assert!(parse_generic("# status maybe\n").is_err());
    }

    #[test]
    fn fractional_integer_demoted() {
        let raw = parse_generic("# status optimal\n# objective 3.75\nX0000001 1.5\nX0000002 0.9\n").unwrap();
        let sol = finalize(&model(), raw, 0.0).unwrap();
        assert!(matches!(sol.status, SolveStatus::Error(_)));
    }

    #[test]
    fn objective_mismatch_demoted() {
        let raw = parse_generic("# status optimal\n# objective 99\nX0000001 2\nX0000002 1\n").unwrap();
        assert!(matches!(finalize(&model(), raw, 0.0).unwrap().status, SolveStatus::Error(_)));
    }

    #[test]
    fn highs_native_format() {
        let text = "Model status\nOptimal\n\n# Primal solution values\nFeasible\nObjective 4.5\n# Columns 2\nX0000001 2\nX0000002 1\n# Rows 1\nR0000001 3\n\n# Dual solution values\nNone\n";
        let raw = parse_highs(text).unwrap();
        assert_eq!(raw.objective, Some(4.5));
        let sol = finalize(&model(), raw, 0.0).unwrap();
        assert_eq!(sol.values, vec![2.0, 1.0]);
        let inf = parse_highs("Model status\nInfeasible\n\n# Primal solution values\nNone\n").unwrap();
        assert_eq!(inf.status, SolveStatus::Infeasible);
    }
}
