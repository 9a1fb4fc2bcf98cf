//! Solver-independent sparse MILP container.
//!
//! Every coefficient, bound and right-hand side is stored in the exact form that the
//! MPS writer emits (at most 12 characters), so the in-memory model and the file
//! always describe the same problem.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest magnitude accepted anywhere in a model; beyond it MPS readers treat the
/// number as infinite.
pub const MAX_MAGNITUDE: f64 = 1e30;

/// Width of an MPS number field.
pub const NUMBER_WIDTH: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MilpError {
    #[error("{what} of {name}: {value} is not representable")]
    Unrepresentable { what: &'static str, name: String, value: f64 },
    #[error("row {row} references unknown variable index {index}")]
    UnknownVariable { row: String, index: usize },
    #[error("bounds of {name} are inconsistent: [{lower}, {upper}]")]
    InconsistentBounds { name: String, lower: f64, upper: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarType {
    Continuous,
    Integer,
    Binary,
}

impl VarType {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarType::Continuous)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Ge,
    Eq,
}

impl Sense {
    pub fn mps_code(self) -> &'static str {
        match self {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub ty: VarType,
    pub lower: f64,
    pub upper: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violate the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MilpModel {
    pub name: String,
    pub maximize: bool,
    vars: Vec<Variable>,
    rows: Vec<Constraint>,
}

fn fits(s: &str) -> bool {
    s.len() <= NUMBER_WIDTH
}

/// Formats `x` into at most 12 characters, choosing the candidate closest to `x`
/// (shortest on ties). Exactly representable short values are printed unchanged.
pub fn format_number(x: f64) -> Option<String> {
    if !x.is_finite() || x.abs() > MAX_MAGNITUDE {
        return None;
    }
    let x = if x == 0.0 { 0.0 } else { x };
    let plain = format!("{x}");
    if fits(&plain) {
        return Some(plain);
    }
    let exp = format!("{x:e}");
    if fits(&exp) {
        return Some(exp);
    }
    let mut best: Option<(f64, usize, String)> = None;
    let mut consider = |s: String| {
        if !fits(&s) {
            return;
        }
        let Ok(v) = s.parse::<f64>() else { return };
        let err = (v - x).abs();
        let better = match &best {
            None => true,
            Some((e, len, _)) => err < *e || (err == *e && s.len() < *len),
        };
        if better {
            best = Some((err, s.len(), s));
        }
    };
    for p in 0..=15usize {
        consider(format!("{x:.p$e}"));
        if x.abs() < 1e11 {
            consider(format!("{x:.p$}"));
        }
    }
    best.map(|(_, _, s)| s)
}

/// The value `x` takes once written to and read back from an MPS file.
pub fn canonical(x: f64) -> Option<f64> {
    if x.is_infinite() {
        return Some(x);
    }
    format_number(x).map(|s| s.parse().expect("formatted number parses"))
}

impl MilpModel {
    pub fn new(name: impl Into<String>, maximize: bool) -> Self {
        Self { name: name.into(), maximize, vars: Vec::new(), rows: Vec::new() }
    }

    pub fn vars(&self) -> &[Variable] {
        &self.vars
    }

    pub fn rows(&self) -> &[Constraint] {
        &self.rows
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.vars[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_integral(&self) -> usize {
        self.vars.iter().filter(|v| v.ty.is_integral()).count()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.terms.len()).sum()
    }

    fn bound(name: &str, what: &'static str, x: f64) -> Result<f64, MilpError> {
        if x.is_nan() {
            return Err(MilpError::Unrepresentable { what, name: name.to_string(), value: x });
        }
        canonical(x).ok_or(MilpError::Unrepresentable { what, name: name.to_string(), value: x })
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        ty: VarType,
        lower: f64,
        upper: f64,
        objective: f64,
    ) -> Result<VarId, MilpError> {
        let name = name.into();
        let (lower, upper) = match ty {
            VarType::Binary => (lower.max(0.0), upper.min(1.0)),
            _ => (lower, upper),
        };
        let lower = Self::bound(&name, "lower bound", lower)?;
        let upper = Self::bound(&name, "upper bound", upper)?;
        if lower > upper || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(MilpError::InconsistentBounds { name, lower, upper });
        }
        let objective = if objective.is_finite() {
            Self::bound(&name, "objective coefficient", objective)?
        } else {
            return Err(MilpError::Unrepresentable { what: "objective coefficient", name, value: objective });
        };
        self.vars.push(Variable { name, ty, lower, upper, objective });
        Ok(VarId(self.vars.len() - 1))
    }

    /// Adds a row; duplicate variables are merged and zero coefficients dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        sense: Sense,
        rhs: f64,
    ) -> Result<usize, MilpError> {
        let name = name.into();
        let mut merged: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in terms {
            if v.0 >= self.vars.len() {
                return Err(MilpError::UnknownVariable { row: name, index: v.0 });
            }
            match merged.iter_mut().find(|(w, _)| *w == v) {
                Some((_, b)) => *b += a,
                None => merged.push((v, a)),
            }
        }
        let mut out = Vec::with_capacity(merged.len());
        for (v, a) in merged {
            if !a.is_finite() {
                return Err(MilpError::Unrepresentable { what: "coefficient", name, value: a });
            }
            let a = canonical(a).ok_or(MilpError::Unrepresentable { what: "coefficient", name: name.clone(), value: a })?;
            if a != 0.0 {
                out.push((v, a));
            }
        }
        if !rhs.is_finite() {
            return Err(MilpError::Unrepresentable { what: "right-hand side", name, value: rhs });
        }
        let rhs = canonical(rhs).ok_or(MilpError::Unrepresentable { what: "right-hand side", name: name.clone(), value: rhs })?;
        self.rows.push(Constraint { name, terms: out, sense, rhs });
        Ok(self.rows.len() - 1)
    }

    pub fn set_bounds(&mut self, id: VarId, lower: f64, upper: f64) -> Result<(), MilpError> {
        let name = self.vars[id.0].name.clone();
        let lower = Self::bound(&name, "lower bound", lower)?;
        let upper = Self::bound(&name, "upper bound", upper)?;
        if lower > upper {
            return Err(MilpError::InconsistentBounds { name, lower, upper });
        }
        let v = &mut self.vars[id.0];
        v.lower = lower;
        v.upper = upper;
        Ok(())
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.vars.iter().zip(values).map(|(v, x)| v.objective * x).sum()
    }

    /// Largest row violation together with the offending row name.
    pub fn max_row_violation(&self, values: &[f64]) -> (f64, Option<&str>) {
        let mut worst = (0.0, None);
        for r in &self.rows {
            let v = r.violation(values);
            if v > worst.0 {
                worst = (v, Some(r.name.as_str()));
            }
        }
        worst
    }

    /// Largest bound violation together with the offending variable name.
    pub fn max_bound_violation(&self, values: &[f64]) -> (f64, Option<&str>) {
        let mut worst = (0.0, None);
        for (v, &x) in self.vars.iter().zip(values) {
            let viol = (v.lower - x).max(x - v.upper).max(0.0);
            if viol > worst.0 {
                worst = (viol, Some(v.name.as_str()));
            }
        }
        worst
    }

    pub fn max_integrality_violation(&self, values: &[f64]) -> f64 {
        self.vars
            .iter()
            .zip(values)
            .filter(|(v, _)| v.ty.is_integral())
            .map(|(_, x)| (x - x.round()).abs())
            .fold(0.0, f64::max)
    }
}

impl fmt::Display for MilpModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} variables ({} integral), {} rows, {} nonzeros",
            self.name,
            self.num_vars(),
            self.num_integral(),
            self.num_rows(),
            self.num_nonzeros()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn short_numbers_are_exact() {
        for x in [0.0, 1.0, -2.5, 8300.0, 13000.0, 1e-7, 0.14, 15000000.0] {
            let s = format_number(x).unwrap();
            assert!(s.len() <= 12, "{s}");
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_number(-0.0).unwrap(), "0");
    }

    #[test]
    fn long_numbers_are_rounded_to_width() {
        let phi = 0.031754395674040;
        let s = format_number(phi).unwrap();
        assert!(s.len() <= 12);
        assert!((s.parse::<f64>().unwrap() - phi).abs() < 1e-10);
        assert!(format_number(f64::NAN).is_none());
        assert!(format_number(2e30).is_none());
        assert!(format_number(f64::INFINITY).is_none());
    }

    #[test]
    fn rows_merge_and_drop_zeros() {
        let mut m = MilpModel::new("t", true);
        let x = m.add_var("x", VarType::Continuous, 0.0, 10.0, 1.0).unwrap();
        let y = m.add_var("y", VarType::Binary, 0.0, 5.0, 0.0).unwrap();
        assert_eq!(m.var(y).upper, 1.0);
        m.add_row("r", [(x, 1.0), (y, 2.0), (x, 1.0), (y, -2.0)], Sense::Le, 4.0).unwrap();
        assert_eq!(m.rows()[0].terms, vec![(x, 2.0)]);
        assert!(m.add_row("bad", [(VarId(7), 1.0)], Sense::Le, 0.0).is_err());
        assert!(m.add_var("z", VarType::Continuous, 2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn violations() {
        let mut m = MilpModel::new("t", false);
        let x = m.add_var("x", VarType::Integer, 0.0, 3.0, 2.0).unwrap();
        m.add_row("le", [(x, 1.0)], Sense::Le, 1.0).unwrap();
        m.add_row("eq", [(x, 1.0)], Sense::Eq, 2.0).unwrap();
        assert_eq!(m.max_row_violation(&[2.0]), (1.0, Some("le")));
        assert_eq!(m.max_bound_violation(&[4.0]).0, 1.0);
        assert!((m.max_integrality_violation(&[1.25]) - 0.25).abs() < 1e-15);
        assert_eq!(m.objective_value(&[1.5]), 3.0);
    }

    proptest! {
        #[test]
        fn canonical_is_idempotent(x in -1e29f64..1e29) {
            let c = canonical(x).unwrap();
            prop_assert_eq!(canonical(c).unwrap(), c);
            prop_assert!(format_number(x).unwrap().len() <= NUMBER_WIDTH);
            let rel = if x == 0.0 { 0.0 } else { ((c - x) / x).abs() };
            prop_assert!(rel < 1e-5, "{} -> {}", x, c);
        }

        #[test]
        fn canonical_small_magnitudes(m in -9.99f64..9.99, e in -30i32..30) {
            let x = m * 10f64.powi(e);
            let c = canonical(x).unwrap();
            prop_assert_eq!(canonical(c).unwrap(), c);
        }
    }
}
