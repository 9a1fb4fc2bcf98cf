//! Fixed-format MPS writer and reader.
//!
//! Columns and rows are written under generated 8-character names (`X0000001`,
//! `R0000001`) so arbitrary descriptive names survive the format; [`NameMap`] relates
//! the two.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::milp::{format_number, MilpError, MilpModel, Sense, VarId, VarType};

pub const OBJECTIVE_ROW: &str = "OBJ";
const MAX_INDEX: usize = 9_999_999;

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("model too large for 8-character names ({0} entries)")]
    TooLarge(usize),
    #[error("{what} of {name} cannot be written: {value}")]
    Unrepresentable { what: &'static str, name: String, value: f64 },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Model(#[from] MilpError),
}

pub fn column_name(idx: usize) -> String {
    format!("X{:07}", idx + 1)
}

pub fn row_name(idx: usize) -> String {
    format!("R{:07}", idx + 1)
}

/// Index encoded in a generated column name.
pub fn column_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('X')?;
    if digits.len() != 7 {
        return None;
    }
    digits.parse::<usize>().ok()?.checked_sub(1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NameMap {
    pub columns: BTreeMap<String, String>,
    pub rows: BTreeMap<String, String>,
}

impl NameMap {
    pub fn of(model: &MilpModel) -> Self {
        Self {
            columns: model.vars().iter().enumerate().map(|(i, v)| (column_name(i), v.name.clone())).collect(),
            rows: model.rows().iter().enumerate().map(|(i, r)| (row_name(i), r.name.clone())).collect(),
        }
    }
}

fn line(f1: &str, f2: &str, f3: &str, f4: &str, f5: &str, f6: &str) -> String {
    let s = format!(" {f1:<2} {f2:<8}  {f3:<8}  {f4:<12}   {f5:<8}  {f6:<12}");
    s.trim_end().to_string()
}

fn num(what: &'static str, name: &str, x: f64) -> Result<String, MpsError> {
    format_number(x).ok_or_else(|| MpsError::Unrepresentable { what, name: name.to_string(), value: x })
}

fn sanitize_name(name: &str) -> String {
    let s: String = name.chars().map(|c| if c.is_ascii_graphic() { c } else { '_' }).collect();
    if s.is_empty() {
        "MODEL".into()
    } else {
        s
    }
}

/// Serializes `model` deterministically.
pub fn write_mps(model: &MilpModel) -> Result<String, MpsError> {
    let n = model.num_vars().max(model.num_rows());
    if n > MAX_INDEX {
        return Err(MpsError::TooLarge(n));
    }
    let mut out = String::new();
    let _ = writeln!(out, "NAME          {}", sanitize_name(&model.name));
    out.push_str("OBJSENSE\n");
    out.push_str(if model.maximize { "    MAX\n" } else { "    MIN\n" });
    out.push_str("ROWS\n");
    out.push_str(&line("N", OBJECTIVE_ROW, "", "", "", ""));
    out.push('\n');
    for (i, r) in model.rows().iter().enumerate() {
        out.push_str(&line(r.sense.mps_code(), &row_name(i), "", "", "", ""));
        out.push('\n');
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); model.num_vars()];
    for (i, r) in model.rows().iter().enumerate() {
        for &(v, a) in &r.terms {
            by_col[v.0].push((i, a));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_int = false;
    for (j, var) in model.vars().iter().enumerate() {
        let integral = var.ty.is_integral();
        if integral != in_int {
            let marker = if integral { "'INTORG'" } else { "'INTEND'" };
            out.push_str(&line("", "MARKER", "'MARKER'", "", marker, ""));
            out.push('\n');
            in_int = integral;
        }
        let col = column_name(j);
        let mut entries: Vec<(String, String)> = Vec::new();
        if var.objective != 0.0 || by_col[j].is_empty() {
            entries.push((OBJECTIVE_ROW.to_string(), num("objective coefficient", &var.name, var.objective)?));
        }
        for &(i, a) in &by_col[j] {
            entries.push((row_name(i), num("coefficient", &var.name, a)?));
        }
        for pair in entries.chunks(2) {
            let (r1, v1) = &pair[0];
            let (r2, v2) = pair.get(1).map(|(a, b)| (a.as_str(), b.as_str())).unwrap_or(("", ""));
            out.push_str(&line("", &col, r1, v1, r2, v2));
            out.push('\n');
        }
    }
    if in_int {
        out.push_str(&line("", "MARKER", "'MARKER'", "", "'INTEND'", ""));
        out.push('\n');
    }

    out.push_str("RHS\n");
    for (i, r) in model.rows().iter().enumerate() {
        if r.rhs != 0.0 {
            out.push_str(&line("", "RHS", &row_name(i), &num("right-hand side", &r.name, r.rhs)?, "", ""));
            out.push('\n');
        }
    }

    out.push_str("BOUNDS\n");
    for (j, v) in model.vars().iter().enumerate() {
        let col = column_name(j);
        let mut bound = |code: &str, value: Option<f64>| -> Result<(), MpsError> {
            let val = match value {
                Some(x) => num("bound", &v.name, x)?,
                None => String::new(),
            };
            out.push_str(&line(code, "BND", &col, &val, "", ""));
            out.push('\n');
            Ok(())
        };
        if v.ty == VarType::Binary && v.lower == 0.0 && v.upper == 1.0 {
            bound("BV", None)?;
        } else if v.lower == v.upper {
            bound("FX", Some(v.lower))?;
        } else if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            bound("FR", None)?;
        } else {
            if v.lower == f64::NEG_INFINITY {
                bound("MI", None)?;
            } else if v.lower != 0.0 {
                bound("LO", Some(v.lower))?;
            }
            if v.upper.is_finite() {
                bound("UP", Some(v.upper))?;
            } else if v.ty.is_integral() {
                bound("PL", None)?;
            }
        }
    }
    out.push_str("ENDATA\n");
    Ok(out)
}

fn field(line: &str, start: usize, end: usize) -> &str {
    let end = end.min(line.len());
    if start >= end {
        return "";
    }
    line.get(start..end).unwrap_or("").trim()
}

fn parse_num(s: &str, line: usize) -> Result<f64, MpsError> {
    s.parse::<f64>().map_err(|_| MpsError::Parse { line, message: format!("bad number '{s}'") })
}

/// Reads a fixed-format MPS file as produced by [`write_mps`] (and compatible files
/// without RANGES).
pub fn parse_mps(text: &str) -> Result<MilpModel, MpsError> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        ObjSense,
        Rows,
        Columns,
        Rhs,
        Bounds,
        End,
    }
    let mut section = Section::None;
    let mut name = String::new();
    let mut maximize = false;
    let mut obj_row = String::new();
    let mut row_index: BTreeMap<String, usize> = BTreeMap::new();
    let mut rows: Vec<(String, Sense, Vec<(usize, f64)>, f64)> = Vec::new();
    let mut col_index: BTreeMap<String, usize> = BTreeMap::new();
    struct Col {
        name: String,
        integral: bool,
        objective: f64,
        lower: f64,
        upper: f64,
        binary: bool,
    }
    let mut cols: Vec<Col> = Vec::new();
    let mut integral = false;

    for (ln0, raw) in text.lines().enumerate() {
        let ln = ln0 + 1;
        let err = |m: String| MpsError::Parse { line: ln, message: m };
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        if !raw.starts_with(' ') {
            let mut parts = raw.split_whitespace();
            let head = parts.next().unwrap_or("");
            section = match head {
                "NAME" => {
                    name = raw.get(14..).map(str::trim).unwrap_or("").to_string();
                    Section::None
                }
                "OBJSENSE" => match parts.next() {
                    Some(s) => {
                        maximize = s.starts_with("MAX");
                        Section::None
                    }
                    None => Section::ObjSense,
                },
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::End,
                "RANGES" => return Err(err("RANGES section is not supported".into())),
                other => return Err(err(format!("unknown section {other}"))),
            };
            continue;
        }
        match section {
            Section::ObjSense => {
                maximize = raw.trim().starts_with("MAX");
            }
            Section::Rows => {
                let code = field(raw, 1, 3);
                let rname = field(raw, 4, 12).to_string();
                let sense = match code {
                    "N" => {
                        if obj_row.is_empty() {
                            obj_row = rname;
                        }
                        continue;
                    }
                    "L" => Sense::Le,
                    "G" => Sense::Ge,
                    "E" => Sense::Eq,
                    other => return Err(err(format!("unknown row type '{other}'"))),
                };
                if row_index.insert(rname.clone(), rows.len()).is_some() {
                    return Err(err(format!("duplicate row {rname}")));
                }
                rows.push((rname, sense, Vec::new(), 0.0));
            }
            Section::Columns => {
                let cname = field(raw, 4, 12).to_string();
                let f3 = field(raw, 14, 22);
                if f3 == "'MARKER'" {
                    match field(raw, 39, 47) {
                        "'INTORG'" => integral = true,
                        "'INTEND'" => integral = false,
                        other => return Err(err(format!("unknown marker {other}"))),
                    }
                    continue;
                }
                let j = match col_index.get(&cname) {
                    Some(&j) => j,
                    None => {
                        col_index.insert(cname.clone(), cols.len());
                        cols.push(Col {
                            name: cname.clone(),
                            integral,
                            objective: 0.0,
                            lower: 0.0,
                            upper: f64::INFINITY,
                            binary: false,
                        });
                        cols.len() - 1
                    }
                };
                for (rs, re, vs, ve) in [(14, 22, 24, 36), (39, 47, 49, 61)] {
                    let r = field(raw, rs, re);
                    if r.is_empty() {
                        continue;
                    }
                    let v = parse_num(field(raw, vs, ve), ln)?;
                    if r == obj_row {
                        cols[j].objective = v;
                    } else {
                        let &i = row_index.get(r).ok_or_else(|| err(format!("unknown row {r}")))?;
                        rows[i].2.push((j, v));
                    }
                }
            }
            Section::Rhs => {
                for (rs, re, vs, ve) in [(14, 22, 24, 36), (39, 47, 49, 61)] {
                    let r = field(raw, rs, re);
                    if r.is_empty() {
                        continue;
                    }
                    let v = parse_num(field(raw, vs, ve), ln)?;
                    if r == obj_row {
                        continue;
                    }
                    let &i = row_index.get(r).ok_or_else(|| err(format!("unknown row {r}")))?;
                    rows[i].3 = v;
                }
            }
            Section::Bounds => {
                let code = field(raw, 1, 3);
                let cname = field(raw, 14, 22);
                let &j = col_index.get(cname).ok_or_else(|| err(format!("unknown column {cname}")))?;
                let value = || parse_num(field(raw, 24, 36), ln);
                let c = &mut cols[j];
                match code {
                    "UP" => c.upper = value()?,
                    "LO" => c.lower = value()?,
                    "FX" => {
                        let v = value()?;
                        c.lower = v;
                        c.upper = v;
                    }
                    "FR" => {
                        c.lower = f64::NEG_INFINITY;
                        c.upper = f64::INFINITY;
                    }
                    "MI" => c.lower = f64::NEG_INFINITY,
                    "PL" => c.upper = f64::INFINITY,
                    "BV" => {
                        c.lower = 0.0;
                        c.upper = 1.0;
                        c.binary = true;
                    }
                    other => return Err(err(format!("unsupported bound type {other}"))),
                }
            }
            Section::None | Section::End => {
                return Err(err("data outside of a section".into()));
            }
        }
    }
    if section != Section::End {
        return Err(MpsError::Parse { line: text.lines().count(), message: "missing ENDATA".into() });
    }

    let mut model = MilpModel::new(name, maximize);
    for c in &cols {
        let ty = if c.binary {
            VarType::Binary
        } else if c.integral {
            VarType::Integer
        } else {
            VarType::Continuous
        };
        model.add_var(c.name.clone(), ty, c.lower, c.upper, c.objective)?;
    }
    for (rname, sense, terms, rhs) in rows {
        model.add_row(rname, terms.into_iter().map(|(j, a)| (VarId(j), a)), sense, rhs)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MilpModel {
        let mut m = MilpModel::new("TINY", true);
        let x = m.add_var("x", VarType::Integer, 0.0, 10.0, 1.0).unwrap();
        let y = m.add_var("y", VarType::Continuous, 0.0, 1.0, 2.5).unwrap();
        m.add_row("cap", [(x, 1.0), (y, 1.0)], Sense::Le, 3.5).unwrap();
        m
    }

    #[test]
    fn empty_model_golden() {
        let text = write_mps(&MilpModel::new("EMPTY", false)).unwrap();
        assert_eq!(text, "NAME          EMPTY\nOBJSENSE\n    MIN\nROWS\n N  OBJ\nCOLUMNS\nRHS\nBOUNDS\nENDATA\n");
    }

    #[test]
    fn one_variable_golden() {
        let mut m = MilpModel::new("ONE", true);
        let x = m.add_var("x", VarType::Continuous, 0.0, 4.0, 3.0).unwrap();
        m.add_row("r", [(x, 2.0)], Sense::Le, 5.0).unwrap();
        let expected = "\
NAME          ONE
OBJSENSE
    MAX
ROWS
 N  OBJ
 L  R0000001
COLUMNS
    X0000001  OBJ       3              R0000001  2
RHS
    RHS       R0000001  5
BOUNDS
 UP BND       X0000001  4
ENDATA
";
        assert_eq!(write_mps(&m).unwrap(), expected);
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let first = write_mps(&tiny()).unwrap();
        let parsed = parse_mps(&first).unwrap();
        assert_eq!(parsed.num_vars(), 2);
        assert_eq!(parsed.vars()[0].ty, VarType::Integer);
        assert_eq!(parsed.rows()[0].rhs, 3.5);
        assert_eq!(write_mps(&parsed).unwrap(), first);
    }

    #[test]
    fn bound_kinds_survive() {
        let mut m = MilpModel::new("B", false);
        m.add_var("b", VarType::Binary, 0.0, 1.0, 0.0).unwrap();
        m.add_var("f", VarType::Binary, 1.0, 1.0, 0.0).unwrap();
        m.add_var("free", VarType::Continuous, f64::NEG_INFINITY, f64::INFINITY, -1.0).unwrap();
        m.add_var("lo", VarType::Continuous, -2.0, f64::INFINITY, 0.0).unwrap();
        m.add_var("pl", VarType::Integer, 0.0, f64::INFINITY, 0.0).unwrap();
        let text = write_mps(&m).unwrap();
        assert!(text.contains(" BV BND       X0000001"));
        assert!(text.contains(" FX BND       X0000002  1"));
        assert!(text.contains(" FR BND       X0000003"));
        assert!(text.contains(" LO BND       X0000004  -2"));
        assert!(text.contains(" PL BND       X0000005"));
        let back = parse_mps(&text).unwrap();
        assert_eq!(back.vars()[0].ty, VarType::Binary);
        assert_eq!(back.vars()[2].lower, f64::NEG_INFINITY);
        assert_eq!(write_mps(&back).unwrap(), text);
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = parse_mps("NAME x\nROWS\n Q  R1\nENDATA\n").unwrap_err();
        assert!(matches!(err, MpsError::Parse { line: 3, .. }));
        assert!(parse_mps("NAME x\nROWS\n").is_err());
    }

    #[test]
    fn column_names_decode() {
        assert_eq!(column_name(0), "X0000001");
        assert_eq!(column_index("X0000001"), Some(0));
        assert_eq!(column_index("X00001"), None);
        assert_eq!(column_index("R0000001"), None);
    }
}
