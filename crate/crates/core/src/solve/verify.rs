//! Independent re-check of a candidate point against a model.

use super::FEASIBILITY_TOL;
use crate::milp::MilpModel;

/// Checks bounds, integrality and every row of `model` at `values` and returns the
/// objective value.
pub fn check_point(model: &MilpModel, values: &[f64]) -> Result<f64, String> {
    if values.len() != model.num_vars() {
        return Err(format!("{} values for {} columns", values.len(), model.num_vars()));
    }
    if let Some((x, v)) = values.iter().zip(model.vars()).find(|(x, _)| !x.is_finite()) {
        return Err(format!("{} = {x} is not finite", v.name));
    }
    let (viol, name) = model.max_bound_violation(values);
    if viol > FEASIBILITY_TOL {
        return Err(format!("bound of {} violated by {viol:e}", name.unwrap_or("?")));
    }
    let viol = model.max_integrality_violation(values);
    if viol > FEASIBILITY_TOL {
        return Err(format!("integrality violated by {viol:e}"));
    }
    let (viol, name) = model.max_row_violation(values);
    if viol > FEASIBILITY_TOL {
        return Err(format!("row {} violated by {viol:e}", name.unwrap_or("?")));
    }
    Ok(model.objective_value(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Sense, VarType};

    #[test]
    fn detects_each_kind_of_violation() {
        let mut m = MilpModel::new("t", true);
        let x = m.add_var("x", VarType::Integer, 0.0, 3.0, 2.0).unwrap();
        let y = m.add_var("y", VarType::Continuous, 0.0, 10.0, 1.0).unwrap();
        m.add_row("r", vec![(x, 1.0), (y, 1.0)], Sense::Le, 4.0).unwrap();
        assert_eq!(check_point(&m, &[1.0, 3.0]).unwrap(), 5.0);
        assert!(check_point(&m, &[1.5, 2.0]).unwrap_err().contains("integrality"));
        assert!(check_point(&m, &[4.0, 0.0]).unwrap_err().contains("bound"));
        assert!(check_point(&m, &[2.0, 3.0]).unwrap_err().contains("row r"));
        assert!(check_point(&m, &[2.0]).is_err());
    }
}
