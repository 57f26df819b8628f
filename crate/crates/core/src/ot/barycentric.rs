use ndarray::Array2;

use super::{Coupling, OtError};
use crate::gmm::argmax_first;
use crate::substructure::CostMatrix;
use crate::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricMap<F> {
    /// Row `i` is the plan-weighted average of the target representation.
    pub mapped: Array2<F>,
    /// Rows without mass that were copied from their cheapest target instead.
    pub fallback_rows: Vec<usize>,
}

/// `diag(π 1)⁻¹ π P_t`.
///
/// A source row with no mass is mapped onto the target row with the lowest
/// cost when `fallback_cost` is given, and is an error otherwise.
pub fn barycentric_map<F: Scalar>(
    plan: &Coupling<F>,
    target_repr: &Array2<F>,
    fallback_cost: Option<&CostMatrix<F>>,
) -> Result<BarycentricMap<F>, OtError> {
    let (m, n) = plan.plan.dim();
    if target_repr.nrows() != n {
        return Err(OtError::DimensionMismatch(format!(
            "plan has {n} columns, target representation has {} rows",
            target_repr.nrows()
        )));
    }
    if let Some(c) = fallback_cost {
        if c.shape() != (m, n) {
            return Err(OtError::DimensionMismatch("fallback cost shape differs from plan".into()));
        }
    }
    let mut mapped = plan.plan.dot(target_repr);
    let mut fallback_rows = Vec::new();
    for i in 0..m {
        let mass = plan.plan.row(i).sum();
        if mass > F::zero() {
            mapped.row_mut(i).mapv_inplace(|v| v / mass);
        } else {
            let cost = fallback_cost.ok_or(OtError::ZeroMassRow(i))?;
            let j = argmax_first(cost.values().row(i).iter().map(|&v| -v));
            mapped.row_mut(i).assign(&target_repr.row(j));
            fallback_rows.push(i);
        }
    }
    Ok(BarycentricMap { mapped, fallback_rows })
}
