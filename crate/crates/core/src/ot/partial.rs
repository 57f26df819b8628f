use ndarray::{Array1, Array2};

use super::{check_probability, entropic_objective, Coupling, OtError};
use crate::substructure::CostMatrix;
use crate::{log_sum_exp, Scalar};

/// Source weights from the column-constrained entropic plan.
///
/// With only `πᵀ1 = w_t` imposed, the optimal plan is the kernel
/// `π₀ = exp(−C/λ₁ − 1)` with each column rescaled to carry `w_t[j]`:
/// `π* = π₀ diag(w_t ⊘ π₀ᵀ1)`, and `w_s = π* 1`. Every column is normalized
/// in the log domain, so the constant `−1` cancels and no column underflows
/// unless its costs are non-finite. Single pass, no iteration.
pub fn partial_ot_source_weights<F: Scalar>(
    cost: &CostMatrix<F>,
    w_t: &Array1<F>,
    lambda1: F,
) -> Result<(Array1<F>, Coupling<F>), OtError> {
    let c = cost.values();
    let (m, n) = c.dim();
    if w_t.len() != n {
        return Err(OtError::DimensionMismatch(format!("cost has {n} columns, w_t has {}", w_t.len())));
    }
    check_probability("w_t", w_t)?;
    if !(lambda1 > F::zero()) {
        return Err(OtError::InvalidParams("lambda1 must be positive".into()));
    }

    let mut plan = Array2::<F>::zeros((m, n));
    for (j, col) in c.columns().into_iter().enumerate() {
        let logits: Vec<F> = col.iter().map(|&v| -v / lambda1 - F::one()).collect();
        let lse = log_sum_exp(logits.iter().copied());
        if !lse.is_finite() {
            return Err(OtError::NumericalUnderflow { column: j });
        }
        for (i, &l) in logits.iter().enumerate() {
            plan[[i, j]] = w_t[j] * (l - lse).exp();
        }
    }
    let objective = entropic_objective(c, &plan, lambda1);
    let coupling = Coupling::from_plan(plan, vec![objective], 1, true, F::zero());
    let weights = coupling.row_marginal.clone();
    Ok((weights, coupling))
}
