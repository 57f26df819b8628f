use ndarray::{Array1, Array2, Zip};

use super::sinkhorn::sinkhorn_raw;
use super::{Coupling, OtError, OtParams};
use crate::substructure::CostMatrix;
use crate::Scalar;

const GOLDEN: f64 = 0.618_033_988_749_894_8;
const LINE_SEARCH_TOL: f64 = 1e-5;

/// `⟨π, C⟩ + λ Σ π ln π`, with `0 ln 0 = 0`.
pub fn entropic_objective<F: Scalar>(cost: &Array2<F>, plan: &Array2<F>, lambda: F) -> F {
    let mut linear = F::zero();
    let mut neg_entropy = F::zero();
    Zip::from(cost).and(plan).for_each(|&c, &p| {
        linear += c * p;
        if p > F::zero() {
            neg_entropy += p * p.ln();
        }
    });
    linear + lambda * neg_entropy
}

fn class_groups(class_of_row: &[usize]) -> Vec<Vec<usize>> {
    let classes = class_of_row.iter().max().map_or(0, |m| m + 1);
    let mut groups = vec![Vec::new(); classes];
    for (i, &c) in class_of_row.iter().enumerate() {
        groups[c].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups
}

fn check_classes<F: Scalar>(plan: &Array2<F>, class_of_row: &[usize]) -> Result<(), OtError> {
    if class_of_row.len() != plan.nrows() {
        return Err(OtError::DimensionMismatch(format!(
            "{} class ids for {} rows",
            class_of_row.len(),
            plan.nrows()
        )));
    }
    Ok(())
}

fn group_norm<F: Scalar>(plan: &Array2<F>, rows: &[usize], j: usize) -> F {
    rows.iter().fold(F::zero(), |acc, &i| acc + plan[[i, j]] * plan[[i, j]]).sqrt()
}

fn omega<F: Scalar>(plan: &Array2<F>, groups: &[Vec<usize>]) -> F {
    let mut total = F::zero();
    for j in 0..plan.ncols() {
        for g in groups {
            total += group_norm(plan, g, j);
        }
    }
    total
}

/// `Ω(π) = Σ_j Σ_class ‖π(I_class, j)‖₂`.
pub fn group_lasso_value<F: Scalar>(plan: &Array2<F>, class_of_row: &[usize]) -> Result<F, OtError> {
    check_classes(plan, class_of_row)?;
    Ok(omega(plan, &class_groups(class_of_row)))
}

/// Gradient of `Ω`: each within-class column segment divided by its norm;
/// zero where the segment is zero.
pub fn group_lasso_gradient<F: Scalar>(plan: &Array2<F>, class_of_row: &[usize]) -> Result<Array2<F>, OtError> {
    check_classes(plan, class_of_row)?;
    Ok(omega_gradient(plan, &class_groups(class_of_row)))
}

fn omega_gradient<F: Scalar>(plan: &Array2<F>, groups: &[Vec<usize>]) -> Array2<F> {
    let mut grad = Array2::zeros(plan.dim());
    for j in 0..plan.ncols() {
        for g in groups {
            let norm = group_norm(plan, g, j);
            if norm > F::zero() {
                for &i in g {
                    grad[[i, j]] = plan[[i, j]] / norm;
                }
            }
        }
    }
    grad
}

/// `⟨π, C⟩ + λ Σ π ln π + η Ω(π)`.
pub fn regularized_objective<F: Scalar>(
    cost: &Array2<F>,
    plan: &Array2<F>,
    class_of_row: &[usize],
    lambda: F,
    eta: F,
) -> Result<F, OtError> {
    Ok(entropic_objective(cost, plan, lambda) + eta * group_lasso_value(plan, class_of_row)?)
}

/// Group-lasso regularized entropic OT by generalized conditional gradient.
///
/// Starts from the plain entropic plan. Each outer step linearizes `ηΩ` at
/// the current plan, solves the entropic problem with cost `C + η∇Ω`, and
/// moves toward that solution with a golden-section search over the step in
/// `[0, 1]` on the full objective. Steps never increase the objective; the
/// loop ends when the relative decrease falls below `tol` or after
/// `max_outer` steps. With `η = 0` the plain entropic plan is returned.
pub fn gcg_solve<F: Scalar>(
    cost: &CostMatrix<F>,
    w_s: &Array1<F>,
    w_t: &Array1<F>,
    class_of_row: &[usize],
    params: &OtParams,
) -> Result<Coupling<F>, OtError> {
    params.validate()?;
    let c = cost.values();
    check_classes(c, class_of_row)?;
    let lambda = F::lit(params.lambda);
    let eta = F::lit(params.eta);
    let tol = F::tolerance_floor(params.tol);

    let start = sinkhorn_raw(c, w_s, w_t, lambda, tol, params.max_sinkhorn)?;
    if params.eta == 0.0 {
        return Ok(start);
    }
    let groups = class_groups(class_of_row);
    let objective = |p: &Array2<F>| entropic_objective(c, p, lambda) + eta * omega(p, &groups);

    let mut plan = start.plan;
    let mut inner_ok = start.converged;
    let mut residual = start.residual;
    let mut current = objective(&plan);
    let mut trace = vec![current];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_outer {
        iterations += 1;
        let linearized = c + &(omega_gradient(&plan, &groups) * eta);
        let sub = sinkhorn_raw(&linearized, w_s, w_t, lambda, tol, params.max_sinkhorn)?;
        let direction = &sub.plan - &plan;
        let along = |step: F| objective(&(&plan + &(&direction * step)));
        let (step, value) = golden_section(along, current);
        if !(value < current) {
            converged = true;
            trace.push(current);
            break;
        }
        plan.scaled_add(step, &direction);
        inner_ok &= sub.converged;
        residual = residual.max(sub.residual);
        let decrease = (current - value) / current.abs().max(F::epsilon());
        current = value;
        trace.push(current);
        if decrease < tol {
            converged = true;
            break;
        }
    }
    Ok(Coupling::from_plan(plan, trace, iterations, converged && inner_ok, residual))
}

/// Minimizes a convex function on `[0, 1]`; returns the best of the interior
/// estimate and the right endpoint, or `(0, at_zero)` if neither improves.
fn golden_section<F: Scalar>(f: impl Fn(F) -> F, at_zero: F) -> (F, F) {
    let g = F::lit(GOLDEN);
    let (mut lo, mut hi) = (F::zero(), F::one());
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > F::lit(LINE_SEARCH_TOL) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut best = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let at_one = f(F::one());
    if at_one < best.1 {
        best = (F::one(), at_one);
    }
    if best.1 < at_zero {
        best
    } else {
        (F::zero(), at_zero)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ot::sinkhorn;
    use crate::substructure::CostKind;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(values: Array2<f64>) -> CostMatrix<f64> {
        CostMatrix::new(values, CostKind::Center)
    }

    #[test]
    fn group_lasso_examples() {
        let p: Array2<f64> = array![[0.3, 0.2], [0.1, 0.4]];
        assert!((group_lasso_value(&p, &[0, 1]).unwrap() - 1.0).abs() < 1e-15);
        let both = group_lasso_value(&p, &[0, 0]).unwrap();
        assert!((both - (0.10f64.sqrt() + 0.20f64.sqrt())).abs() < 1e-15);
        assert!((both - 0.76344).abs() < 1e-5);
        assert_eq!(group_lasso_value(&Array2::<f64>::zeros((2, 2)), &[0, 1]).unwrap(), 0.0);
        assert!(group_lasso_value(&p, &[0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p: Array2<f64> = array![[0.3, 0.2], [0.1, 0.4], [0.05, 0.0]];
        let classes = [0, 0, 1];
        let grad = group_lasso_gradient(&p, &classes).unwrap();
        let h = 1e-7;
        for i in 0..3 {
            for j in 0..2 {
                if p[[i, j]] == 0.0 {
                    assert_eq!(grad[[i, j]], 0.0);
                    continue;
                }
                let mut q = p.clone();
                q[[i, j]] += h;
                let fd = (group_lasso_value(&q, &classes).unwrap() - group_lasso_value(&p, &classes).unwrap()) / h;
                assert!((fd - grad[[i, j]]).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn zero_eta_is_sinkhorn() {
        let c = array![[0.0, 1.0, 2.0], [1.0, 0.5, 0.0]];
        let a = array![0.4, 0.6];
        let b = array![0.3, 0.3, 0.4];
        let params = OtParams { eta: 0.0, ..OtParams::default() };
        let g = gcg_solve(&cm(c.clone()), &a, &b, &[0, 1], &params).unwrap();
        let s = sinkhorn(&cm(c), &a, &b, 1.0, 1e-9, 10_000).unwrap();
        assert!(g.plan.iter().zip(&s.plan).all(|(x, y)| (x - y).abs() < 1e-8));
    }

    fn random_instance(seed: u64) -> (Array2<f64>, Array1<f64>, Array1<f64>, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c = Array2::from_shape_fn((5, 4), |_| rng.random::<f64>() * 3.0);
        let mut a = Array1::from_shape_fn(5, |_| rng.random::<f64>() + 0.1);
        a /= a.sum();
        let mut b = Array1::from_shape_fn(4, |_| rng.random::<f64>() + 0.1);
        b /= b.sum();
        let classes = (0..5).map(|i| i % 2).collect();
        (c, a, b, classes)
    }

    #[test]
    fn objective_trace_never_increases() {
        for seed in 0..10 {
            let (c, a, b, classes) = random_instance(seed);
            let params = OtParams { lambda: 0.3, eta: 1.0, ..OtParams::default() };
            let g = gcg_solve(&cm(c.clone()), &a, &b, &classes, &params).unwrap();
            for w in g.objective_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-10);
            }
            let last = *g.objective_trace.last().unwrap();
            let direct = regularized_objective(&c, &g.plan, &classes, 0.3, 1.0).unwrap();
            assert!((last - direct).abs() < 1e-12);
            assert!(g.row_marginal.iter().zip(&a).all(|(r, t)| (r - t).abs() < 1e-8));
            assert!(g.col_marginal.iter().zip(&b).all(|(r, t)| (r - t).abs() < 1e-8));
        }
    }

    #[test]
    fn strong_regularizer_separates_classes() {
        // class 0 sources at x=0, class 1 at x=6; two targets near each class
        let src: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 1.0], [6.0, 0.0], [6.0, 1.0]];
        let tgt: [[f64; 2]; 4] = [[1.0, 0.0], [1.0, 1.0], [5.0, 0.0], [5.0, 1.0]];
        let c = Array2::from_shape_fn((4, 4), |(i, j)| {
            (src[i][0] - tgt[j][0]).powi(2) + (src[i][1] - tgt[j][1]).powi(2)
        });
        let uniform = Array1::from_elem(4, 0.25);
        let classes = [0, 0, 1, 1];
        let params = OtParams { lambda: 0.5, eta: 100.0, ..OtParams::default() };
        let g = gcg_solve(&cm(c), &uniform, &uniform, &classes, &params).unwrap();
        for w in g.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
        for j in 0..4 {
            let col = g.plan.column(j);
            let share = (col[0] + col[1]).max(col[2] + col[3]) / col.sum();
            assert!(share >= 0.99, "column {j}: {share}");
        }
    }

    #[test]
    fn penalty_is_flat_across_class_split_for_rank_one_blocks() {
        // Ω only sees within-class shapes: moving mass between classes with
        // evenly spread rows leaves it unchanged.
        let pure: Array2<f64> = array![[0.25, 0.0], [0.25, 0.0], [0.0, 0.25], [0.0, 0.25]];
        let mixed: Array2<f64> = Array2::from_elem((4, 2), 0.125);
        let classes = [0, 0, 1, 1];
        let a = group_lasso_value(&pure, &classes).unwrap();
        let b = group_lasso_value(&mixed, &classes).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn single_class_run_is_valid() {
        let (c, a, b, _) = random_instance(3);
        let params = OtParams { eta: 2.0, ..OtParams::default() };
        let g = gcg_solve(&cm(c), &a, &b, &[0; 5], &params).unwrap();
        for w in g.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10);
        }
    }
}
