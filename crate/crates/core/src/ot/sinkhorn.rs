use ndarray::{Array1, Array2};

use super::{check_probability, entropic_objective, Coupling, OtError};
use crate::{log_sum_exp, Scalar};
use crate::substructure::CostMatrix;

/// Scalings beyond this magnitude are absorbed into the dual potentials.
const ABSORB_THRESHOLD: f64 = 1e30;
const CHECK_EVERY: usize = 5;

/// Entropic OT between `w_s` and `w_t`: minimizes `⟨π,C⟩ + λ Σ π ln π` subject
/// to both marginals.
///
/// Matrix scaling with log-domain stabilization: the plan is kept as
/// `diag(u) K diag(v)` with `K = exp((α ⊕ β − C)/λ)`, and the scalings are
/// folded into the potentials `α, β` whenever they grow large. Stops when the
/// largest marginal violation drops below `tol`; otherwise returns the last
/// iterate with `converged = false`.
pub fn sinkhorn<F: Scalar>(
    cost: &CostMatrix<F>,
    w_s: &Array1<F>,
    w_t: &Array1<F>,
    lambda: F,
    tol: F,
    max_iter: usize,
) -> Result<Coupling<F>, OtError> {
    sinkhorn_raw(cost.values(), w_s, w_t, lambda, tol, max_iter)
}

pub(crate) fn sinkhorn_raw<F: Scalar>(
    cost: &Array2<F>,
    a: &Array1<F>,
    b: &Array1<F>,
    lambda: F,
    tol: F,
    max_iter: usize,
) -> Result<Coupling<F>, OtError> {
    let (m, n) = cost.dim();
    if a.len() != m || b.len() != n {
        return Err(OtError::DimensionMismatch(format!(
            "cost is {m}x{n}, marginals have lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    check_probability("w_s", a)?;
    check_probability("w_t", b)?;
    if !(lambda > F::zero()) {
        return Err(OtError::InvalidParams("lambda must be positive".into()));
    }

    let log_a = a.mapv(|v| v.ln());
    let log_b = b.mapv(|v| v.ln());
    let mut alpha = Array1::<F>::zeros(m);
    let mut beta = Array1::<F>::zeros(n);
    log_update(cost, &log_a, &log_b, lambda, &mut alpha, &mut beta);

    let mut kernel = build_kernel(cost, &alpha, &beta, lambda);
    let mut u = Array1::<F>::ones(m);
    let mut v = Array1::<F>::ones(n);
    let threshold = F::lit(ABSORB_THRESHOLD);
    let mut residual = F::infinity();
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let kv = kernel.dot(&v);
        scale_into(&mut u, a, &kv);
        let ktu = kernel.t().dot(&u);
        scale_into(&mut v, b, &ktu);

        let unstable = u.iter().chain(v.iter()).any(|x| !x.is_finite() || *x > threshold || (*x > F::zero() && *x < threshold.recip()));
        if unstable {
            if u.iter().chain(v.iter()).all(|x| x.is_finite()) {
                absorb(&mut alpha, &u, lambda);
                absorb(&mut beta, &v, lambda);
            } else {
                log_update(cost, &log_a, &log_b, lambda, &mut alpha, &mut beta);
            }
            kernel = build_kernel(cost, &alpha, &beta, lambda);
            u.fill(F::one());
            v.fill(F::one());
        }

        if iterations % CHECK_EVERY == 0 || iterations == max_iter {
            residual = marginal_residual(&kernel, &u, &v, a, b);
            if residual < tol {
                converged = true;
                break;
            }
        }
    }

    let mut plan = kernel;
    for (i, mut row) in plan.rows_mut().into_iter().enumerate() {
        for (j, p) in row.iter_mut().enumerate() {
            *p = u[i] * *p * v[j];
        }
    }
    let objective = entropic_objective(cost, &plan, lambda);
    Ok(Coupling::from_plan(plan, vec![objective], iterations, converged, residual))
}

/// `x = target / denom`, with zero wherever the target mass is zero.
fn scale_into<F: Scalar>(x: &mut Array1<F>, target: &Array1<F>, denom: &Array1<F>) {
    for ((xi, &t), &d) in x.iter_mut().zip(target).zip(denom) {
        *xi = if t == F::zero() { F::zero() } else { t / d };
    }
}

fn absorb<F: Scalar>(potential: &mut Array1<F>, scaling: &Array1<F>, lambda: F) {
    for (p, &s) in potential.iter_mut().zip(scaling) {
        *p += lambda * s.ln();
    }
}

fn build_kernel<F: Scalar>(cost: &Array2<F>, alpha: &Array1<F>, beta: &Array1<F>, lambda: F) -> Array2<F> {
    let mut k = cost.clone();
    for (i, mut row) in k.rows_mut().into_iter().enumerate() {
        for (j, c) in row.iter_mut().enumerate() {
            *c = ((alpha[i] + beta[j] - *c) / lambda).exp();
        }
    }
    k
}

/// One exact block update of both potentials in the log domain.
fn log_update<F: Scalar>(
    cost: &Array2<F>,
    log_a: &Array1<F>,
    log_b: &Array1<F>,
    lambda: F,
    alpha: &mut Array1<F>,
    beta: &mut Array1<F>,
) {
    for (i, row) in cost.rows().into_iter().enumerate() {
        let lse = log_sum_exp(row.iter().zip(beta.iter()).map(|(&c, &g)| (g - c) / lambda));
        alpha[i] = if log_a[i] == F::neg_infinity() { F::neg_infinity() } else { lambda * (log_a[i] - lse) };
    }
    for (j, col) in cost.columns().into_iter().enumerate() {
        let lse = log_sum_exp(col.iter().zip(alpha.iter()).map(|(&c, &f)| (f - c) / lambda));
        beta[j] = if log_b[j] == F::neg_infinity() { F::neg_infinity() } else { lambda * (log_b[j] - lse) };
    }
}

fn marginal_residual<F: Scalar>(kernel: &Array2<F>, u: &Array1<F>, v: &Array1<F>, a: &Array1<F>, b: &Array1<F>) -> F {
    let rows = &kernel.dot(v) * u;
    let cols = &kernel.t().dot(u) * v;
    let row_err = rows.iter().zip(a).fold(F::zero(), |m, (&r, &t)| m.max((r - t).abs()));
    let col_err = cols.iter().zip(b).fold(F::zero(), |m, (&c, &t)| m.max((c - t).abs()));
    row_err.max(col_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substructure::CostKind;
    use ndarray::{array, Array2, Axis};
    use proptest::prelude::*;

    fn cm(values: Array2<f64>) -> CostMatrix<f64> {
        CostMatrix::new(values, CostKind::Center)
    }

    #[test]
    fn two_by_two_closed_form() {
        let c = cm(array![[0.0, 1.0], [1.0, 0.0]]);
        let u = array![0.5, 0.5];
        let p = sinkhorn(&c, &u, &u, 1.0, 1e-12, 10_000).unwrap();
        // a/b = e with a + b = 1/2, derived by hand from the scaling form
        let e = std::f64::consts::E;
        let (a, b) = (0.5 * e / (1.0 + e), 0.5 / (1.0 + e));
        assert!((p.plan[[0, 0]] - a).abs() < 1e-10 && (p.plan[[1, 1]] - a).abs() < 1e-10);
        assert!((p.plan[[0, 1]] - b).abs() < 1e-10 && (p.plan[[1, 0]] - b).abs() < 1e-10);
        assert!((a - 0.36552).abs() < 1e-5 && (b - 0.13448).abs() < 1e-5);
        assert!(p.converged);
    }

    #[test]
    fn constant_cost_gives_product_plan() {
        let c = cm(Array2::from_elem((3, 4), 2.5));
        let a = array![0.2, 0.3, 0.5];
        let b = array![0.1, 0.2, 0.3, 0.4];
        let p = sinkhorn(&c, &a, &b, 0.7, 1e-12, 1000).unwrap();
        for i in 0..3 {
            for j in 0..4 {
                assert!((p.plan[[i, j]] - a[i] * b[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn large_lambda_approaches_independence() {
        let c = cm(array![[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]]);
        let a = array![0.2, 0.5, 0.3];
        let b = array![0.4, 0.4, 0.2];
        let p = sinkhorn(&c, &a, &b, 1e3, 1e-12, 10_000).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((p.plan[[i, j]] - a[i] * b[j]).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn tiny_lambda_survives() {
        let c = cm(array![[0.0, 9.0, 16.0], [9.0, 0.0, 4.0], [16.0, 4.0, 0.0]]);
        let u = array![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let p = sinkhorn(&c, &u, &u, 1e-3, 1e-10, 100_000).unwrap();
        assert!(p.converged);
        assert!(p.plan.iter().all(|v| v.is_finite()));
        for i in 0..3 {
            assert!((p.plan[[i, i]] - 1.0 / 3.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_mass_entries() {
        let c = cm(array![[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]]);
        let a = array![0.5, 0.5, 0.0];
        let b = array![0.5, 0.5];
        let p = sinkhorn(&c, &a, &b, 0.5, 1e-12, 1000).unwrap();
        assert!(p.plan.row(2).iter().all(|v| *v == 0.0));
        assert!(p.converged);
    }

    #[test]
    fn non_convergence_is_flagged() {
        let c = cm(array![[0.0, 5.0], [5.0, 0.0]]);
        let a = array![0.9, 0.1];
        let b = array![0.1, 0.9];
        let p = sinkhorn(&c, &a, &b, 0.05, 1e-15, 2).unwrap();
        assert!(!p.converged);
        assert!(matches!(p.ensure_converged(), Err(OtError::NonConvergence { iterations: 2, .. })));
    }

    #[test]
    fn rejects_bad_marginals() {
        let c = cm(array![[0.0, 1.0]]);
        assert!(sinkhorn(&c, &array![1.0], &array![0.7, 0.7], 1.0, 1e-9, 10).is_err());
        assert!(sinkhorn(&c, &array![1.0, 0.0], &array![0.5, 0.5], 1.0, 1e-9, 10).is_err());
    }

    #[test]
    fn single_precision() {
        let c = CostMatrix::new(array![[0.0f32, 1.0], [1.0, 0.0]], CostKind::Center);
        let u = array![0.5f32, 0.5];
        let p = sinkhorn(&c, &u, &u, 1.0, 1e-6, 1000).unwrap();
        assert!((p.plan[[0, 0]] - 0.36552).abs() < 1e-5);
    }

    fn probability(len: usize) -> impl Strategy<Value = Array1<f64>> {
        prop::collection::vec(0.05f64..1.0, len).prop_map(|v| {
            let s: f64 = v.iter().sum();
            Array1::from(v) / s
        })
    }

    proptest! {
        #[test]
        fn marginals_and_row_permutation(
            values in prop::collection::vec(0.0f64..5.0, 20),
            a in probability(4),
            b in probability(5),
            lambda in 0.05f64..5.0,
            rot in 1usize..4,
        ) {
            let c = Array2::from_shape_vec((4, 5), values).unwrap();
            let p = sinkhorn(&cm(c.clone()), &a, &b, lambda, 1e-10, 50_000).unwrap();
            prop_assert!(p.converged);
            for (r, t) in p.plan.sum_axis(Axis(1)).iter().zip(&a) {
                prop_assert!((r - t).abs() < 1e-9);
            }
            for (r, t) in p.plan.sum_axis(Axis(0)).iter().zip(&b) {
                prop_assert!((r - t).abs() < 1e-9);
            }
            let perm: Vec<usize> = (0..4).map(|i| (i + rot) % 4).collect();
            let cp = c.select(Axis(0), &perm);
            let ap = a.select(Axis(0), &perm);
            let q = sinkhorn(&cm(cp), &ap, &b, lambda, 1e-10, 50_000).unwrap();
            for (k, &i) in perm.iter().enumerate() {
                for j in 0..5 {
                    prop_assert!((q.plan[[k, j]] - p.plan[[i, j]]).abs() < 1e-8);
                }
            }
        }
    }
}
