use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::{kmeans_init, GaussianComponent, GmmError, MixtureModel};
use crate::{log_sum_exp, Scalar};

/// EM stopping rule and variance floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmOptions {
    /// Stop when `|ΔlnL| < tol · |lnL|`.
    pub tol: f64,
    pub max_iter: usize,
    /// Lower bound on every variance.
    pub cov_floor: f64,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { tol: 1e-7, max_iter: 300, cov_floor: 1e-6 }
    }
}

pub fn em_fit<F: Scalar>(
    data: ArrayView2<'_, F>,
    k: usize,
    rng_seed: u64,
) -> Result<MixtureModel<F>, GmmError> {
    em_fit_with(data, k, rng_seed, EmOptions::default())
}

/// Fits a `k`-component diagonal mixture by EM, initialized from k-means.
///
/// When every row is identical and `k > 1` the result is a single component
/// at that row with `degenerate` set.
pub fn em_fit_with<F: Scalar>(
    data: ArrayView2<'_, F>,
    k: usize,
    rng_seed: u64,
    opts: EmOptions,
) -> Result<MixtureModel<F>, GmmError> {
    let n = data.nrows();
    if n == 0 {
        return Err(GmmError::NoData);
    }
    if k == 0 {
        return Err(GmmError::ZeroComponents);
    }
    if k > n {
        return Err(GmmError::KExceedsN { k, n });
    }
    let floor = F::lit(opts.cov_floor);
    let tol = F::tolerance_floor(opts.tol);

    let first = data.row(0);
    if k > 1 && data.rows().into_iter().all(|r| r == first) {
        let mut model = from_parts(data, &[vec![1.0; n]].map(Array1::from), floor, None);
        model.degenerate = true;
        model.converged = true;
        return Ok(model);
    }

    let km = kmeans_init(data, k, rng_seed)?;
    // pooled within-cluster variance seeds clusters too small to estimate their own
    let mut pooled = Array1::<F>::zeros(data.ncols());
    for (x, &a) in data.rows().into_iter().zip(&km.assignment) {
        for ((p, &xi), &c) in pooled.iter_mut().zip(x).zip(km.centroids.row(a)) {
            *p += (xi - c) * (xi - c);
        }
    }
    let pooled = pooled.mapv(|v| (v / F::from_usize_lossy(n)).max(floor));
    let mut components: Vec<GaussianComponent<F>> = (0..k)
        .map(|c| {
            let rows: Vec<usize> = (0..n).filter(|&i| km.assignment[i] == c).collect();
            let cov_diag = if rows.len() >= 2 {
                data.select(Axis(0), &rows).var_axis(Axis(0), F::zero()).mapv(|v| v.max(floor))
            } else {
                pooled.clone()
            };
            GaussianComponent {
                mean: km.centroids.row(c).to_owned(),
                cov_diag,
                weight: F::from_usize_lossy(rows.len().max(1)) / F::from_usize_lossy(n),
                class_label: None,
            }
        })
        .collect();
    normalize_weights(&mut components);

    let (mut ll, mut resp) = e_step(data, &components);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        m_step(data, &resp, &mut components, floor);
        let (next_ll, next_resp) = e_step(data, &components);
        let change = (next_ll - ll).abs();
        let scale = ll.abs().max(F::one());
        ll = next_ll;
        resp = next_resp;
        trace.push(ll);
        if change < tol * scale {
            converged = true;
            break;
        }
    }
    Ok(MixtureModel {
        components,
        log_likelihood: ll,
        sample_count: n,
        log_likelihood_trace: trace,
        iterations,
        converged,
        degenerate: false,
    })
}

/// Builds a single-pass model from per-component row weights.
fn from_parts<F: Scalar>(
    data: ArrayView2<'_, F>,
    weights: &[Array1<f64>],
    floor: F,
    class_label: Option<usize>,
) -> MixtureModel<F> {
    let resp = Array2::from_shape_fn((data.nrows(), weights.len()), |(i, k)| F::lit(weights[k][i]));
    let mut components = vec![
        GaussianComponent {
            mean: Array1::zeros(data.ncols()),
            cov_diag: Array1::from_elem(data.ncols(), floor),
            weight: F::one(),
            class_label,
        };
        weights.len()
    ];
    m_step(data, &resp, &mut components, floor);
    let (ll, _) = e_step(data, &components);
    MixtureModel {
        components,
        log_likelihood: ll,
        sample_count: data.nrows(),
        log_likelihood_trace: vec![ll],
        iterations: 0,
        converged: false,
        degenerate: false,
    }
}

fn normalize_weights<F: Scalar>(components: &mut [GaussianComponent<F>]) {
    let tiny = F::min_positive_value();
    for c in components.iter_mut() {
        c.weight = c.weight.max(tiny);
    }
    let total: F = components.iter().map(|c| c.weight).sum();
    for c in components.iter_mut() {
        c.weight /= total;
    }
}

/// Log-likelihood and responsibilities at the given parameters.
fn e_step<F: Scalar>(data: ArrayView2<'_, F>, components: &[GaussianComponent<F>]) -> (F, Array2<F>) {
    let (n, d) = data.dim();
    let k = components.len();
    let half_ln_2pi = F::lit(0.5 * std::f64::consts::TAU.ln());
    let prec: Vec<Array1<F>> = components.iter().map(|c| c.cov_diag.mapv(|v| v.recip())).collect();
    let consts: Vec<F> = components
        .iter()
        .map(|c| {
            c.weight.ln()
                - F::from_usize_lossy(d) * half_ln_2pi
                - F::lit(0.5) * c.cov_diag.iter().map(|v| v.ln()).sum::<F>()
        })
        .collect();
    let mut resp = Array2::zeros((n, k));
    let mut ll = F::zero();
    for (i, x) in data.rows().into_iter().enumerate() {
        let mut row = resp.row_mut(i);
        for (c, comp) in components.iter().enumerate() {
            let mut q = F::zero();
            for ((&xi, &m), &p) in x.iter().zip(&comp.mean).zip(&prec[c]) {
                let diff = xi - m;
                q += diff * diff * p;
            }
            row[c] = consts[c] - F::lit(0.5) * q;
        }
        let lse = log_sum_exp(row.iter().copied());
        row.mapv_inplace(|v| (v - lse).exp());
        ll += lse;
    }
    (ll, resp)
}

fn m_step<F: Scalar>(
    data: ArrayView2<'_, F>,
    resp: &Array2<F>,
    components: &mut [GaussianComponent<F>],
    floor: F,
) {
    let n = F::from_usize_lossy(data.nrows());
    for (c, comp) in components.iter_mut().enumerate() {
        let r = resp.column(c);
        let nk: F = r.sum();
        if !(nk > F::epsilon()) {
            comp.weight = nk / n;
            continue;
        }
        let mut mean = Array1::zeros(data.ncols());
        for (x, &w) in data.rows().into_iter().zip(r) {
            mean.scaled_add(w, &x);
        }
        mean /= nk;
        let mut var = Array1::zeros(data.ncols());
        for (x, &w) in data.rows().into_iter().zip(r) {
            for ((v, &xi), &m) in var.iter_mut().zip(x).zip(&mean) {
                let diff = xi - m;
                *v += w * diff * diff;
            }
        }
        comp.cov_diag = var.mapv(|v: F| (v / nk).max(floor));
        comp.mean = mean;
        comp.weight = nk / n;
    }
    normalize_weights(components);
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn two_modes(seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((1000, 1), |(i, _)| {
            let z: f64 = rng.sample(StandardNormal);
            if i < 500 { -5.0 + z } else { 5.0 + z }
        })
    }

    /// Plain textbook EM on 1-D data, written independently of the crate.
    fn reference_em_1d(x: &[f64], mut mu: [f64; 2], iters: usize) -> [f64; 2] {
        let mut var = [1.0, 1.0];
        let mut pi = [0.5, 0.5];
        for _ in 0..iters {
            let mut r = vec![[0.0; 2]; x.len()];
            for (i, &xi) in x.iter().enumerate() {
                let p: Vec<f64> = (0..2)
                    .map(|k| pi[k] * (-(xi - mu[k]).powi(2) / (2.0 * var[k])).exp() / (var[k] * std::f64::consts::TAU).sqrt())
                    .collect();
                let s = p[0] + p[1];
                r[i] = [p[0] / s, p[1] / s];
            }
            for k in 0..2 {
                let nk: f64 = r.iter().map(|ri| ri[k]).sum();
                mu[k] = r.iter().zip(x).map(|(ri, xi)| ri[k] * xi).sum::<f64>() / nk;
                var[k] = r.iter().zip(x).map(|(ri, xi)| ri[k] * (xi - mu[k]).powi(2)).sum::<f64>() / nk;
                pi[k] = nk / x.len() as f64;
            }
        }
        mu
    }

    #[test]
    fn single_component_is_closed_form() {
        let data: Array2<f64> = array![[1.0, 10.0], [2.0, 10.0], [6.0, 10.0]];
        let m = em_fit(data.view(), 1, 0).unwrap();
        let c = &m.components[0];
        assert!((c.mean[0] - 3.0).abs() < 1e-12);
        assert!((c.cov_diag[0] - 14.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.cov_diag[1], 1e-6);
        assert_eq!(c.weight, 1.0);
        assert!((m.log_likelihood - m.log_likelihood_of(data.view())).abs() < 1e-9);
    }

    #[test]
    fn recovers_two_modes_like_reference() {
        let data = two_modes(3);
        let m = em_fit(data.view(), 2, 1).unwrap();
        let mut means: Vec<f64> = m.components.iter().map(|c| c.mean[0]).collect();
        means.sort_by(f64::total_cmp);
        let x: Vec<f64> = data.iter().copied().collect();
        let reference = reference_em_1d(&x, [-1.0, 1.0], 200);
        assert!((means[0] + 5.0).abs() < 0.3 && (means[1] - 5.0).abs() < 0.3);
        assert!((means[0] - reference[0]).abs() < 1e-3 && (means[1] - reference[1]).abs() < 1e-3);
    }

    #[test]
    fn log_likelihood_is_monotone() {
        for seed in 0..5 {
            let data = two_modes(seed);
            for k in 1..=4 {
                let m = em_fit(data.view(), k, seed).unwrap();
                for w in m.log_likelihood_trace.windows(2) {
                    assert!(w[1] >= w[0] - 1e-10, "k={k} seed={seed}: {} -> {}", w[0], w[1]);
                }
            }
        }
    }

    #[test]
    fn identical_rows_are_flagged() {
        let data = Array2::from_elem((5, 2), 3.0f64);
        let m = em_fit(data.view(), 3, 0).unwrap();
        assert!(m.degenerate);
        assert_eq!(m.n_components(), 1);
        assert!(m.log_likelihood.is_finite());
        assert_eq!(m.components[0].cov_diag[0], 1e-6);
    }

    #[test]
    fn saturated_model() {
        let data: Array2<f64> = array![[0.0], [1.0], [5.0], [9.0]];
        let m = em_fit(data.view(), 4, 2).unwrap();
        assert_eq!(m.predict(data.view()).iter().collect::<std::collections::BTreeSet<_>>().len(), 4);
        for c in &m.components {
            assert!((c.cov_diag[0] - 1e-6).abs() < 1e-12);
        }
    }

    #[test]
    fn invariants_hold() {
        let data = two_modes(9);
        let m = em_fit(data.view(), 3, 4).unwrap();
        let wsum: f64 = m.components.iter().map(|c| c.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-9);
        for row in m.responsibilities(data.view()).rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert!(m.components.iter().all(|c| c.cov_diag.iter().all(|&v| v >= 1e-6)));
        assert_eq!(m, em_fit(data.view(), 3, 4).unwrap());
        assert_eq!(em_fit(data.view(), 1001, 0).unwrap_err(), GmmError::KExceedsN { k: 1001, n: 1000 });
    }

    #[test]
    fn works_in_single_precision() {
        let data = two_modes(1).mapv(|v| v as f32);
        let m = em_fit(data.view(), 2, 1).unwrap();
        let mut means: Vec<f32> = m.components.iter().map(|c| c.mean[0]).collect();
        means.sort_by(f32::total_cmp);
        assert!((means[0] + 5.0).abs() < 0.3 && (means[1] - 5.0).abs() < 0.3);
    }
}
