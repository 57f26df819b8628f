//! Diagonal-covariance Gaussian mixtures: k-means++ seeding, EM fitting,
//! BIC model selection and the per-domain substructure fits.

mod em;
mod kmeans;
mod select;

pub use em::{em_fit, em_fit_with, EmOptions};
pub use kmeans::{kmeans_init, KMeans};
pub use select::{
    compute_bic, fit_best_of_restarts, fit_source_substructures, fit_target_substructures,
    suggest_k, ClassSelection, SourceFit, TargetFit,
};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{log_sum_exp, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmmError {
    #[error("k = {k} exceeds the number of rows n = {n}")]
    KExceedsN { k: usize, n: usize },
    #[error("number of components must be at least 1")]
    ZeroComponents,
    #[error("empty k range")]
    EmptyRange,
    #[error("class {class} has {n_class} rows, fewer than the smallest K = {min_k}")]
    ClassTooSmall { class: usize, n_class: usize, min_k: usize },
    #[error("source dataset has no labels")]
    MissingLabels,
    #[error("data has no rows")]
    NoData,
}

/// One substructure: diagonal Gaussian with mixing weight and optional class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GaussianComponent<F> {
    #[serde(with = "crate::serde_array::vector")]
    pub mean: Array1<F>,
    #[serde(with = "crate::serde_array::vector")]
    pub cov_diag: Array1<F>,
    pub weight: F,
    pub class_label: Option<usize>,
}

impl<F: Scalar> GaussianComponent<F> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `ln N(x; mean, diag(cov_diag))`.
    pub fn log_density(&self, x: ArrayView1<'_, F>) -> F {
        let two_pi = F::lit(std::f64::consts::TAU);
        let mut acc = F::zero();
        for ((&xi, &m), &v) in x.iter().zip(&self.mean).zip(&self.cov_diag) {
            let diff = xi - m;
            acc += (two_pi * v).ln() + diff * diff / v;
        }
        -F::lit(0.5) * acc
    }
}

/// Fitted mixture with its final log-likelihood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct MixtureModel<F> {
    pub components: Vec<GaussianComponent<F>>,
    pub log_likelihood: F,
    pub sample_count: usize,
    /// Log-likelihood after the initial E-step and after each EM iteration.
    pub log_likelihood_trace: Vec<F>,
    pub iterations: usize,
    pub converged: bool,
    /// All rows were identical; the model collapsed to one component.
    pub degenerate: bool,
}

impl<F: Scalar> MixtureModel<F> {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components.first().map_or(0, GaussianComponent::dim)
    }

    /// Free parameters of a diagonal mixture: means and variances per
    /// component plus `K - 1` weights.
    pub fn free_parameters(&self) -> usize {
        let k = self.n_components();
        k * 2 * self.dim() + k - 1
    }

    /// Per-row, per-component `ln(w_k N(x_i | k))`.
    pub fn weighted_log_densities(&self, data: ArrayView2<'_, F>) -> Array2<F> {
        let mut out = Array2::zeros((data.nrows(), self.n_components()));
        for (i, row) in data.rows().into_iter().enumerate() {
            for (k, c) in self.components.iter().enumerate() {
                out[[i, k]] = c.weight.ln() + c.log_density(row);
            }
        }
        out
    }

    /// Total log-likelihood of `data` under the model.
    pub fn log_likelihood_of(&self, data: ArrayView2<'_, F>) -> F {
        self.weighted_log_densities(data)
            .rows()
            .into_iter()
            .map(|r| log_sum_exp(r.iter().copied()))
            .sum()
    }

    /// Posterior responsibilities; every row sums to one.
    pub fn responsibilities(&self, data: ArrayView2<'_, F>) -> Array2<F> {
        let mut logp = self.weighted_log_densities(data);
        for mut row in logp.rows_mut() {
            let lse = log_sum_exp(row.iter().copied());
            row.mapv_inplace(|v| (v - lse).exp());
        }
        logp
    }

    /// Hard assignment by maximum posterior; ties go to the lowest index.
    pub fn predict(&self, data: ArrayView2<'_, F>) -> Vec<usize> {
        self.weighted_log_densities(data)
            .rows()
            .into_iter()
            .map(|r| argmax_first(r.iter().copied()))
            .collect()
    }
}

pub(crate) fn argmax_first<F: Scalar>(values: impl IntoIterator<Item = F>) -> usize {
    let mut best = (0, F::neg_infinity());
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}
