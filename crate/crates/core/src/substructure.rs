//! Substructure sets and the two substructure cost matrices: squared distance
//! between centers, and squared 2-Wasserstein distance between diagonal
//! Gaussians.

use std::io::{self, Write};

use ndarray::{concatenate, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gmm::GaussianComponent;
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SubstructureError {
    #[error("dimension mismatch: source d = {source_dim}, target d = {target_dim}")]
    DimensionMismatch { source_dim: usize, target_dim: usize },
    #[error("negative variance {0}")]
    NegativeVariance(f64),
    #[error("masses must be a probability vector over {expected} components: {reason}")]
    BadMasses { expected: usize, reason: String },
    #[error("substructure set is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainTag {
    Source,
    Target,
}

/// Components of one domain together with their probability masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SubstructureSet<F> {
    components: Vec<GaussianComponent<F>>,
    #[serde(with = "crate::serde_array::vector")]
    masses: Array1<F>,
    domain_tag: DomainTag,
}

impl<F: Scalar> SubstructureSet<F> {
    /// Set with uniform masses `1 / k`.
    pub fn uniform(components: Vec<GaussianComponent<F>>, domain_tag: DomainTag) -> Result<Self, SubstructureError> {
        let k = components.len();
        if k == 0 {
            return Err(SubstructureError::Empty);
        }
        let dim = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != dim) {
            return Err(SubstructureError::DimensionMismatch { source_dim: dim, target_dim: c.dim() });
        }
        let masses = Array1::from_elem(k, F::one() / F::from_usize_lossy(k));
        Ok(Self { components, masses, domain_tag })
    }

    pub fn with_masses(mut self, masses: Array1<F>) -> Result<Self, SubstructureError> {
        let k = self.components.len();
        let bad = |reason: &str| SubstructureError::BadMasses { expected: k, reason: reason.into() };
        if masses.len() != k {
            return Err(bad("length differs from component count"));
        }
        if masses.iter().any(|m| !(*m >= F::zero()) || !m.is_finite()) {
            return Err(bad("negative or non-finite entry"));
        }
        if (masses.sum() - F::one()).abs() > F::tolerance_floor(1e-9) {
            return Err(bad("entries do not sum to 1"));
        }
        self.masses = masses;
        Ok(self)
    }

    pub fn components(&self) -> &[GaussianComponent<F>] {
        &self.components
    }

    pub fn masses(&self) -> &Array1<F> {
        &self.masses
    }

    pub fn domain_tag(&self) -> DomainTag {
        self.domain_tag
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// Class label of every component (`None` for target sets).
    pub fn class_labels(&self) -> Vec<Option<usize>> {
        self.components.iter().map(|c| c.class_label).collect()
    }

    /// `k × d` matrix of component means.
    pub fn center_representation(&self) -> Array2<F> {
        stack_rows(self.components.iter().map(|c| c.mean.view()))
    }

    /// `k × 2d` matrix of `(mean, sqrt(variance))` rows.
    pub fn gaussian_representation(&self) -> Array2<F> {
        let rows: Vec<Array1<F>> = self
            .components
            .iter()
            .map(|c| concatenate![Axis(0), c.mean, c.cov_diag.mapv(|v| v.sqrt())])
            .collect();
        stack_rows(rows.iter().map(|r| r.view()))
    }
}

fn stack_rows<'a, F: Scalar>(rows: impl Iterator<Item = ArrayView1<'a, F>>) -> Array2<F> {
    let rows: Vec<ArrayView1<'a, F>> = rows.collect();
    let d = rows.first().map_or(0, |r| r.len());
    let mut out = Array2::zeros((rows.len(), d));
    for (mut dst, src) in out.rows_mut().into_iter().zip(rows) {
        dst.assign(&src);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostKind {
    Center,
    Gaussian,
    /// Sample-level squared Euclidean cost.
    Sample,
}

/// Nonnegative `k_s × k_t` cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix<F> {
    values: Array2<F>,
    kind: CostKind,
}

impl<F: Scalar> CostMatrix<F> {
    pub fn new(values: Array2<F>, kind: CostKind) -> Self {
        debug_assert!(values.iter().all(|v| *v >= F::zero() && v.is_finite()));
        Self { values, kind }
    }

    pub fn values(&self) -> &Array2<F> {
        &self.values
    }

    pub fn kind(&self) -> CostKind {
        self.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn transpose(&self) -> Self {
        Self { values: self.values.t().to_owned(), kind: self.kind }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        crate::io::write_matrix_csv(out, &self.values, "t")
    }
}

/// Pairwise squared Euclidean distances between rows of `a` and rows of `b`.
pub fn squared_distances<F: Scalar>(a: &Array2<F>, b: &Array2<F>) -> Array2<F> {
    let mut out = Array2::zeros((a.nrows(), b.nrows()));
    for (i, x) in a.rows().into_iter().enumerate() {
        for (j, y) in b.rows().into_iter().enumerate() {
            out[[i, j]] = x.iter().zip(y).fold(F::zero(), |acc, (&p, &q)| acc + (p - q) * (p - q));
        }
    }
    out
}

fn check_dims<F: Scalar>(s: &SubstructureSet<F>, t: &SubstructureSet<F>) -> Result<(), SubstructureError> {
    if s.dim() != t.dim() {
        return Err(SubstructureError::DimensionMismatch { source_dim: s.dim(), target_dim: t.dim() });
    }
    Ok(())
}

pub fn cost_matrix_center<F: Scalar>(
    source: &SubstructureSet<F>,
    target: &SubstructureSet<F>,
) -> Result<CostMatrix<F>, SubstructureError> {
    check_dims(source, target)?;
    let values = squared_distances(&source.center_representation(), &target.center_representation());
    Ok(CostMatrix::new(values, CostKind::Center))
}

/// Squared Bures distance between diagonal covariances, `Σ (√r_s − √r_t)²`.
pub fn bures_diag_sq<F: Scalar>(r_s: ArrayView1<'_, F>, r_t: ArrayView1<'_, F>) -> Result<F, SubstructureError> {
    if r_s.len() != r_t.len() {
        return Err(SubstructureError::DimensionMismatch { source_dim: r_s.len(), target_dim: r_t.len() });
    }
    let mut acc = F::zero();
    for (&a, &b) in r_s.iter().zip(&r_t) {
        if a < F::zero() || b < F::zero() {
            return Err(SubstructureError::NegativeVariance(a.min(b).to_f64_lossy()));
        }
        let diff = a.sqrt() - b.sqrt();
        acc += diff * diff;
    }
    Ok(acc)
}

/// `‖z_s − z_t‖² + Σ (√r_s − √r_t)²`, the squared 2-Wasserstein distance
/// between diagonal Gaussians.
pub fn cost_matrix_gaussian<F: Scalar>(
    source: &SubstructureSet<F>,
    target: &SubstructureSet<F>,
) -> Result<CostMatrix<F>, SubstructureError> {
    check_dims(source, target)?;
    let mut values = squared_distances(&source.center_representation(), &target.center_representation());
    for (i, cs) in source.components().iter().enumerate() {
        for (j, ct) in target.components().iter().enumerate() {
            values[[i, j]] += bures_diag_sq(cs.cov_diag.view(), ct.cov_diag.view())?;
        }
    }
    Ok(CostMatrix::new(values, CostKind::Gaussian))
}
