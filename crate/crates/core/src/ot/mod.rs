//! Entropic optimal transport solvers.
//!
//! Objective convention throughout: `⟨π, C⟩ + λ Σ π ln π (+ η Ω(π))`.

mod barycentric;
mod gcg;
mod partial;
mod sinkhorn;

pub use barycentric::{barycentric_map, BarycentricMap};
pub use gcg::{entropic_objective, gcg_solve, group_lasso_gradient, group_lasso_value, regularized_objective};
pub use partial::partial_ot_source_weights;
pub use sinkhorn::sinkhorn;

use std::io::{self, Write};

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OtError {
    #[error("shape mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid marginal: {0}")]
    InvalidMarginal(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("numerical underflow in column {column} of the partial transport kernel")]
    NumericalUnderflow { column: usize },
    #[error("row {0} of the coupling carries no mass")]
    ZeroMassRow(usize),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

/// Solver hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OtParams {
    /// Entropic weight of the source-weighting step.
    pub lambda1: f64,
    /// Entropic weight of the coupling step.
    pub lambda: f64,
    /// Group-lasso weight.
    pub eta: f64,
    pub max_outer: usize,
    pub max_sinkhorn: usize,
    pub tol: f64,
}

impl Default for OtParams {
    fn default() -> Self {
        Self { lambda1: 1.0, lambda: 1.0, eta: 0.5, max_outer: 50, max_sinkhorn: 10_000, tol: 1e-9 }
    }
}

impl OtParams {
    pub fn validate(&self) -> Result<(), OtError> {
        let bad = |m: &str| Err(OtError::InvalidParams(m.into()));
        if !(self.lambda1 > 0.0 && self.lambda1.is_finite()) {
            return bad("lambda1 must be positive");
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be positive");
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad("eta must be non-negative");
        }
        if !(self.tol > 0.0) {
            return bad("tol must be positive");
        }
        if self.max_sinkhorn == 0 {
            return bad("max_sinkhorn must be at least 1");
        }
        Ok(())
    }
}

/// Transport plan with its marginals and solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<F> {
    pub plan: Array2<F>,
    pub row_marginal: Array1<F>,
    pub col_marginal: Array1<F>,
    /// Objective value after each outer iteration (one entry for plain Sinkhorn).
    pub objective_trace: Vec<F>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest marginal violation at exit.
    pub residual: F,
}

/// JSON sidecar describing a coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSummary {
    pub rows: usize,
    pub cols: usize,
    pub total_mass: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub residual: f64,
}

impl<F: Scalar> Coupling<F> {
    pub(crate) fn from_plan(plan: Array2<F>, objective_trace: Vec<F>, iterations: usize, converged: bool, residual: F) -> Self {
        let row_marginal = plan.sum_axis(Axis(1));
        let col_marginal = plan.sum_axis(Axis(0));
        Self { plan, row_marginal, col_marginal, objective_trace, iterations, converged, residual }
    }

    pub fn total_mass(&self) -> F {
        self.plan.sum()
    }

    /// Turns a flagged non-converged result into an error.
    pub fn ensure_converged(self) -> Result<Self, OtError> {
        if self.converged {
            Ok(self)
        } else {
            Err(OtError::NonConvergence { iterations: self.iterations, residual: self.residual.to_f64_lossy() })
        }
    }

    pub fn summary(&self) -> CouplingSummary {
        CouplingSummary {
            rows: self.plan.nrows(),
            cols: self.plan.ncols(),
            total_mass: self.total_mass().to_f64_lossy(),
            objective_trace: self.objective_trace.iter().map(|v| v.to_f64_lossy()).collect(),
            iterations: self.iterations,
            converged: self.converged,
            residual: self.residual.to_f64_lossy(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        crate::io::write_matrix_csv(out, &self.plan, "t")
    }
}

pub(crate) fn check_probability<F: Scalar>(name: &str, w: &Array1<F>) -> Result<(), OtError> {
    if w.is_empty() {
        return Err(OtError::InvalidMarginal(format!("{name} is empty")));
    }
    if w.iter().any(|v| !(*v >= F::zero()) || !v.is_finite()) {
        return Err(OtError::InvalidMarginal(format!("{name} has a negative or non-finite entry")));
    }
    let total = w.sum();
    if (total - F::one()).abs() > F::tolerance_floor(1e-8) {
        return Err(OtError::InvalidMarginal(format!("{name} sums to {total}, not 1")));
    }
    Ok(())
}
