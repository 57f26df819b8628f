//! Substructure-level optimal transport for cross-domain adaptation.
//!
//! Each domain is summarized by diagonal Gaussian mixtures (per class on the
//! labeled source, over the whole unlabeled target). Source components are
//! reweighted by a closed-form partial transport plan, coupled to the target
//! components by group-lasso regularized entropic transport, mapped by
//! barycentric projection and labeled with a nearest-neighbor rule; target
//! samples inherit the label of their cluster.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common concrete types.

pub mod datamodel;
pub mod gmm;
pub mod io;
pub mod ot;
pub mod pipeline;
pub mod scalar;
pub(crate) mod serde_array;
pub mod substructure;

pub use scalar::{log_sum_exp, Scalar};

pub type Dataset = datamodel::LabeledDataset<f64>;
pub type Dataset32 = datamodel::LabeledDataset<f32>;
pub type Mixture = gmm::MixtureModel<f64>;
pub type Mixture32 = gmm::MixtureModel<f32>;
pub type Substructures = substructure::SubstructureSet<f64>;
pub type Substructures32 = substructure::SubstructureSet<f32>;
pub type Coupling = ot::Coupling<f64>;
pub type Coupling32 = ot::Coupling<f32>;
pub type Cost = substructure::CostMatrix<f64>;
pub type Cost32 = substructure::CostMatrix<f32>;
pub type Adaptation = pipeline::AdaptationResult<f64>;
pub type Adaptation32 = pipeline::AdaptationResult<f32>;
