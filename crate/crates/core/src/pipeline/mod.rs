//! End-to-end adaptation: the substructure pipeline, the sample-level
//! transport baseline, nearest-neighbor classification and evaluation.

mod baseline;
mod classify;
mod normalize;
mod sot;
mod tuning;

pub use baseline::{nn_baseline, otda_baseline, run_method};
pub use classify::{evaluate_accuracy, nn_classify, Evaluation};
pub use normalize::ZScore;
pub use sot::{fit_substructures, sot_adapt, transport_stage, SubstructureStage};
pub use tuning::{tune_on_validation, TuningOutcome};

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datamodel::{DataError, LabeledDataset};
use crate::gmm::{ClassSelection, EmOptions, GmmError};
use crate::ot::{Coupling, CouplingSummary, OtError, OtParams};
use crate::substructure::SubstructureError;
use crate::Scalar;

/// Every failure names the stage it came from.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("input data: {0}")]
    Data(String),
    #[error("source substructures: {0}")]
    SourceFit(GmmError),
    #[error("target substructures: {0}")]
    TargetFit(GmmError),
    #[error("cost matrix: {0}")]
    Cost(SubstructureError),
    #[error("source weighting: {0}")]
    Weighting(OtError),
    #[error("coupling: {0}")]
    Coupling(OtError),
    #[error("barycentric mapping: {0}")]
    Mapping(OtError),
    #[error("classification: training set is empty")]
    EmptyTrainingSet,
    #[error("classification: train has {train} features, query has {query}")]
    FeatureMismatch { train: usize, query: usize },
    #[error("evaluation: {predicted} predictions for {truth} labels")]
    LengthMismatch { predicted: usize, truth: usize },
}

impl PipelineError {
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Data(_) => "data",
            Self::SourceFit(_) => "source_gmm",
            Self::TargetFit(_) => "target_gmm",
            Self::Cost(_) => "cost",
            Self::Weighting(_) => "weighting",
            Self::Coupling(_) => "coupling",
            Self::Mapping(_) => "mapping",
            Self::EmptyTrainingSet | Self::FeatureMismatch { .. } => "labeling",
            Self::LengthMismatch { .. } => "evaluation",
        }
    }
}

impl From<DataError> for PipelineError {
    fn from(e: DataError) -> Self {
        Self::Data(e.to_string())
    }
}

/// Substructure representation used by the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Cluster centers, squared Euclidean cost.
    #[default]
    SotC,
    /// Diagonal Gaussians, squared 2-Wasserstein cost.
    SotG,
}

/// Any of the runnable adaptation methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SotC,
    SotG,
    Otda,
    Nn,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::SotC, Method::SotG, Method::Otda, Method::Nn];

    pub fn name(self) -> &'static str {
        match self {
            Method::SotC => "sot_c",
            Method::SotG => "sot_g",
            Method::Otda => "otda",
            Method::Nn => "nn",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected sot_c, sot_g, otda or nn)"))
    }
}

impl From<Variant> for Method {
    fn from(v: Variant) -> Self {
        match v {
            Variant::SotC => Method::SotC,
            Variant::SotG => Method::SotG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationConfig {
    pub variant: Variant,
    /// Number of target substructures.
    pub k_t: usize,
    /// Candidate component counts per source class, inclusive.
    pub k_range: (usize, usize),
    pub ot: OtParams,
    /// EM restarts per candidate K; the best likelihood is kept.
    pub restarts: usize,
    pub rng_seed: u64,
    /// z-score both domains with source statistics before clustering.
    pub normalize: bool,
    pub em: EmOptions,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            variant: Variant::SotC,
            k_t: 8,
            k_range: (1, 8),
            ot: OtParams::default(),
            restarts: 5,
            rng_seed: 0,
            normalize: true,
            em: EmOptions::default(),
        }
    }
}

impl AdaptationConfig {
    /// Defaults with `k_t = 4·C`.
    pub fn for_classes(class_count: usize) -> Self {
        Self { k_t: 4 * class_count.max(1), ..Self::default() }
    }

    pub fn validate(&self, class_count: usize) -> Result<(), PipelineError> {
        if self.k_t < class_count {
            return Err(PipelineError::Config(format!(
                "k_t = {} is below the class count {class_count}",
                self.k_t
            )));
        }
        if self.k_range.0 == 0 || self.k_range.0 > self.k_range.1 {
            return Err(PipelineError::Config(format!("bad k range {:?}", self.k_range)));
        }
        if self.restarts == 0 {
            return Err(PipelineError::Config("restarts must be at least 1".into()));
        }
        self.ot.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }
}

/// Wall-clock seconds per stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StageTimings {
    pub normalize: f64,
    pub source_gmm: f64,
    pub target_gmm: f64,
    pub cost: f64,
    pub weighting: f64,
    pub coupling: f64,
    pub mapping: f64,
    pub labeling: f64,
    pub total: f64,
}

impl StageTimings {
    /// Pairs of (stage name, seconds), total excluded.
    pub fn stages(&self) -> [(&'static str, f64); 8] {
        [
            ("normalize", self.normalize),
            ("source_gmm", self.source_gmm),
            ("target_gmm", self.target_gmm),
            ("cost", self.cost),
            ("weighting", self.weighting),
            ("coupling", self.coupling),
            ("mapping", self.mapping),
            ("labeling", self.labeling),
        ]
    }
}

pub(crate) fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed().as_secs_f64();
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptationResult<F> {
    pub method: Method,
    pub class_count: usize,
    /// One class id per target row.
    pub predicted_labels: Vec<usize>,
    /// Class id of every target substructure (every target row for the
    /// sample-level methods).
    pub substructure_labels: Vec<usize>,
    /// Substructure index of every target row.
    pub target_assignments: Vec<usize>,
    pub coupling: Option<Coupling<F>>,
    /// Row marginal fed to the coupling.
    pub source_weights: Option<Array1<F>>,
    pub mapped_sources: Option<Array2<F>>,
    /// Source rows without transported mass, placed on their cheapest target.
    pub fallback_rows: Vec<usize>,
    pub selections: Vec<ClassSelection>,
    pub timings: StageTimings,
    /// Present when the target carried ground-truth labels.
    pub evaluation: Option<Evaluation>,
}

/// JSON form of an [`AdaptationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub class_count: usize,
    pub label_names: Option<Vec<i64>>,
    pub predicted_labels: Vec<usize>,
    pub substructure_labels: Vec<usize>,
    pub target_assignments: Vec<usize>,
    pub source_weights: Option<Vec<f64>>,
    pub mapped_sources: Option<Vec<Vec<f64>>>,
    pub fallback_rows: Vec<usize>,
    pub selections: Vec<ClassSelection>,
    pub coupling: Option<CouplingSummary>,
    pub accuracy: Option<f64>,
    pub confusion: Option<Vec<Vec<usize>>>,
    pub timings: StageTimings,
}

impl<F: Scalar> AdaptationResult<F> {
    pub fn accuracy(&self) -> Option<f64> {
        self.evaluation.as_ref().map(|e| e.accuracy)
    }

    pub fn report(&self, label_names: Option<&[i64]>) -> RunReport {
        RunReport {
            method: self.method,
            class_count: self.class_count,
            label_names: label_names.map(<[i64]>::to_vec),
            predicted_labels: self.predicted_labels.clone(),
            substructure_labels: self.substructure_labels.clone(),
            target_assignments: self.target_assignments.clone(),
            source_weights: self.source_weights.as_ref().map(|w| w.iter().map(|v| v.to_f64_lossy()).collect()),
            mapped_sources: self
                .mapped_sources
                .as_ref()
                .map(|m| m.rows().into_iter().map(|r| r.iter().map(|v| v.to_f64_lossy()).collect()).collect()),
            fallback_rows: self.fallback_rows.clone(),
            selections: self.selections.clone(),
            coupling: self.coupling.as_ref().map(Coupling::summary),
            accuracy: self.accuracy(),
            confusion: self.evaluation.as_ref().map(|e| e.confusion.clone()),
            timings: self.timings,
        }
    }
}

/// Target ground truth expressed in source class ids, if the target has labels.
pub(crate) fn target_truth<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
) -> Result<Option<Vec<usize>>, PipelineError> {
    match target.aligned_labels(source.label_names()) {
        None => Ok(None),
        Some(Err(e)) => Err(e.into()),
        Some(Ok(truth)) => {
            let c = source.class_count();
            if let Some(&bad) = truth.iter().find(|&&y| y >= c) {
                return Err(PipelineError::Data(format!("target label {bad} out of range for {c} source classes")));
            }
            Ok(Some(truth))
        }
    }
}

pub(crate) fn check_domains<'a, F: Scalar>(
    source: &'a LabeledDataset<F>,
    target: &LabeledDataset<F>,
) -> Result<&'a [usize], PipelineError> {
    let labels = source.labels().ok_or_else(|| PipelineError::Data("source dataset has no labels".into()))?;
    if source.n_features() != target.n_features() {
        return Err(PipelineError::Data(format!(
            "source has {} features, target has {}",
            source.n_features(),
            target.n_features()
        )));
    }
    Ok(labels)
}
