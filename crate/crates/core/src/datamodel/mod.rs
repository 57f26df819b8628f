//! Datasets, CSV ingestion, raw-signal features, synthetic toy data and
//! target splitting.

mod csv_io;
mod features;
pub(crate) mod split;
mod toy;

pub use csv_io::{detect_header, load_dataset_csv, load_dataset_csv_with, write_dataset_csv, CsvOptions};
pub use features::{
    combine_axes, extract_features, recording_features, sliding_windows, RawSignalWindow,
    SensorKind, WindowSpec, FEATURE_COUNT, FEATURE_NAMES,
};
pub use split::split_target;
pub use toy::{generate_toy, ComponentSpec, ToyConfig};

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("ragged rows: line {line} has {found} columns, expected {expected}")]
    RaggedRows { line: u64, found: usize, expected: usize },
    #[error("non-numeric cell at line {line}, column {col}: {cell:?}")]
    NonNumericCell { line: u64, col: usize, cell: String },
    #[error("non-finite value at line {line}, column {col}")]
    NonFiniteValue { line: u64, col: usize },
    #[error("empty dataset")]
    Empty,
    #[error("dataset needs at least one feature column")]
    NoFeatures,
    #[error("label {label} out of range for {class_count} classes")]
    LabelOutOfRange { label: usize, class_count: usize },
    #[error("class {0} has no samples")]
    MissingClass(usize),
    #[error("labels length {labels} does not match row count {rows}")]
    LabelLengthMismatch { labels: usize, rows: usize },
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("window too short: {0} samples, need at least 2")]
    WindowTooShort(usize),
    #[error("window must have 3 axes, got {0}")]
    WrongAxisCount(usize),
    #[error("sampling rate must be positive")]
    BadSamplingRate,
    #[error("invalid toy config: {0}")]
    InvalidToyConfig(String),
    #[error("degenerate split: {0}")]
    DegenerateSplit(String),
    #[error("split fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("label value {0} does not occur in the reference dataset")]
    UnknownLabel(i64),
}

/// Feature matrix with optional dense class labels `0..class_count`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct LabeledDataset<F> {
    #[serde(with = "crate::serde_array::matrix")]
    features: Array2<F>,
    labels: Option<Vec<usize>>,
    class_count: usize,
    /// Original label value for each dense class id, when loaded from a file.
    label_names: Option<Vec<i64>>,
}

impl<F: Scalar> LabeledDataset<F> {
    /// Builds a dataset, inferring `class_count` as `max(label) + 1`.
    pub fn new(features: Array2<F>, labels: Option<Vec<usize>>) -> Result<Self, DataError> {
        let class_count = labels
            .as_ref()
            .map_or(0, |l| l.iter().max().map_or(0, |m| m + 1));
        Self::with_class_count(features, labels, class_count)
    }

    pub fn with_class_count(
        features: Array2<F>,
        labels: Option<Vec<usize>>,
        class_count: usize,
    ) -> Result<Self, DataError> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(DataError::Empty);
        }
        if d == 0 {
            return Err(DataError::NoFeatures);
        }
        if let Some(((row, col), _)) = features.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::NonFiniteFeature { row, col });
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(DataError::LabelLengthMismatch { labels: labels.len(), rows: n });
            }
            let mut seen = vec![false; class_count];
            for &label in labels {
                if label >= class_count {
                    return Err(DataError::LabelOutOfRange { label, class_count });
                }
                seen[label] = true;
            }
            if let Some(missing) = seen.iter().position(|s| !s) {
                return Err(DataError::MissingClass(missing));
            }
        }
        Ok(Self { features, labels, class_count, label_names: None })
    }

    pub fn with_label_names(mut self, names: Vec<i64>) -> Self {
        self.label_names = Some(names);
        self
    }

    pub fn features(&self) -> &Array2<F> {
        &self.features
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn label_names(&self) -> Option<&[i64]> {
        self.label_names.as_deref()
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    /// Same rows with the labels hidden.
    pub fn unlabeled(&self) -> Self {
        Self {
            features: self.features.clone(),
            labels: None,
            class_count: self.class_count,
            label_names: self.label_names.clone(),
        }
    }

    /// Rows belonging to `class`, in original order.
    pub fn class_rows(&self, class: usize) -> Vec<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().enumerate().filter(|(_, &y)| y == class).map(|(i, _)| i).collect())
            .unwrap_or_default()
    }

    /// Sub-dataset on the given rows. Class count is kept; the missing-class
    /// invariant is checked again.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self, DataError> {
        let features = self.features.select(Axis(0), rows);
        let labels = self.labels.as_ref().map(|l| rows.iter().map(|&i| l[i]).collect());
        let mut out = Self::with_class_count(features, labels, self.class_count)?;
        out.label_names = self.label_names.clone();
        Ok(out)
    }

    /// Labels re-expressed as class ids of a dataset whose original label
    /// values are `reference`. Without stored names the ids are used as is.
    pub fn aligned_labels(&self, reference: Option<&[i64]>) -> Option<Result<Vec<usize>, DataError>> {
        let labels = self.labels.as_ref()?;
        let (Some(own), Some(reference)) = (self.label_names.as_ref(), reference) else {
            return Some(Ok(labels.clone()));
        };
        let lookup: Result<Vec<usize>, DataError> = own
            .iter()
            .map(|name| reference.iter().position(|r| r == name).ok_or(DataError::UnknownLabel(*name)))
            .collect();
        Some(lookup.map(|map| labels.iter().map(|&y| map[y]).collect()))
    }

    /// Replaces the feature matrix, keeping labels (used by normalization).
    pub fn map_features(&self, features: Array2<F>) -> Result<Self, DataError> {
        let mut out = Self::with_class_count(features, self.labels.clone(), self.class_count)?;
        out.label_names = self.label_names.clone();
        Ok(out)
    }
}
