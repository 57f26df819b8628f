use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::Scalar;

/// Label of the Euclidean-nearest training row for every query row; ties go
/// to the lowest training index.
pub fn nn_classify<F: Scalar>(
    train: ArrayView2<'_, F>,
    train_labels: &[usize],
    query: ArrayView2<'_, F>,
) -> Result<Vec<usize>, PipelineError> {
    if train.nrows() == 0 || train_labels.is_empty() {
        return Err(PipelineError::EmptyTrainingSet);
    }
    if train_labels.len() != train.nrows() {
        return Err(PipelineError::LengthMismatch { predicted: train.nrows(), truth: train_labels.len() });
    }
    if train.ncols() != query.ncols() {
        return Err(PipelineError::FeatureMismatch { train: train.ncols(), query: query.ncols() });
    }
    Ok((0..query.nrows())
        .into_par_iter()
        .map(|k| {
            let q = query.row(k);
            let mut best = (F::infinity(), 0);
            for (i, t) in train.outer_iter().enumerate() {
                let d = q.iter().zip(&t).fold(F::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b));
                if d < best.0 {
                    best = (d, i);
                }
            }
            train_labels[best.1]
        })
        .collect())
}

/// Accuracy and confusion counts (`confusion[truth][predicted]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
}

/// Fraction of exact matches. Class ids at or above `class_count` widen the
/// confusion matrix rather than being dropped.
pub fn evaluate_accuracy(predicted: &[usize], truth: &[usize], class_count: usize) -> Result<Evaluation, PipelineError> {
    if predicted.len() != truth.len() {
        return Err(PipelineError::LengthMismatch { predicted: predicted.len(), truth: truth.len() });
    }
    let c = predicted.iter().chain(truth).map(|&y| y + 1).max().unwrap_or(0).max(class_count);
    let mut confusion = vec![vec![0usize; c]; c];
    let mut hits = 0usize;
    for (&p, &t) in predicted.iter().zip(truth) {
        confusion[t][p] += 1;
        hits += usize::from(p == t);
    }
    let accuracy = if truth.is_empty() { 0.0 } else { hits as f64 / truth.len() as f64 };
    Ok(Evaluation { accuracy, confusion })
}
