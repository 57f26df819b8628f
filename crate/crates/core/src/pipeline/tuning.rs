use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_method, target_truth, AdaptationConfig, Method, PipelineError};
use crate::datamodel::split::split_indices;
use crate::datamodel::LabeledDataset;
use crate::Scalar;

/// Validation scores per candidate and the test score of the winner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningOutcome {
    /// `None` where the candidate failed.
    pub validation_accuracy: Vec<Option<f64>>,
    pub best: usize,
    pub test_accuracy: f64,
    pub validation_rows: usize,
    pub test_rows: usize,
}

fn accuracy_on(predicted: &[usize], truth: &[usize], rows: &[usize]) -> f64 {
    let hits = rows.iter().filter(|&&i| predicted[i] == truth[i]).count();
    hits as f64 / rows.len() as f64
}

/// Splits the labeled target into stratified validation and test rows, runs
/// every candidate on the whole unlabeled target, keeps the candidate with
/// the best validation accuracy (earliest on ties) and reports its accuracy
/// on the test rows.
pub fn tune_on_validation<F: Scalar>(
    method: Method,
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    candidates: &[AdaptationConfig],
    validation_fraction: f64,
    split_seed: u64,
) -> Result<TuningOutcome, PipelineError> {
    if candidates.is_empty() {
        return Err(PipelineError::Config("no candidate configurations".into()));
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(PipelineError::Config(format!("validation fraction {validation_fraction} not in (0, 1)")));
    }
    let truth = target_truth(source, target)?
        .ok_or_else(|| PipelineError::Data("tuning needs target labels".into()))?;
    let (validation, test) = split_indices(target, validation_fraction, split_seed)?;
    let hidden = target.unlabeled();

    let runs: Vec<Option<Vec<usize>>> = candidates
        .par_iter()
        .map(|cfg| run_method(method, source, &hidden, cfg).ok().map(|r| r.predicted_labels))
        .collect();
    let validation_accuracy: Vec<Option<f64>> = runs
        .iter()
        .map(|p| p.as_ref().map(|p| accuracy_on(p, &truth, &validation)))
        .collect();
    let best = (0..runs.len())
        .filter(|&i| validation_accuracy[i].is_some())
        .reduce(|b, i| if validation_accuracy[i] > validation_accuracy[b] { i } else { b })
        .ok_or_else(|| PipelineError::Config("every candidate configuration failed".into()))?;
    let test_accuracy = accuracy_on(runs[best].as_ref().expect("best candidate succeeded"), &truth, &test);
    Ok(TuningOutcome {
        validation_accuracy,
        best,
        test_accuracy,
        validation_rows: validation.len(),
        test_rows: test.len(),
    })
}
