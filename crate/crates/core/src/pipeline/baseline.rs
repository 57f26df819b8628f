use ndarray::{Array1, Array2};

use super::{
    check_domains, evaluate_accuracy, nn_classify, sot_adapt, target_truth, timed, AdaptationConfig,
    AdaptationResult, Method, PipelineError, StageTimings, Variant, ZScore,
};
use crate::datamodel::LabeledDataset;
use crate::ot::{barycentric_map, gcg_solve};
use crate::substructure::{squared_distances, CostKind, CostMatrix};
use crate::Scalar;

fn prepare<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    normalize: bool,
    timings: &mut StageTimings,
) -> (Array2<F>, Array2<F>) {
    timed(&mut timings.normalize, || {
        if normalize {
            let z = ZScore::fit(source.features());
            (z.apply(source.features()), z.apply(target.features()))
        } else {
            (source.features().clone(), target.features().clone())
        }
    })
}

fn finish<F: Scalar>(
    method: Method,
    class_count: usize,
    predicted_labels: Vec<usize>,
    truth: Option<Vec<usize>>,
    mut timings: StageTimings,
) -> Result<AdaptationResult<F>, PipelineError> {
    let evaluation = truth
        .map(|t| evaluate_accuracy(&predicted_labels, &t, class_count))
        .transpose()?;
    timings.total = timings.stages().iter().map(|(_, s)| s).sum();
    let n = predicted_labels.len();
    Ok(AdaptationResult {
        method,
        class_count,
        substructure_labels: predicted_labels.clone(),
        predicted_labels,
        target_assignments: (0..n).collect(),
        coupling: None,
        source_weights: None,
        mapped_sources: None,
        fallback_rows: Vec::new(),
        selections: Vec::new(),
        timings,
        evaluation,
    })
}

/// Sample-level transport: uniform masses on the raw rows, squared Euclidean
/// cost, the same regularized coupling as the substructure pipeline,
/// barycentric mapping of the source rows and 1-NN of the target rows
/// against the mapped sources. Uses `ot` and `normalize` from the config.
pub fn otda_baseline<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    config: &AdaptationConfig,
) -> Result<AdaptationResult<F>, PipelineError> {
    let labels = check_domains(source, target)?;
    config.ot.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let truth = target_truth(source, target)?;
    let mut timings = StageTimings::default();
    let (xs, xt) = prepare(source, target, config.normalize, &mut timings);

    let cost = timed(&mut timings.cost, || CostMatrix::new(squared_distances(&xs, &xt), CostKind::Sample));
    let (m, n) = cost.shape();
    let w_s = Array1::from_elem(m, F::one() / F::from_usize_lossy(m));
    let w_t = Array1::from_elem(n, F::one() / F::from_usize_lossy(n));
    let coupling = timed(&mut timings.coupling, || gcg_solve(&cost, &w_s, &w_t, labels, &config.ot))
        .map_err(PipelineError::Coupling)?;
    let mapped = timed(&mut timings.mapping, || barycentric_map(&coupling, &xt, Some(&cost)))
        .map_err(PipelineError::Mapping)?;
    let predicted = timed(&mut timings.labeling, || nn_classify(mapped.mapped.view(), labels, xt.view()))?;

    let mut result = finish(Method::Otda, source.class_count(), predicted, truth, timings)?;
    result.coupling = Some(coupling);
    result.source_weights = Some(w_s);
    result.mapped_sources = Some(mapped.mapped);
    result.fallback_rows = mapped.fallback_rows;
    Ok(result)
}

/// No adaptation: 1-NN of every target row against the source rows.
pub fn nn_baseline<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    config: &AdaptationConfig,
) -> Result<AdaptationResult<F>, PipelineError> {
    let labels = check_domains(source, target)?;
    let truth = target_truth(source, target)?;
    let mut timings = StageTimings::default();
    let (xs, xt) = prepare(source, target, config.normalize, &mut timings);
    let predicted = timed(&mut timings.labeling, || nn_classify(xs.view(), labels, xt.view()))?;
    finish(Method::Nn, source.class_count(), predicted, truth, timings)
}

/// Dispatches on `method`; the substructure variants override `config.variant`.
pub fn run_method<F: Scalar>(
    method: Method,
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    config: &AdaptationConfig,
) -> Result<AdaptationResult<F>, PipelineError> {
    match method {
        Method::SotC => sot_adapt(source, target, &AdaptationConfig { variant: Variant::SotC, ..*config }),
        Method::SotG => sot_adapt(source, target, &AdaptationConfig { variant: Variant::SotG, ..*config }),
        Method::Otda => otda_baseline(source, target, config),
        Method::Nn => nn_baseline(source, target, config),
    }
}
