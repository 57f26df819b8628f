use super::{
    check_domains, evaluate_accuracy, nn_classify, target_truth, timed, AdaptationConfig, AdaptationResult,
    PipelineError, StageTimings, Variant, ZScore,
};
use crate::datamodel::LabeledDataset;
use crate::gmm::{fit_source_substructures, fit_target_substructures, SourceFit, TargetFit};
use crate::ot::{barycentric_map, gcg_solve, partial_ot_source_weights};
use crate::substructure::{cost_matrix_center, cost_matrix_gaussian};
use crate::Scalar;

const TARGET_SEED_OFFSET: u64 = 0x7A26_E3B1_0F5C_94D7;

/// Mixture fits of both domains, reusable across transport settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstructureStage<F> {
    pub normalizer: Option<ZScore<F>>,
    pub source: SourceFit<F>,
    pub target: TargetFit<F>,
    pub class_count: usize,
    /// Target ground truth in source class ids, when available.
    pub truth: Option<Vec<usize>>,
    pub timings: StageTimings,
}

/// Normalization plus the per-class source mixtures and the target mixture.
/// Target labels, if any, are kept aside for evaluation only.
pub fn fit_substructures<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    config: &AdaptationConfig,
) -> Result<SubstructureStage<F>, PipelineError> {
    check_domains(source, target)?;
    let class_count = source.class_count();
    config.validate(class_count)?;
    let truth = target_truth(source, target)?;
    let mut timings = StageTimings::default();

    let (normalizer, source_n, target_n) = timed(&mut timings.normalize, || {
        if config.normalize {
            let z = ZScore::fit(source.features());
            let s = source.map_features(z.apply(source.features()));
            let t = target.unlabeled().map_features(z.apply(target.features()));
            (Some(z), s, t)
        } else {
            (None, Ok(source.clone()), Ok(target.unlabeled()))
        }
    });
    let (source_n, target_n) = (source_n?, target_n?);

    let range = config.k_range.0..=config.k_range.1;
    let source_fit = timed(&mut timings.source_gmm, || {
        fit_source_substructures(&source_n, range, config.restarts, config.rng_seed, config.em)
    })
    .map_err(PipelineError::SourceFit)?;
    let target_seed = config.rng_seed.wrapping_add(TARGET_SEED_OFFSET);
    let target_fit = timed(&mut timings.target_gmm, || {
        fit_target_substructures(&target_n, config.k_t, config.restarts, target_seed, config.em)
    })
    .map_err(PipelineError::TargetFit)?;

    Ok(SubstructureStage { normalizer, source: source_fit, target: target_fit, class_count, truth, timings })
}

/// Weighting, coupling, mapping and labeling on fitted substructures. Only
/// `variant` and `ot` are read from the config.
pub fn transport_stage<F: Scalar>(
    stage: &SubstructureStage<F>,
    config: &AdaptationConfig,
) -> Result<AdaptationResult<F>, PipelineError> {
    config.ot.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let mut timings = stage.timings;
    let (src, tgt) = (&stage.source.set, &stage.target.set);

    let cost = timed(&mut timings.cost, || match config.variant {
        Variant::SotC => cost_matrix_center(src, tgt),
        Variant::SotG => cost_matrix_gaussian(src, tgt),
    })
    .map_err(PipelineError::Cost)?;

    let w_t = tgt.masses().clone();
    let (w_s, _) = timed(&mut timings.weighting, || {
        partial_ot_source_weights(&cost, &w_t, F::lit(config.ot.lambda1))
    })
    .map_err(PipelineError::Weighting)?;

    let source_labels: Vec<usize> = src
        .class_labels()
        .into_iter()
        .map(|l| l.ok_or_else(|| PipelineError::Data("source substructure without class".into())))
        .collect::<Result<_, _>>()?;
    let coupling = timed(&mut timings.coupling, || gcg_solve(&cost, &w_s, &w_t, &source_labels, &config.ot))
        .map_err(PipelineError::Coupling)?;

    let target_repr = match config.variant {
        Variant::SotC => tgt.center_representation(),
        Variant::SotG => tgt.gaussian_representation(),
    };
    let mapped = timed(&mut timings.mapping, || barycentric_map(&coupling, &target_repr, Some(&cost)))
        .map_err(PipelineError::Mapping)?;

    let substructure_labels = timed(&mut timings.labeling, || {
        nn_classify(mapped.mapped.view(), &source_labels, target_repr.view())
    })?;
    let assignments = stage.target.assignments.clone();
    let predicted_labels: Vec<usize> = assignments.iter().map(|&a| substructure_labels[a]).collect();

    let evaluation = stage
        .truth
        .as_ref()
        .map(|truth| evaluate_accuracy(&predicted_labels, truth, stage.class_count))
        .transpose()?;
    timings.total = timings.stages().iter().map(|(_, s)| s).sum();

    Ok(AdaptationResult {
        method: config.variant.into(),
        class_count: stage.class_count,
        predicted_labels,
        substructure_labels,
        target_assignments: assignments,
        coupling: Some(coupling),
        source_weights: Some(w_s),
        mapped_sources: Some(mapped.mapped),
        fallback_rows: mapped.fallback_rows,
        selections: stage.source.per_class.clone(),
        timings,
        evaluation,
    })
}

/// The full substructure pipeline.
pub fn sot_adapt<F: Scalar>(
    source: &LabeledDataset<F>,
    target: &LabeledDataset<F>,
    config: &AdaptationConfig,
) -> Result<AdaptationResult<F>, PipelineError> {
    let stage = fit_substructures(source, target, config)?;
    transport_stage(&stage, config)
}
