use ndarray::{Array2, Axis};
use proptest::prelude::*;
use subot_core::datamodel::{generate_toy, ComponentSpec, LabeledDataset, ToyConfig};
use subot_core::ot::OtParams;
use subot_core::pipeline::{
    fit_substructures, nn_baseline, otda_baseline, run_method, sot_adapt, transport_stage, tune_on_validation,
    AdaptationConfig, AdaptationResult, Method, Variant,
};

fn toy(seed: u64) -> (LabeledDataset<f64>, LabeledDataset<f64>) {
    generate_toy(&ToyConfig::two_class_three_blobs(seed)).unwrap()
}

fn blob(class: usize, mean: [f64; 2], var: f64, count: usize) -> ComponentSpec {
    ComponentSpec { class, mean: mean.to_vec(), cov_diag: vec![var; 2], count }
}

fn same_outputs(a: &AdaptationResult<f64>, b: &AdaptationResult<f64>) -> bool {
    a.predicted_labels == b.predicted_labels
        && a.substructure_labels == b.substructure_labels
        && a.target_assignments == b.target_assignments
        && a.coupling == b.coupling
        && a.source_weights == b.source_weights
        && a.mapped_sources == b.mapped_sources
        && a.selections == b.selections
        && a.evaluation == b.evaluation
}

#[test]
fn toy_default_seed_zero_frozen() {
    let (s, t) = toy(0);
    let cfg = AdaptationConfig::for_classes(2);
    let sot = sot_adapt(&s, &t, &cfg).unwrap();
    let otda = otda_baseline(&s, &t, &cfg).unwrap();
    let nn = nn_baseline(&s, &t, &cfg).unwrap();
    assert_eq!(sot.accuracy(), Some(1.0));
    assert_eq!(otda.accuracy(), Some(111.0 / 150.0));
    assert_eq!(nn.accuracy(), Some(148.0 / 150.0));
    let ks: Vec<usize> = sot.selections.iter().map(|c| c.selected_k).collect();
    assert_eq!(ks, vec![2, 1]);
}

#[test]
fn identical_domains_are_solved_exactly() {
    let (s, _) = toy(3);
    let cfg = AdaptationConfig::for_classes(2);
    for method in [Method::SotC, Method::SotG, Method::Otda] {
        let r = run_method(method, &s, &s, &cfg).unwrap();
        assert_eq!(r.accuracy(), Some(1.0), "{method}");
    }
}

#[test]
fn target_labels_do_not_influence_predictions() {
    let (s, t) = toy(4);
    let cfg = AdaptationConfig::for_classes(2);
    let with = sot_adapt(&s, &t, &cfg).unwrap();
    let without = sot_adapt(&s, &t.unlabeled(), &cfg).unwrap();
    assert_eq!(with.predicted_labels, without.predicted_labels);
    assert!(without.evaluation.is_none());
}

#[test]
fn stage_consistency() {
    let (s, t) = toy(5);
    let cfg = AdaptationConfig::for_classes(2);
    let r = sot_adapt(&s, &t, &cfg).unwrap();
    let coupling = r.coupling.as_ref().unwrap();
    let total_k: usize = r.selections.iter().map(|c| c.selected_k).sum();
    assert_eq!(coupling.plan.nrows(), total_k);
    assert_eq!(coupling.plan.ncols(), cfg.k_t);
    let w_s = r.source_weights.as_ref().unwrap();
    assert_eq!(w_s.len(), total_k);
    assert!((w_s.sum() - 1.0).abs() < 1e-12);
    for (a, b) in coupling.row_marginal.iter().zip(w_s) {
        assert!((a - b).abs() < 1e-8);
    }
    for (i, &p) in r.predicted_labels.iter().enumerate() {
        assert_eq!(p, r.substructure_labels[r.target_assignments[i]]);
    }
    assert!(r.timings.total >= r.timings.source_gmm + r.timings.target_gmm);
}

#[test]
fn reruns_are_identical() {
    let (s, t) = toy(6);
    let cfg = AdaptationConfig { rng_seed: 17, ..AdaptationConfig::for_classes(2) };
    for method in Method::ALL {
        let a = run_method(method, &s, &t, &cfg).unwrap();
        let b = run_method(method, &s, &t, &cfg).unwrap();
        assert!(same_outputs(&a, &b), "{method}");
    }
}

#[test]
fn cached_stage_matches_full_run() {
    let (s, t) = toy(7);
    let cfg = AdaptationConfig::for_classes(2);
    let stage = fit_substructures(&s, &t, &cfg).unwrap();
    for eta in [0.0, 0.5, 5.0] {
        let c = AdaptationConfig { ot: OtParams { eta, ..cfg.ot }, ..cfg };
        assert!(same_outputs(&transport_stage(&stage, &c).unwrap(), &sot_adapt(&s, &t, &c).unwrap()));
    }
}

/// Three well separated classes, one target blob each, `k_t = C`.
#[test]
fn k_t_equal_to_class_count_gives_a_bijection() {
    let config = ToyConfig {
        source: vec![blob(0, [0.0, 0.0], 0.2, 40), blob(1, [8.0, 0.0], 0.2, 40), blob(2, [0.0, 8.0], 0.2, 40)],
        target: vec![blob(0, [1.0, 0.5], 0.3, 30), blob(1, [9.0, 0.5], 0.3, 50), blob(2, [1.0, 8.5], 0.3, 40)],
        rng_seed: 11,
    };
    let (s, t) = generate_toy::<f64>(&config).unwrap();
    let cfg = AdaptationConfig { k_t: 3, ..AdaptationConfig::for_classes(3) };
    let r = sot_adapt(&s, &t, &cfg).unwrap();
    let mut labels = r.substructure_labels.clone();
    labels.sort_unstable();
    assert_eq!(labels, vec![0, 1, 2]);

    // the chosen labeling is the best of all 3! cluster-to-class assignments
    let truth = t.labels().unwrap();
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let score = |p: &[usize]| {
        r.target_assignments.iter().zip(truth).filter(|(&a, &y)| p[a] == y).count()
    };
    let best = perms.iter().map(|p| score(p)).max().unwrap();
    assert_eq!(score(&r.substructure_labels), best);
    assert_eq!(best, truth.len());
}

/// Every blob collapsed onto a single point: all variances sit at the floor.
#[test]
fn zero_variance_data_gives_equal_variants() {
    let point = |x: f64, y: f64, n: usize| std::iter::repeat([x, y]).take(n);
    let src: Vec<[f64; 2]> = point(0.0, 0.0, 20).chain(point(0.0, 6.0, 20)).chain(point(5.0, 3.0, 20)).collect();
    let tgt: Vec<[f64; 2]> = point(1.0, 1.0, 10).chain(point(1.0, 7.0, 10)).chain(point(6.0, 4.0, 30)).collect();
    let to_array = |v: &[[f64; 2]]| Array2::from_shape_fn((v.len(), 2), |(i, j)| v[i][j]);
    let s = LabeledDataset::new(to_array(&src), Some([vec![0; 40], vec![1; 20]].concat())).unwrap();
    let t = LabeledDataset::new(to_array(&tgt), Some([vec![0; 20], vec![1; 30]].concat())).unwrap();
    for k_t in [3, 4] {
        let cfg = AdaptationConfig { k_t, ..AdaptationConfig::for_classes(2) };
        let c = run_method(Method::SotC, &s, &t, &cfg).unwrap();
        let g = run_method(Method::SotG, &s, &t, &cfg).unwrap();
        assert_eq!(c.predicted_labels, g.predicted_labels);
        assert_eq!(c.accuracy(), Some(1.0));
    }
}

#[test]
fn large_entropy_collapses_otda_mapping() {
    let (s, t) = toy(0);
    let spread = |lambda: f64| {
        let cfg = AdaptationConfig { ot: OtParams { lambda, eta: 0.0, ..OtParams::default() }, ..AdaptationConfig::for_classes(2) };
        let r = otda_baseline(&s, &t, &cfg).unwrap();
        r.mapped_sources.unwrap().std_axis(Axis(0), 0.0).sum()
    };
    let (moderate, large) = (spread(1.0), spread(1000.0));
    assert!(large < 0.01 * moderate, "{large} vs {moderate}");
}

#[test]
fn nn_baseline_is_plain_nearest_neighbor() {
    let (s, t) = toy(2);
    let cfg = AdaptationConfig { normalize: false, ..AdaptationConfig::for_classes(2) };
    let r = nn_baseline(&s, &t, &cfg).unwrap();
    let direct =
        subot_core::pipeline::nn_classify(s.features().view(), s.labels().unwrap(), t.features().view()).unwrap();
    assert_eq!(r.predicted_labels, direct);
}

#[test]
fn errors_carry_their_stage() {
    let (s, t) = toy(1);
    let low = AdaptationConfig { k_t: 1, ..AdaptationConfig::for_classes(2) };
    assert_eq!(sot_adapt(&s, &t, &low).unwrap_err().stage(), "config");
    let huge = AdaptationConfig { k_t: 10_000, ..AdaptationConfig::for_classes(2) };
    assert_eq!(sot_adapt(&s, &t, &huge).unwrap_err().stage(), "target_gmm");
    let narrow = LabeledDataset::new(Array2::zeros((5, 3)), None).unwrap();
    assert_eq!(sot_adapt(&s, &narrow, &low).unwrap_err().stage(), "data");
    assert_eq!(sot_adapt(&t.unlabeled(), &t, &low).unwrap_err().stage(), "data");
}

#[test]
fn tuning_selects_best_validation_candidate() {
    let (s, t) = toy(8);
    let base = AdaptationConfig::for_classes(2);
    let candidates: Vec<AdaptationConfig> = [0.01, 1.0, 100.0]
        .iter()
        .map(|&lambda| AdaptationConfig { ot: OtParams { lambda, ..base.ot }, ..base })
        .collect();
    let out = tune_on_validation(Method::Otda, &s, &t, &candidates, 0.3, 1).unwrap();
    assert_eq!(out.validation_rows + out.test_rows, t.n_samples());
    let best = out.validation_accuracy[out.best].unwrap();
    assert!(out.validation_accuracy.iter().all(|a| a.unwrap() <= best));
    assert!((0.0..=1.0).contains(&out.test_accuracy));
    assert!(tune_on_validation(Method::Otda, &s, &t.unlabeled(), &candidates, 0.3, 1).is_err());
}

#[test]
fn variant_field_is_overridden_by_method() {
    let (s, t) = toy(9);
    let cfg = AdaptationConfig { variant: Variant::SotG, ..AdaptationConfig::for_classes(2) };
    assert_eq!(run_method(Method::SotC, &s, &t, &cfg).unwrap().method, Method::SotC);
    assert_eq!(sot_adapt(&s, &t, &cfg).unwrap().method, Method::SotG);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 6, ..ProptestConfig::default() })]

    /// Scaling features by `s` and every entropic or penalty weight by `s²`
    /// scales the whole transport objective, so labels cannot change.
    #[test]
    fn joint_scaling_leaves_labels_unchanged(seed in 0u64..1000, scale in prop::sample::select(vec![0.5, 2.0, 3.0])) {
        let (s, t) = toy(seed);
        let cfg = AdaptationConfig { normalize: false, rng_seed: seed, ..AdaptationConfig::for_classes(2) };
        let base = sot_adapt(&s, &t, &cfg).unwrap();
        let s2 = s.map_features(s.features() * scale).unwrap();
        let t2 = t.map_features(t.features() * scale).unwrap();
        let sq = scale * scale;
        let ot = OtParams { lambda1: cfg.ot.lambda1 * sq, lambda: cfg.ot.lambda * sq, eta: cfg.ot.eta * sq, ..cfg.ot };
        let scaled = sot_adapt(&s2, &t2, &AdaptationConfig { ot, ..cfg }).unwrap();
        prop_assert_eq!(base.predicted_labels, scaled.predicted_labels);
    }
}
