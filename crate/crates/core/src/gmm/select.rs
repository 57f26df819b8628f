use std::ops::RangeInclusive;

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{em_fit_with, EmOptions, GmmError, MixtureModel};
use crate::datamodel::LabeledDataset;
use crate::substructure::{DomainTag, SubstructureSet};
use crate::Scalar;

/// `−2 ln L + k ln m` with `k = K·2d + K − 1` free parameters.
pub fn compute_bic<F: Scalar>(model: &MixtureModel<F>) -> F {
    let k_free = F::from_usize_lossy(model.free_parameters());
    let m = F::from_usize_lossy(model.sample_count);
    -F::lit(2.0) * model.log_likelihood + k_free * m.ln()
}

fn restart_seed(seed: u64, restart: usize) -> u64 {
    seed.wrapping_add((restart as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Best-likelihood model over `restarts` seeds (ties keep the earliest).
pub fn fit_best_of_restarts<F: Scalar>(
    data: ArrayView2<'_, F>,
    k: usize,
    restarts: usize,
    rng_seed: u64,
    opts: EmOptions,
) -> Result<MixtureModel<F>, GmmError> {
    let fits: Vec<MixtureModel<F>> = (0..restarts.max(1))
        .into_par_iter()
        .map(|r| em_fit_with(data, k, restart_seed(rng_seed, r), opts))
        .collect::<Result<_, _>>()?;
    Ok(fits
        .into_iter()
        .reduce(|best, m| if m.log_likelihood > best.log_likelihood { m } else { best })
        .expect("at least one restart"))
}

/// BIC per candidate K for one class, and the selected K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSelection {
    pub class: usize,
    pub selected_k: usize,
    pub bic: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SourceFit<F> {
    pub set: SubstructureSet<F>,
    pub per_class: Vec<ClassSelection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetFit<F> {
    pub set: SubstructureSet<F>,
    pub model: MixtureModel<F>,
    /// Component index of every target row.
    pub assignments: Vec<usize>,
}

/// Fits `K ∈ k_range` (clipped to the row count) and returns the model with
/// the smallest BIC; ties keep the smaller K.
pub fn suggest_k<F: Scalar>(
    data: ArrayView2<'_, F>,
    k_range: RangeInclusive<usize>,
    restarts: usize,
    rng_seed: u64,
    opts: EmOptions,
) -> Result<(MixtureModel<F>, Vec<(usize, f64)>), GmmError> {
    let lo = (*k_range.start()).max(1);
    let hi = (*k_range.end()).min(data.nrows());
    if lo > hi {
        return Err(GmmError::EmptyRange);
    }
    let fits: Vec<MixtureModel<F>> = (lo..=hi)
        .into_par_iter()
        .map(|k| fit_best_of_restarts(data, k, restarts, rng_seed, opts))
        .collect::<Result<_, _>>()?;
    let table: Vec<(usize, f64)> = (lo..=hi).zip(&fits).map(|(k, m)| (k, compute_bic(m).to_f64_lossy())).collect();
    let best = (0..fits.len())
        .reduce(|b, i| if table[i].1 < table[b].1 { i } else { b })
        .expect("non-empty range");
    Ok((fits.into_iter().nth(best).expect("index in range"), table))
}

/// One BIC-selected mixture per class, concatenated in class order. Every
/// component carries its class label; masses start uniform.
pub fn fit_source_substructures<F: Scalar>(
    source: &LabeledDataset<F>,
    k_range: RangeInclusive<usize>,
    restarts: usize,
    rng_seed: u64,
    opts: EmOptions,
) -> Result<SourceFit<F>, GmmError> {
    if source.labels().is_none() {
        return Err(GmmError::MissingLabels);
    }
    let min_k = (*k_range.start()).max(1);
    if min_k > *k_range.end() {
        return Err(GmmError::EmptyRange);
    }
    let per_class: Vec<(MixtureModel<F>, ClassSelection)> = (0..source.class_count())
        .into_par_iter()
        .map(|class| {
            let rows = source.class_rows(class);
            if rows.len() < min_k {
                return Err(GmmError::ClassTooSmall { class, n_class: rows.len(), min_k });
            }
            let data = source.features().select(Axis(0), &rows);
            let seed = rng_seed ^ ((class as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03));
            let (model, bic) = suggest_k(data.view(), min_k..=*k_range.end(), restarts, seed, opts)?;
            let selected_k = model.n_components();
            Ok((model, ClassSelection { class, selected_k, bic }))
        })
        .collect::<Result<_, _>>()?;

    let mut components = Vec::new();
    let mut selections = Vec::new();
    for (model, selection) in per_class {
        components.extend(model.components.into_iter().map(|mut c| {
            c.class_label = Some(selection.class);
            c
        }));
        selections.push(selection);
    }
    let set = SubstructureSet::uniform(components, DomainTag::Source).map_err(|_| GmmError::NoData)?;
    Ok(SourceFit { set, per_class: selections })
}

/// One `k_t`-component mixture over all target rows plus the hard assignment
/// of every row.
pub fn fit_target_substructures<F: Scalar>(
    target: &LabeledDataset<F>,
    k_t: usize,
    restarts: usize,
    rng_seed: u64,
    opts: EmOptions,
) -> Result<TargetFit<F>, GmmError> {
    let data = target.features().view();
    let mut model = fit_best_of_restarts(data, k_t, restarts, rng_seed, opts)?;
    for c in &mut model.components {
        c.class_label = None;
    }
    let assignments = model.predict(data);
    let set = SubstructureSet::uniform(model.components.clone(), DomainTag::Target).map_err(|_| GmmError::NoData)?;
    Ok(TargetFit { set, model, assignments })
}
