use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{DataError, LabeledDataset};
use crate::Scalar;

/// Splits the target into (validation, test). The validation side receives
/// `round(fraction * n)` rows; with labels, every class is split
/// proportionally (largest-remainder rounding) and must survive on both sides.
pub fn split_target<F: Scalar>(
    target: &LabeledDataset<F>,
    fraction: f64,
    rng_seed: u64,
) -> Result<(LabeledDataset<F>, LabeledDataset<F>), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let (validation, test) = split_indices(target, fraction, rng_seed)?;
    Ok((target.select_rows(&validation)?, target.select_rows(&test)?))
}

/// Row indices of the (validation, test) split, each ascending.
pub(crate) fn split_indices<F: Scalar>(
    target: &LabeledDataset<F>,
    fraction: f64,
    rng_seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), DataError> {
    let n = target.n_samples();
    let wanted = (fraction * n as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let groups: Vec<Vec<usize>> = match target.labels() {
        Some(_) => (0..target.class_count()).map(|c| target.class_rows(c)).collect(),
        None => vec![(0..n).collect()],
    };
    let quotas: Vec<f64> = groups.iter().map(|g| fraction * g.len() as f64).collect();
    let mut alloc: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut extra = wanted.saturating_sub(alloc.iter().sum());
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &g in order.iter().cycle().take(order.len() * 2) {
        if extra == 0 {
            break;
        }
        if alloc[g] < groups[g].len() {
            alloc[g] += 1;
            extra -= 1;
        }
    }

    let mut validation = Vec::with_capacity(wanted);
    let mut test = Vec::with_capacity(n - wanted);
    for (g, rows) in groups.iter().enumerate() {
        if alloc[g] == 0 || alloc[g] == rows.len() {
            let what = if target.labels().is_some() { format!("class {g}") } else { "dataset".into() };
            return Err(DataError::DegenerateSplit(format!(
                "{what} with {} rows cannot populate both sides",
                rows.len()
            )));
        }
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut rng);
        validation.extend_from_slice(&shuffled[..alloc[g]]);
        test.extend_from_slice(&shuffled[alloc[g]..]);
    }
    validation.sort_unstable();
    test.sort_unstable();
    Ok((validation, test))
}
