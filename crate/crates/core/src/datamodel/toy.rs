use std::collections::BTreeSet;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataError, LabeledDataset};
use crate::Scalar;

/// One diagonal Gaussian blob of the synthetic generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentSpec {
    pub class: usize,
    pub mean: Vec<f64>,
    pub cov_diag: Vec<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyConfig {
    pub source: Vec<ComponentSpec>,
    pub target: Vec<ComponentSpec>,
    pub rng_seed: u64,
}

/// Offset applied to every target mean in the default layout.
pub const DEFAULT_TARGET_SHIFT: [f64; 2] = [1.5, 1.0];
/// Factor applied to every target variance in the default layout.
pub const DEFAULT_TARGET_COV_SCALE: f64 = 1.5;

impl Default for ToyConfig {
    fn default() -> Self {
        Self::two_class_three_blobs(0)
    }
}

impl ToyConfig {
    /// Three blobs and two classes; class 0 owns two of them. The target reuses
    /// the blobs with shifted means, inflated variances and different blob sizes.
    pub fn two_class_three_blobs(rng_seed: u64) -> Self {
        let means = [[0.0, 0.0], [0.0, 6.0], [5.0, 3.0]];
        let classes = [0, 0, 1];
        let var = 0.6;
        let source_counts = [50, 50, 50];
        let target_counts = [30, 30, 90];
        let source = (0..3)
            .map(|i| ComponentSpec {
                class: classes[i],
                mean: means[i].to_vec(),
                cov_diag: vec![var, var],
                count: source_counts[i],
            })
            .collect();
        let target = (0..3)
            .map(|i| ComponentSpec {
                class: classes[i],
                mean: vec![means[i][0] + DEFAULT_TARGET_SHIFT[0], means[i][1] + DEFAULT_TARGET_SHIFT[1]],
                cov_diag: vec![var * DEFAULT_TARGET_COV_SCALE; 2],
                count: target_counts[i],
            })
            .collect();
        Self { source, target, rng_seed }
    }

    /// Rescales every component count so each domain holds about `total` rows,
    /// keeping relative proportions.
    pub fn with_domain_size(mut self, total: usize) -> Self {
        for comps in [&mut self.source, &mut self.target] {
            let sum: usize = comps.iter().map(|c| c.count).sum();
            let mut assigned = 0;
            let last = comps.len() - 1;
            for (i, c) in comps.iter_mut().enumerate() {
                c.count = if i == last {
                    total.saturating_sub(assigned).max(1)
                } else {
                    ((c.count * total) as f64 / sum as f64).round().max(1.0) as usize
                };
                assigned += c.count;
            }
        }
        self
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |m: &str| Err(DataError::InvalidToyConfig(m.to_string()));
        if self.source.is_empty() || self.target.is_empty() {
            return bad("both domains need at least one component");
        }
        let dim = self.source[0].mean.len();
        if dim == 0 {
            return bad("zero-dimensional component");
        }
        for c in self.source.iter().chain(&self.target) {
            if c.mean.len() != dim || c.cov_diag.len() != dim {
                return bad("component dimensions disagree");
            }
            if c.cov_diag.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return bad("covariance entries must be positive");
            }
            if c.mean.iter().any(|v| !v.is_finite()) {
                return bad("non-finite mean");
            }
            if c.count == 0 {
                return bad("component sample count must be at least 1");
            }
        }
        let classes = |comps: &[ComponentSpec]| comps.iter().map(|c| c.class).collect::<BTreeSet<_>>();
        let (s, t) = (classes(&self.source), classes(&self.target));
        if s != t {
            return bad("source and target declare different class sets");
        }
        if s.iter().copied().ne(0..s.len()) {
            return bad("class ids must be 0..C-1");
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.source.iter().map(|c| c.class + 1).max().unwrap_or(0)
    }
}

/// Draws both domains. Target labels are ground truth for evaluation only.
pub fn generate_toy<F: Scalar>(
    config: &ToyConfig,
) -> Result<(LabeledDataset<F>, LabeledDataset<F>), DataError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let c = config.class_count();
    let source = sample_domain(&config.source, c, &mut rng)?;
    let target = sample_domain(&config.target, c, &mut rng)?;
    Ok((source, target))
}

fn sample_domain<F: Scalar>(
    comps: &[ComponentSpec],
    class_count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<LabeledDataset<F>, DataError> {
    let dim = comps[0].mean.len();
    let n: usize = comps.iter().map(|c| c.count).sum();
    let mut values = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for comp in comps {
        let sd: Vec<f64> = comp.cov_diag.iter().map(|v| v.sqrt()).collect();
        for _ in 0..comp.count {
            for f in 0..dim {
                let z: f64 = rng.sample(StandardNormal);
                values.push(F::lit(comp.mean[f] + sd[f] * z));
            }
            labels.push(comp.class);
        }
    }
    let features = Array2::from_shape_vec((n, dim), values).map_err(|e| DataError::Io(e.to_string()))?;
    LabeledDataset::with_class_count(features, Some(labels), class_count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Axis;

    #[test]
    fn counts_follow_config() {
        let (s, t) = generate_toy::<f64>(&ToyConfig::default()).unwrap();
        assert_eq!(s.n_samples(), 150);
        assert_eq!(t.n_samples(), ToyConfig::default().target.iter().map(|c| c.count).sum::<usize>());
        assert_eq!(s.class_count(), 2);
    }

    #[test]
    fn same_seed_is_bitwise_identical() {
        let cfg = ToyConfig::two_class_three_blobs(42);
        let a = generate_toy::<f64>(&cfg).unwrap();
        let b = generate_toy::<f64>(&cfg).unwrap();
        assert_eq!(a, b);
        let bits = |d: &LabeledDataset<f64>| d.features().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.0), bits(&b.0));
        let c = generate_toy::<f64>(&ToyConfig::two_class_three_blobs(43)).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn empirical_mean_of_tight_blob() {
        let comp = ComponentSpec { class: 0, mean: vec![10.0, 10.0], cov_diag: vec![0.01, 0.01], count: 100 };
        let cfg = ToyConfig { source: vec![comp.clone()], target: vec![comp], rng_seed: 7 };
        let (s, _) = generate_toy::<f64>(&cfg).unwrap();
        let m = s.features().mean_axis(Axis(0)).unwrap();
        assert!((m[0] - 10.0).abs() < 0.05 && (m[1] - 10.0).abs() < 0.05);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = ToyConfig::default();
        cfg.source[0].cov_diag[0] = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ToyConfig::default();
        cfg.target.retain(|c| c.class == 0);
        assert!(cfg.validate().is_err());
        let mut cfg = ToyConfig::default();
        cfg.source[1].count = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = ToyConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(serde_json::from_str::<ToyConfig>(&text).unwrap(), cfg);
    }

    #[test]
    fn resized_domains() {
        let cfg = ToyConfig::default().with_domain_size(1000);
        assert_eq!(cfg.source.iter().map(|c| c.count).sum::<usize>(), 1000);
        assert_eq!(cfg.target.iter().map(|c| c.count).sum::<usize>(), 1000);
    }
}
