//! Flag, config-file and default resolution.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use subot_core::pipeline::{AdaptationConfig, Method, Variant};

use crate::args::{TuningArgs, VariantArg};

/// Keys accepted in the `--config` JSON file. Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub variant: Option<Method>,
    pub k_t: Option<usize>,
    pub k_range: Option<(usize, usize)>,
    pub lambda1: Option<f64>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_sinkhorn: Option<usize>,
    pub tol: Option<f64>,
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub normalize: Option<bool>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("missing file: {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
    }
}

/// Method and configuration after applying flags over the config file over
/// the defaults. `k_t` falls back to `4 · class_count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resolved {
    pub method: Method,
    pub config: AdaptationConfig,
}

pub fn resolve(tuning: &TuningArgs, variant: Option<VariantArg>, class_count: usize) -> Result<Resolved> {
    let file = match &tuning.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    Ok(merge(&file, tuning, variant, class_count))
}

pub fn merge(file: &ConfigFile, tuning: &TuningArgs, variant: Option<VariantArg>, class_count: usize) -> Resolved {
    let defaults = AdaptationConfig::for_classes(class_count);
    let method = variant.map(Method::from).or(file.variant).unwrap_or(Method::SotC);
    let mut cfg = defaults;
    cfg.variant = if method == Method::SotG { Variant::SotG } else { Variant::SotC };
    cfg.k_t = tuning.k_t.or(file.k_t).unwrap_or(defaults.k_t);
    cfg.k_range = file.k_range.unwrap_or(defaults.k_range);
    cfg.ot.lambda1 = tuning.lambda1.or(file.lambda1).unwrap_or(defaults.ot.lambda1);
    cfg.ot.lambda = tuning.lambda.or(file.lambda).unwrap_or(defaults.ot.lambda);
    cfg.ot.eta = tuning.eta.or(file.eta).unwrap_or(defaults.ot.eta);
    cfg.ot.max_outer = file.max_outer.unwrap_or(defaults.ot.max_outer);
    cfg.ot.max_sinkhorn = file.max_sinkhorn.unwrap_or(defaults.ot.max_sinkhorn);
    cfg.ot.tol = file.tol.unwrap_or(defaults.ot.tol);
    cfg.restarts = tuning.restarts.or(file.restarts).unwrap_or(defaults.restarts);
    cfg.rng_seed = tuning.seed.or(file.seed).unwrap_or(defaults.rng_seed);
    cfg.normalize = file.normalize.unwrap_or(defaults.normalize);
    Resolved { method, config: cfg }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_class_count() {
        let r = merge(&ConfigFile::default(), &TuningArgs::default(), None, 3);
        assert_eq!(r.method, Method::SotC);
        assert_eq!(r.config.k_t, 12);
        assert_eq!((r.config.ot.lambda1, r.config.ot.lambda, r.config.ot.eta), (1.0, 1.0, 0.5));
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: ConfigFile =
            serde_json::from_str(r#"{"variant":"otda","eta":2.0,"lambda":3.0,"k_t":5,"normalize":false}"#).unwrap();
        let flags = TuningArgs { eta: Some(7.0), ..TuningArgs::default() };
        let r = merge(&file, &flags, None, 2);
        assert_eq!(r.method, Method::Otda);
        assert_eq!(r.config.ot.eta, 7.0);
        assert_eq!(r.config.ot.lambda, 3.0);
        assert_eq!(r.config.ot.lambda1, 1.0);
        assert_eq!(r.config.k_t, 5);
        assert!(!r.config.normalize);
        let r = merge(&file, &flags, Some(VariantArg::SotG), 2);
        assert_eq!(r.method, Method::SotG);
        assert_eq!(r.config.variant, Variant::SotG);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ConfigFile>(r#"{"lamda":1.0}"#).is_err());
    }
}
