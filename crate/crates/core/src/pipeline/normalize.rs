use ndarray::{Array1, Array2, Axis};

use crate::Scalar;

/// Per-feature standardization with statistics from one reference matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore<F> {
    pub mean: Array1<F>,
    /// Population standard deviation; constant features keep scale 1.
    pub scale: Array1<F>,
}

impl<F: Scalar> ZScore<F> {
    pub fn fit(reference: &Array2<F>) -> Self {
        let n = F::from_usize_lossy(reference.nrows().max(1));
        let mean = reference.sum_axis(Axis(0)) / n;
        let centered = reference - &mean;
        let var = centered.mapv(|v| v * v).sum_axis(Axis(0)) / n;
        // rounding leaves a tiny spread on constant columns; treat it as zero
        let scale = ndarray::Zip::from(&var).and(&mean).map_collect(|&v, &m| {
            let s = v.sqrt();
            if s > F::lit(64.0) * F::epsilon() * m.abs().max(F::one()) { s } else { F::one() }
        });
        Self { mean, scale }
    }

    pub fn apply(&self, data: &Array2<F>) -> Array2<F> {
        (data - &self.mean) / &self.scale
    }
}
