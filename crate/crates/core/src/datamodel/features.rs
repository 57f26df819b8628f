//! Sliding-window feature extraction for 3-axis inertial sensors.
//!
//! Each window's three axes are collapsed into a magnitude signal and
//! summarized by 19 time- and frequency-domain statistics, in the order given
//! by [`FEATURE_NAMES`].

use ndarray::{s, Array1, Array2, ArrayView2};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::Scalar;

pub const FEATURE_COUNT: usize = 19;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "mean",
    "std",
    "min",
    "max",
    "median",
    "p25",
    "p75",
    "iqr",
    "skewness",
    "kurtosis",
    "zero_crossing_rate",
    "mean_crossing_rate",
    "signal_magnitude_area",
    "rms",
    "spectral_energy",
    "spectral_entropy",
    "dominant_frequency",
    "dominant_magnitude",
    "spectral_centroid",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    Accelerometer,
    Gyroscope,
}

/// `w × 3` block of raw readings from one sensor.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSignalWindow<F> {
    samples: Array2<F>,
    sensor_kind: SensorKind,
}

impl<F: Scalar> RawSignalWindow<F> {
    pub fn new(samples: Array2<F>, sensor_kind: SensorKind) -> Result<Self, DataError> {
        if samples.ncols() != 3 {
            return Err(DataError::WrongAxisCount(samples.ncols()));
        }
        if samples.nrows() < 2 {
            return Err(DataError::WindowTooShort(samples.nrows()));
        }
        if let Some(((row, col), _)) = samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(DataError::NonFiniteFeature { row, col });
        }
        Ok(Self { samples, sensor_kind })
    }

    pub fn samples(&self) -> &Array2<F> {
        &self.samples
    }

    pub fn sensor_kind(&self) -> SensorKind {
        self.sensor_kind
    }
}

/// Per-row Euclidean norm of the three axes.
pub fn combine_axes<F: Scalar>(window: &RawSignalWindow<F>) -> Array1<F> {
    window
        .samples
        .rows()
        .into_iter()
        .map(|r| r.iter().fold(F::zero(), |acc, &v| acc + v * v).sqrt())
        .collect()
}

/// Sliding-window layout: window length in samples and fractional overlap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub length: usize,
    pub overlap: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self { length: 128, overlap: 0.5 }
    }
}

impl WindowSpec {
    pub fn step(&self) -> usize {
        ((self.length as f64) * (1.0 - self.overlap)).round().max(1.0) as usize
    }
}

/// Start offsets of every complete window over a signal of `n` samples.
pub fn sliding_windows(n: usize, spec: WindowSpec) -> Vec<usize> {
    if spec.length == 0 || n < spec.length {
        return Vec::new();
    }
    (0..=n - spec.length).step_by(spec.step()).collect()
}

pub fn extract_features<F: Scalar>(
    magnitudes: &[F],
    sampling_rate: F,
) -> Result<[F; FEATURE_COUNT], DataError> {
    let w = magnitudes.len();
    if w < 2 {
        return Err(DataError::WindowTooShort(w));
    }
    if !(sampling_rate > F::zero()) {
        return Err(DataError::BadSamplingRate);
    }
    let x: Vec<f64> = magnitudes.iter().map(|v| v.to_f64_lossy()).collect();
    let rate = sampling_rate.to_f64_lossy();
    let n = w as f64;

    let mean = x.iter().sum::<f64>() / n;
    let central = |p: i32| x.iter().map(|v| (v - mean).powi(p)).sum::<f64>() / n;
    let m2 = central(2);
    let std = m2.sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        (central(3) / m2.powf(1.5), central(4) / (m2 * m2) - 3.0)
    } else {
        (0.0, 0.0)
    };

    let mut sorted = x.clone();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[w - 1];
    let median = percentile(&sorted, 0.5);
    let p25 = percentile(&sorted, 0.25);
    let p75 = percentile(&sorted, 0.75);

    let crossings = |offset: f64| {
        x.windows(2).filter(|p| (p[0] - offset) * (p[1] - offset) < 0.0).count() as f64 / (n - 1.0)
    };
    let zcr = crossings(0.0);
    let mcr = crossings(mean);
    let sma = x.iter().map(|v| v.abs()).sum::<f64>() / n;
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / n).sqrt();

    let spectrum = one_sided_power(&x);
    let total_power: f64 = spectrum.iter().sum();
    let spectral_energy = total_power / n;
    let (mut entropy, mut centroid) = (0.0, 0.0);
    if total_power > 0.0 {
        for (k, p) in spectrum.iter().enumerate() {
            let q = p / total_power;
            if q > 0.0 {
                entropy -= q * q.ln();
            }
            centroid += q * (k as f64) * rate / n;
        }
    }
    let dominant_bin = spectrum
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (k, &p)| if p > best.1 { (k, p) } else { best })
        .0;
    let dominant_frequency = dominant_bin as f64 * rate / n;
    let dominant_magnitude = spectrum[dominant_bin].sqrt() / n;

    let out = [
        mean,
        std,
        min,
        max,
        median,
        p25,
        p75,
        p75 - p25,
        skewness,
        kurtosis,
        zcr,
        mcr,
        sma,
        rms,
        spectral_energy,
        entropy,
        dominant_frequency,
        dominant_magnitude,
        centroid,
    ];
    Ok(out.map(F::lit))
}

/// Linear-interpolated quantile of an ascending slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// `|X_k|²` for bins `0..=w/2` of the unnormalized DFT.
fn one_sided_power(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf[..=x.len() / 2].iter().map(|c| c.norm_sqr()).collect()
}

/// Feature matrix for a recording: one row per window, 19 columns per sensor
/// (accelerometer first, then gyroscope when given).
pub fn recording_features<F: Scalar>(
    accelerometer: ArrayView2<'_, F>,
    gyroscope: Option<ArrayView2<'_, F>>,
    sampling_rate: F,
    spec: WindowSpec,
) -> Result<Array2<F>, DataError> {
    let n = accelerometer.nrows();
    if let Some(g) = &gyroscope {
        if g.nrows() != n {
            return Err(DataError::LabelLengthMismatch { labels: g.nrows(), rows: n });
        }
    }
    let starts = sliding_windows(n, spec);
    if starts.is_empty() {
        return Err(DataError::WindowTooShort(n));
    }
    let sensors: Vec<(ArrayView2<'_, F>, SensorKind)> = std::iter::once((accelerometer, SensorKind::Accelerometer))
        .chain(gyroscope.map(|g| (g, SensorKind::Gyroscope)))
        .collect();
    let mut out = Array2::zeros((starts.len(), FEATURE_COUNT * sensors.len()));
    for (row, &start) in starts.iter().enumerate() {
        for (slot, (signal, kind)) in sensors.iter().enumerate() {
            let block = signal.slice(s![start..start + spec.length, ..]).to_owned();
            let window = RawSignalWindow::new(block, *kind)?;
            let feats = extract_features(combine_axes(&window).as_slice().unwrap(), sampling_rate)?;
            let cols = slot * FEATURE_COUNT..(slot + 1) * FEATURE_COUNT;
            out.slice_mut(s![row, cols]).assign(&Array1::from(feats.to_vec()));
        }
    }
    Ok(out)
}
