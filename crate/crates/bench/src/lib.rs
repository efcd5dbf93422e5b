//! Shared fixtures for the benchmarks.

use mixfrac::simulate::{sample_mfbm, IncrementSeries, SampleMethod};
use mixfrac::ModelTheta;

pub fn rough_theta() -> ModelTheta {
    ModelTheta::new(0.3, 1.0, 0.5, 1.0).expect("valid parameters")
}

pub fn smooth_theta() -> ModelTheta {
    ModelTheta::new(0.7, 1.0, 0.4, 1.0).expect("valid parameters")
}

/// One path on the unit interval.
pub fn path(theta: ModelTheta, n: usize, seed: u64) -> IncrementSeries {
    sample_mfbm(theta, n, 1.0 / n as f64, seed, SampleMethod::Circulant).expect("sampling succeeds")
}
