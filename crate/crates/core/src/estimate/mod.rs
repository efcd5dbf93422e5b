//! Lagged quadratic variations, Hurst estimators in both regimes and the
//! integrated quantities `C`, `Λ`, `Π` with feasible confidence intervals.

mod hurst;
mod integrals;
mod qv;
mod report;
mod vectors;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use hurst::{
    a_coeffs, a_coeffs_at, alternating_a_sum, debiased_from_ladder, estimate_h, ladder,
    ladder_lags, pilot_h, ACoeffs, HurstDiagnostics, HurstEstimate,
};
pub use integrals::{
    confidence_intervals, estimate_integrals, z_quantile, CiInputs, IntegralEstimates, Interval,
    Intervals,
};
pub use qv::{coarsening_slope, lagged_qv, quarticity, LaggedQV};
pub use report::{full_report, EstimateDiagnostics, EstimateReport, ParamEstimate, RegimeSource};
pub use vectors::{
    gamma_vec, ladder_vector, phi_vec, u_vectors, var_h, var_h_forms, var_h_prime, Filters,
    UVectors, VarHForms, FILTER_DIFF_STEP,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `H < ½`
    Rough,
    /// `H > ½`
    Smooth,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Rough => "rough",
            Regime::Smooth => "smooth",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeChoice {
    Rough,
    Smooth,
    #[default]
    Auto,
}

impl fmt::Display for RegimeChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeChoice::Rough => "rough",
            RegimeChoice::Smooth => "smooth",
            RegimeChoice::Auto => "auto",
        })
    }
}

impl FromStr for RegimeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "rough" => Ok(Self::Rough),
            "smooth" => Ok(Self::Smooth),
            "auto" => Ok(Self::Auto),
            other => Err(Error::Parse(format!(
                "unknown regime '{other}' (expected rough, smooth or auto)"
            ))),
        }
    }
}

impl From<Regime> for RegimeChoice {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Rough => Self::Rough,
            Regime::Smooth => Self::Smooth,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimateOptions {
    pub regime: RegimeChoice,
    pub level: f64,
    pub pilot_r: usize,
    pub clamp_eps: f64,
    pub n_cap: u32,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    /// Distance from `¼` (rough `C`) or `¾` (smooth `Π`) below which the
    /// parameter is reported as not identifiable.
    pub identifiability_margin: f64,
    pub series_cutoff: usize,
    /// Auto regime picks rough when the coarsening slope is below this.
    pub auto_threshold: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            regime: RegimeChoice::Auto,
            level: 0.95,
            pilot_r: 4,
            clamp_eps: 0.01,
            n_cap: 4,
            v: vec![0.0, 1.0],
            w: vec![0.0, 0.0, 1.0],
            identifiability_margin: 0.01,
            series_cutoff: crate::fracgauss::SERIES_CUTOFF_DEFAULT,
            auto_threshold: -0.05,
        }
    }
}

impl EstimateOptions {
    pub fn with_regime(regime: impl Into<RegimeChoice>) -> Self {
        Self {
            regime: regime.into(),
            ..Self::default()
        }
    }
}
