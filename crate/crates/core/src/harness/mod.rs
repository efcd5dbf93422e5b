//! Seeded Monte Carlo experiments: convergence rates, interval coverage,
//! pilot versus debiased bias, and KL scans.
//!
//! Replication `m` at grid index `g` draws from stream `(g << 32) | m` of
//! the base seed, so results do not depend on scheduling.

mod experiments;
mod stats;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{EstimateOptions, Regime, RegimeChoice};
use crate::fracgauss::{Hurst, ModelTheta};
use crate::simulate::{SampleMethod, StochVolSpec};

pub use experiments::{
    replication_stream, run, run_bias_comparison, run_coverage, run_kl, run_rates, BiasRow,
    BiasTable, CoverageRow, CoverageTable, ExperimentOutput, KlExperiment, Param, RateRow,
    RateTable, SlopeFit,
};
pub use stats::{
    anderson_darling, binomial_se, fit_line, summarize_errors, AndersonDarling, ErrorSummary,
    LineFit,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Rates,
    Coverage,
    Bias,
    Kl,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Rates => "rates",
            Self::Coverage => "coverage",
            Self::Bias => "bias",
            Self::Kl => "kl",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rates" => Ok(Self::Rates),
            "coverage" => Ok(Self::Coverage),
            "bias" => Ok(Self::Bias),
            "kl" => Ok(Self::Kl),
            other => Err(Error::Parse(format!("unknown experiment '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Parametric { theta: ModelTheta },
    StochVol { spec: StochVolSpec },
}

impl ModelConfig {
    pub fn h(&self) -> Hurst {
        match self {
            Self::Parametric { theta } => theta.h(),
            Self::StochVol { spec } => spec.h,
        }
    }

    pub fn regime(&self) -> Regime {
        if self.h().is_rough() {
            Regime::Rough
        } else {
            Regime::Smooth
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KlSettings {
    /// Fixed `r₀`; bisected on the grid when absent.
    pub r0: Option<f64>,
    pub r0_max: f64,
    pub tol: f64,
    /// `r₀` of the constant-`r₁` control scan; no control when absent.
    pub control_r0: Option<f64>,
}

impl Default for KlSettings {
    fn default() -> Self {
        Self {
            r0: None,
            r0_max: 2.0,
            tol: 1e-3,
            control_r0: Some(0.1),
        }
    }
}

fn default_level() -> f64 {
    0.95
}

fn default_t_end() -> f64 {
    1.0
}

fn default_failure_rate() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: ModelConfig,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default)]
    pub method: SampleMethod,
    /// Defaults to the regime of the model's `H`.
    #[serde(default)]
    pub regime: Option<RegimeChoice>,
    #[serde(default)]
    pub options: Option<EstimateOptions>,
    #[serde(default = "default_failure_rate")]
    pub max_failure_rate: f64,
    #[serde(default)]
    pub kl: KlSettings,
}

impl ExperimentConfig {
    pub fn new(
        experiment: ExperimentKind,
        model: ModelConfig,
        n_grid: Vec<usize>,
        replications: usize,
        seed: u64,
    ) -> Self {
        Self {
            experiment,
            model,
            n_grid,
            replications,
            seed,
            output: None,
            level: default_level(),
            t_end: default_t_end(),
            method: SampleMethod::default(),
            regime: None,
            options: None,
            max_failure_rate: default_failure_rate(),
            kl: KlSettings::default(),
        }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment != ExperimentKind::Kl && self.replications < 2 {
            return Err(Error::Invalid(format!(
                "need at least 2 replications, got {}",
                self.replications
            )));
        }
        if self.n_grid.is_empty() {
            return Err(Error::Invalid("empty n grid".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid("n grid must be strictly increasing".into()));
        }
        if let Some(n) = self.n_grid.iter().find(|n| !n.is_power_of_two()) {
            return Err(Error::Invalid(format!("n = {n} is not a power of two")));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Domain {
                name: "level",
                value: self.level,
                domain: "(0, 1)",
            });
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::Domain {
                name: "t_end",
                value: self.t_end,
                domain: "(0, inf)",
            });
        }
        if !(0.0..=1.0).contains(&self.max_failure_rate) {
            return Err(Error::Domain {
                name: "max_failure_rate",
                value: self.max_failure_rate,
                domain: "[0, 1]",
            });
        }
        if let ModelConfig::StochVol { spec } = &self.model {
            spec.validate()?;
        }
        match self.experiment {
            ExperimentKind::Kl => {
                if !matches!(self.model, ModelConfig::Parametric { .. }) {
                    return Err(Error::Invalid("kl needs a parametric model".into()));
                }
            }
            ExperimentKind::Bias => {
                if self.regime() != Regime::Rough {
                    return Err(Error::Invalid("bias comparison needs the rough regime".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Regime used by the estimator; `auto` is resolved per series.
    pub fn regime_choice(&self) -> RegimeChoice {
        self.regime
            .unwrap_or_else(|| RegimeChoice::from(self.model.regime()))
    }

    fn regime(&self) -> Regime {
        match self.regime_choice() {
            RegimeChoice::Rough => Regime::Rough,
            RegimeChoice::Smooth => Regime::Smooth,
            RegimeChoice::Auto => self.model.regime(),
        }
    }

    pub fn estimate_options(&self) -> EstimateOptions {
        let mut o = self.options.clone().unwrap_or_default();
        o.regime = self.regime_choice();
        o.level = self.level;
        o
    }
}
