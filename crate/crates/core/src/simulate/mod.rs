//! Path generation.
//!
//! [`sample_mfbm`] draws the parametric mixed fBm exactly from its Toeplitz
//! increment covariance. [`sample_three_process`] builds the same law as a
//! sum of independent Brownian and fGn components. [`sample_mixed_sm`] runs
//! the hybrid scheme for stochastic coefficients.

mod gaussian;
mod io;
mod stochvol;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracgauss::{b_h, gamma_h, mixed_autocov, Hurst, ModelTheta};

pub use gaussian::{SampleMethod, StationarySampler, CHOLESKY_MAX_N};
pub use io::{read_binary, read_csv, read_series, write_binary, write_csv, write_series, MAGIC};
pub use stochvol::{
    hybrid_increment_variance, Driver, IntegratedTruth, ProcessSpec, StochVolSpec,
};

/// Seeded generator for replication `stream` of a Monte Carlo run.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// What produced a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Parametric { theta: ModelTheta },
    StochVol { spec: StochVolSpec },
    Observed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub seed: Option<u64>,
    #[serde(default)]
    pub stream: u64,
    pub method: String,
    pub model: ModelSpec,
    /// Realised integrated functionals, when the simulator knows them.
    #[serde(default)]
    pub truth: Option<IntegratedTruth>,
}

impl SeriesMeta {
    pub fn observed() -> Self {
        Self {
            seed: None,
            stream: 0,
            method: "observed".into(),
            model: ModelSpec::Observed,
            truth: None,
        }
    }
}

/// `n` regularly spaced increments `Y_{iΔ} − Y_{(i−1)Δ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementSeries {
    pub increments: Vec<f64>,
    pub delta: f64,
    pub t_end: f64,
    pub meta: SeriesMeta,
}

impl IncrementSeries {
    pub fn new(increments: Vec<f64>, delta: f64, meta: SeriesMeta) -> Result<Self> {
        if increments.len() < 2 {
            return Err(Error::Invalid(format!(
                "a series needs at least 2 increments, got {}",
                increments.len()
            )));
        }
        if !(delta.is_finite() && delta > 0.0) {
            return Err(Error::Domain {
                name: "delta",
                value: delta,
                domain: "(0, inf)",
            });
        }
        if let Some(x) = increments.iter().find(|x| !x.is_finite()) {
            return Err(Error::Invalid(format!("non-finite increment {x}")));
        }
        let t_end = increments.len() as f64 * delta;
        Ok(Self {
            increments,
            delta,
            t_end,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.increments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.increments.is_empty()
    }

    /// The parametric θ this series was simulated from, if any.
    pub fn theta(&self) -> Option<&ModelTheta> {
        match &self.meta.model {
            ModelSpec::Parametric { theta } => Some(theta),
            _ => None,
        }
    }
}

fn check_grid(n: usize, delta: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::Invalid(format!("need n >= 2, got {n}")));
    }
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::Domain {
            name: "delta",
            value: delta,
            domain: "(0, inf)",
        });
    }
    Ok(())
}

/// Prepared exact sampler for the parametric model; reuse it across
/// replications.
#[derive(Debug)]
pub struct MfbmSampler {
    theta: ModelTheta,
    delta: f64,
    inner: StationarySampler,
}

impl MfbmSampler {
    pub fn new(theta: ModelTheta, n: usize, delta: f64, method: SampleMethod) -> Result<Self> {
        check_grid(n, delta)?;
        let row = mixed_autocov(&theta, delta, 4 * n);
        let inner = StationarySampler::new(|k| row[k], n, method)?;
        Ok(Self {
            theta,
            delta,
            inner,
        })
    }

    pub fn method(&self) -> SampleMethod {
        self.inner.effective_method()
    }

    pub fn sample(&self, seed: u64, stream: u64) -> IncrementSeries {
        let mut rng = rng_for(seed, stream);
        let increments = self.inner.sample(&mut rng);
        let n = increments.len();
        IncrementSeries {
            increments,
            delta: self.delta,
            t_end: n as f64 * self.delta,
            meta: SeriesMeta {
                seed: Some(seed),
                stream,
                method: self.method().to_string(),
                model: ModelSpec::Parametric { theta: self.theta },
                truth: None,
            },
        }
    }
}

/// Exact draw of `n` increments of the parametric model at step `delta`.
pub fn sample_mfbm(
    theta: ModelTheta,
    n: usize,
    delta: f64,
    seed: u64,
    method: SampleMethod,
) -> Result<IncrementSeries> {
    Ok(MfbmSampler::new(theta, n, delta, method)?.sample(seed, 0))
}

/// Sum-of-independent-components sampler; see [`sample_three_process`].
#[derive(Debug)]
pub struct ThreeProcessSampler {
    theta: ModelTheta,
    delta: f64,
    n: usize,
    bm_sd: f64,
    middle: StationarySampler,
    frac: StationarySampler,
}

impl ThreeProcessSampler {
    pub fn new(theta: ModelTheta, n: usize, delta: f64) -> Result<Self> {
        check_grid(n, delta)?;
        if theta.lambda_cov() < 0.0 {
            return Err(Error::ParameterSet(format!(
                "three-process representation needs lambda >= 0, got {}; use sample_mfbm",
                theta.lambda_cov()
            )));
        }
        let h = theta.h();
        let hb = h.bar();
        let c_mid = theta.lambda_cov() * b_h(h) * delta.powf(2.0 * hb.value());
        let c_frac = delta.powf(2.0 * h.value());
        let middle = unit_fgn(hb, n, c_mid)?;
        let frac = unit_fgn(h, n, c_frac)?;
        Ok(Self {
            theta,
            delta,
            n,
            bm_sd: (theta.sigma_sq() * delta).sqrt(),
            middle,
            frac,
        })
    }

    pub fn sample(&self, seed: u64, stream: u64) -> IncrementSeries {
        use rand::Rng;
        let mut rng = rng_for(seed, stream);
        let w: Vec<f64> = (0..self.n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let mid = self.middle.sample(&mut rng);
        let f1 = self.frac.sample(&mut rng);
        let f2 = self.frac.sample(&mut rng);
        let (rho, rho_p) = (self.theta.rho(), self.theta.rho_prime());
        let increments = (0..self.n)
            .map(|i| self.bm_sd * w[i] + mid[i] + rho * f1[i] + rho_p * f2[i])
            .collect();
        IncrementSeries {
            increments,
            delta: self.delta,
            t_end: self.n as f64 * self.delta,
            meta: SeriesMeta {
                seed: Some(seed),
                stream,
                method: "three_process".into(),
                model: ModelSpec::Parametric { theta: self.theta },
                truth: None,
            },
        }
    }
}

fn unit_fgn(h: Hurst, n: usize, scale: f64) -> Result<StationarySampler> {
    StationarySampler::new(|k| scale * gamma_h(h, k), n, SampleMethod::Circulant)
}

/// `σW + sqrt(Λ b(H)) W(H̄) + ρ W(H) + ρ′ W′(H)` with independent components;
/// same law as [`sample_mfbm`] when `Λ ≥ 0`.
pub fn sample_three_process(
    theta: ModelTheta,
    n: usize,
    delta: f64,
    seed: u64,
) -> Result<IncrementSeries> {
    Ok(ThreeProcessSampler::new(theta, n, delta)?.sample(seed, 0))
}

/// Hybrid-scheme draw of the stochastic-coefficient model. The realised
/// integrated functionals are stored in `meta.truth`.
pub fn sample_mixed_sm(
    spec: &StochVolSpec,
    n: usize,
    delta: f64,
    seed: u64,
) -> Result<IncrementSeries> {
    sample_mixed_sm_stream(spec, n, delta, seed, 0)
}

pub fn sample_mixed_sm_stream(
    spec: &StochVolSpec,
    n: usize,
    delta: f64,
    seed: u64,
    stream: u64,
) -> Result<IncrementSeries> {
    check_grid(n, delta)?;
    let mut rng = rng_for(seed, stream);
    let path = stochvol::simulate_path(spec, n, delta, &mut rng)?;
    Ok(IncrementSeries {
        increments: path.increments,
        delta,
        t_end: n as f64 * delta,
        meta: SeriesMeta {
            seed: Some(seed),
            stream,
            method: format!("hybrid(m={})", spec.oversample),
            model: ModelSpec::StochVol { spec: *spec },
            truth: Some(path.truth),
        },
    })
}

/// `Var(Y_{t+h} − Y_t) = σ²h + Πh^{2H} + Λb(H)h^{2H̄}`.
pub fn increment_variance(theta: &ModelTheta, h: f64) -> Result<f64> {
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain {
            name: "h",
            value: h,
            domain: "(0, inf)",
        });
    }
    Ok(mixed_autocov(theta, h, 1)[0])
}
