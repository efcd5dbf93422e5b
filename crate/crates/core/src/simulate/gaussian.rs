//! Stationary Gaussian sequences from an autocovariance function.

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracgauss::{cholesky_lower, toeplitz};

/// Largest `n` for which a dense Cholesky factor is built.
pub const CHOLESKY_MAX_N: usize = 1 << 13;

/// Relative tolerance below which a negative embedding eigenvalue is a failure.
const EIGEN_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleMethod {
    Cholesky,
    #[default]
    Circulant,
}

impl fmt::Display for SampleMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SampleMethod::Cholesky => "cholesky",
            SampleMethod::Circulant => "circulant",
        })
    }
}

impl std::str::FromStr for SampleMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cholesky" => Ok(SampleMethod::Cholesky),
            "circulant" => Ok(SampleMethod::Circulant),
            other => Err(Error::Parse(format!("unknown sampling method '{other}'"))),
        }
    }
}

enum Plan {
    Circulant {
        sqrt_eig: Vec<f64>,
        fft: Arc<dyn Fft<f64>>,
    },
    Cholesky {
        l: Mat<f64>,
    },
    White {
        sd: f64,
    },
}

/// Reusable sampler for a zero-mean stationary sequence of length `n`.
pub struct StationarySampler {
    n: usize,
    plan: Plan,
    method: SampleMethod,
    fell_back: bool,
}

impl fmt::Debug for StationarySampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("StationarySampler")
            .field("n", &self.n)
            .field("method", &self.method)
            .field("fell_back", &self.fell_back)
            .finish()
    }
}

impl StationarySampler {
    /// `acf(k)` must be defined for every `k` up to `4(n−1)`.
    pub fn new<F: Fn(usize) -> f64>(acf: F, n: usize, method: SampleMethod) -> Result<Self> {
        if n == 0 {
            return Err(Error::Invalid("sequence length must be positive".into()));
        }
        let c0 = acf(0);
        if !(c0.is_finite() && c0 >= 0.0) {
            return Err(Error::Invalid(format!("autocovariance at lag 0 is {c0}")));
        }
        if (1..n).all(|k| acf(k) == 0.0) {
            return Ok(Self {
                n,
                plan: Plan::White { sd: c0.sqrt() },
                method,
                fell_back: false,
            });
        }
        match method {
            SampleMethod::Cholesky => {
                if n > CHOLESKY_MAX_N {
                    return Err(Error::Invalid(format!(
                        "cholesky sampling is limited to n <= {CHOLESKY_MAX_N}, got {n}"
                    )));
                }
                Ok(Self {
                    n,
                    plan: cholesky_plan(&acf, n)?,
                    method,
                    fell_back: false,
                })
            }
            SampleMethod::Circulant => {
                let mut m = (n - 1).max(1);
                for _ in 0..3 {
                    if let Some(plan) = circulant_plan(&acf, m, c0) {
                        return Ok(Self {
                            n,
                            plan,
                            method,
                            fell_back: false,
                        });
                    }
                    m *= 2;
                }
                if n > CHOLESKY_MAX_N {
                    return Err(Error::Embedding { n });
                }
                log::warn!("circulant embedding not nonnegative for n = {n}; using cholesky");
                Ok(Self {
                    n,
                    plan: cholesky_plan(&acf, n)?,
                    method,
                    fell_back: true,
                })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// True when the circulant embedding failed and Cholesky was used.
    pub fn fell_back(&self) -> bool {
        self.fell_back
    }

    /// The method actually in use.
    pub fn effective_method(&self) -> SampleMethod {
        match self.plan {
            Plan::Cholesky { .. } => SampleMethod::Cholesky,
            _ => self.method,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.plan {
            Plan::White { sd } => (0..self.n)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            Plan::Cholesky { l } => {
                let z: Vec<f64> = (0..self.n).map(|_| rng.sample(StandardNormal)).collect();
                (0..self.n)
                    .map(|i| (0..=i).map(|j| l[(i, j)] * z[j]).sum())
                    .collect()
            }
            Plan::Circulant { sqrt_eig, fft } => {
                let mut buf: Vec<Complex64> = sqrt_eig
                    .iter()
                    .map(|s| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(s * re, s * im)
                    })
                    .collect();
                fft.process(&mut buf);
                buf.truncate(self.n);
                buf.into_iter().map(|c| c.re).collect()
            }
        }
    }
}

fn cholesky_plan<F: Fn(usize) -> f64>(acf: &F, n: usize) -> Result<Plan> {
    let row: Vec<f64> = (0..n).map(acf).collect();
    Ok(Plan::Cholesky {
        l: cholesky_lower(&toeplitz(&row))?,
    })
}

/// Minimal embedding of size `2m`; `None` when an eigenvalue is too negative.
fn circulant_plan<F: Fn(usize) -> f64>(acf: &F, m: usize, c0: f64) -> Option<Plan> {
    let size = 2 * m;
    let mut c: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); size];
    for k in 0..=m {
        c[k] = Complex64::new(acf(k), 0.0);
    }
    for k in 1..m {
        c[size - k] = c[k];
    }
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(size);
    fft.process(&mut c);
    let tol = EIGEN_TOL * c0.max(f64::MIN_POSITIVE);
    let mut sqrt_eig = Vec::with_capacity(size);
    for e in &c {
        let lam = e.re;
        if lam < -tol {
            return None;
        }
        sqrt_eig.push((lam.max(0.0) / size as f64).sqrt());
    }
    Some(Plan::Circulant { sqrt_eig, fft })
}
