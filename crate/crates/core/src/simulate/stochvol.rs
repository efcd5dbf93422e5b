//! Hybrid scheme for the semiparametric model with stochastic coefficients.
//!
//! On the fine grid of step `δ = Δ/m` the fractional convolution
//! `∫_0^t g(t−s) ρ_s dB_s` is split into the cell ending at `t`, where the
//! kernel is singular, and all older cells. The singular cell is drawn
//! jointly with its Brownian increment from their exact covariance; an older
//! cell contributes its Brownian increment times the root-mean-square kernel
//! weight over that cell.

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracgauss::{k_h, Hurst};

/// Which Brownian motion drives an OU coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Driver {
    /// The martingale driver `B`.
    B,
    /// The independent fractional driver `B′`.
    BPrime,
    /// A Brownian motion independent of everything else.
    Own,
}

/// A coefficient process.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessSpec {
    Constant {
        value: f64,
    },
    /// `dx = κ(μ − x)dt + v dW`, started at `x0`.
    Ou {
        x0: f64,
        mean: f64,
        kappa: f64,
        vol: f64,
        driver: Driver,
    },
}

impl ProcessSpec {
    pub fn constant(value: f64) -> Self {
        ProcessSpec::Constant { value }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let ok = match *self {
            ProcessSpec::Constant { value } => value.is_finite(),
            ProcessSpec::Ou {
                x0,
                mean,
                kappa,
                vol,
                ..
            } => {
                x0.is_finite()
                    && mean.is_finite()
                    && kappa.is_finite()
                    && vol.is_finite()
                    && kappa >= 0.0
                    && vol >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Invalid(format!("process '{name}' has invalid parameters")))
        }
    }

    fn is_zero(&self) -> bool {
        matches!(*self, ProcessSpec::Constant { value } if value == 0.0)
    }

    fn path(&self, len: usize, dt: f64, db: &[f64], dbp: &[f64], own: &[f64]) -> Vec<f64> {
        match *self {
            ProcessSpec::Constant { value } => vec![value; len],
            ProcessSpec::Ou {
                x0,
                mean,
                kappa,
                vol,
                driver,
            } => {
                let dw = match driver {
                    Driver::B => db,
                    Driver::BPrime => dbp,
                    Driver::Own => own,
                };
                let mut out = Vec::with_capacity(len);
                let mut x = x0;
                for w in dw.iter().take(len) {
                    out.push(x);
                    x += kappa * (mean - x) * dt + vol * w;
                }
                out
            }
        }
    }
}

/// Model specification for [`sample_mixed_sm`](super::sample_mixed_sm).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochVolSpec {
    pub h: Hurst,
    pub drift: ProcessSpec,
    pub sigma_proc: ProcessSpec,
    pub rho_proc: ProcessSpec,
    pub rho_prime_proc: ProcessSpec,
    #[serde(default = "default_oversample")]
    pub oversample: usize,
}

fn default_oversample() -> usize {
    8
}

impl StochVolSpec {
    /// Constant coefficients, zero drift, default oversampling.
    pub fn constant(h: Hurst, sigma: f64, rho: f64, rho_prime: f64) -> Self {
        Self {
            h,
            drift: ProcessSpec::constant(0.0),
            sigma_proc: ProcessSpec::constant(sigma),
            rho_proc: ProcessSpec::constant(rho),
            rho_prime_proc: ProcessSpec::constant(rho_prime),
            oversample: default_oversample(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.oversample == 0 {
            return Err(Error::Invalid("oversample must be at least 1".into()));
        }
        self.drift.validate("drift")?;
        self.sigma_proc.validate("sigma")?;
        self.rho_proc.validate("rho")?;
        self.rho_prime_proc.validate("rho_prime")
    }
}

/// Fine-grid Riemann sums of the integrated functionals along a path.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratedTruth {
    /// `∫σ²`
    pub c: f64,
    /// `∫σρ`
    pub lambda: f64,
    /// `∫(ρ² + ρ′²)`
    pub pi: f64,
    /// `∫σ⁴`
    pub sigma_quarticity: f64,
    /// `∫(ρ² + ρ′²)²`
    pub frac_quarticity: f64,
}

fn normals<R: Rng + ?Sized>(rng: &mut R, len: usize, sd: f64) -> Vec<f64> {
    (0..len)
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `(k+1)^p − k^p` without cancellation for large `k`.
fn power_step(p: f64, k: f64) -> f64 {
    if k >= 1.0 {
        let x = k + 1.0;
        -x.powf(p) * (p * (-1.0 / x).ln_1p()).exp_m1()
    } else {
        (k + 1.0).powf(p) - k.powf(p)
    }
}

/// Kernel constants of the scheme at fine step `dt`: the singular cell's
/// regression coefficient on its Brownian increment, the residual standard
/// deviation, and the weights `w_k` (`w_0 = 0`) of older cells.
pub(crate) struct HybridWeights {
    pub slope: f64,
    pub resid_sd: f64,
    pub w: Vec<f64>,
}

pub(crate) fn hybrid_weights(h: Hurst, dt: f64, len: usize) -> HybridWeights {
    let hv = h.value();
    let kinv = 1.0 / k_h(h);
    let cov = kinv * dt.powf(hv + 0.5) / (hv + 0.5);
    let var = kinv * kinv * dt.powf(2.0 * hv) / (2.0 * hv);
    let slope = cov / dt;
    let resid_sd = (var - cov * slope).max(0.0).sqrt();
    let scale = kinv * (dt.powf(2.0 * hv - 1.0) / (2.0 * hv)).sqrt();
    let mut w = vec![0.0; len];
    for (k, wk) in w.iter_mut().enumerate().skip(1) {
        *wk = scale * power_step(2.0 * hv, k as f64).sqrt();
    }
    HybridWeights {
        slope,
        resid_sd,
        w,
    }
}

/// `out[j] = Σ_{k ≤ j} w[k] x[j−k]` for `j < x.len()`.
fn causal_convolution(w: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a: Vec<Complex64> = (0..size)
        .map(|i| Complex64::new(if i < n { w[i] } else { 0.0 }, 0.0))
        .collect();
    let mut b: Vec<Complex64> = (0..size)
        .map(|i| Complex64::new(if i < n { x[i] } else { 0.0 }, 0.0))
        .collect();
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v;
    }
    inv.process(&mut a);
    a.truncate(n);
    a.into_iter().map(|c| c.re / size as f64).collect()
}

pub(crate) struct StochVolPath {
    pub increments: Vec<f64>,
    pub truth: IntegratedTruth,
}

pub(crate) fn simulate_path<R: Rng + ?Sized>(
    spec: &StochVolSpec,
    n: usize,
    delta: f64,
    rng: &mut R,
) -> Result<StochVolPath> {
    spec.validate()?;
    let m = spec.oversample;
    let len = n * m;
    let dt = delta / m as f64;
    let sd = dt.sqrt();

    let db = normals(rng, len, sd);
    let dbp = normals(rng, len, sd);
    let mut own = |p: &ProcessSpec| match p {
        ProcessSpec::Ou {
            driver: Driver::Own,
            ..
        } => normals(rng, len, sd),
        _ => Vec::new(),
    };
    let own_a = own(&spec.drift);
    let own_s = own(&spec.sigma_proc);
    let own_r = own(&spec.rho_proc);
    let own_rp = own(&spec.rho_prime_proc);
    let z = normals(rng, len, 1.0);
    let zp = normals(rng, len, 1.0);

    let a = spec.drift.path(len, dt, &db, &dbp, &own_a);
    let sigma = spec.sigma_proc.path(len, dt, &db, &dbp, &own_s);
    let rho = spec.rho_proc.path(len, dt, &db, &dbp, &own_r);
    let rho_p = spec.rho_prime_proc.path(len, dt, &db, &dbp, &own_rp);

    let has_frac = !(spec.rho_proc.is_zero() && spec.rho_prime_proc.is_zero());
    // fractional part at fine times t_1..t_len
    let frac = if has_frac {
        let hw = hybrid_weights(spec.h, dt, len);
        let y: Vec<f64> = (0..len).map(|i| rho[i] * db[i] + rho_p[i] * dbp[i]).collect();
        let conv = causal_convolution(&hw.w, &y);
        (0..len)
            .map(|i| {
                let sing = rho[i] * (hw.slope * db[i] + hw.resid_sd * z[i])
                    + rho_p[i] * (hw.slope * dbp[i] + hw.resid_sd * zp[i]);
                sing + conv[i]
            })
            .collect()
    } else {
        vec![0.0; len]
    };

    let mut increments = Vec::with_capacity(n);
    let mut prev_frac = 0.0;
    for blk in 0..n {
        let mut s = 0.0;
        for i in blk * m..(blk + 1) * m {
            s += a[i] * dt + sigma[i] * db[i];
        }
        let cur = frac[(blk + 1) * m - 1];
        increments.push(s + cur - prev_frac);
        prev_frac = cur;
    }

    let mut truth = IntegratedTruth::default();
    for i in 0..len {
        let s2 = sigma[i] * sigma[i];
        let p = rho[i] * rho[i] + rho_p[i] * rho_p[i];
        truth.c += s2 * dt;
        truth.lambda += sigma[i] * rho[i] * dt;
        truth.pi += p * dt;
        truth.sigma_quarticity += s2 * s2 * dt;
        truth.frac_quarticity += p * p * dt;
    }
    Ok(StochVolPath { increments, truth })
}

/// Exact variance of the `k`-th unit-step increment (`k ≥ 1`) of the
/// scheme's fractional part with `ρ ≡ 1`, `ρ′ ≡ 0` and oversampling `m`.
/// The Riemann–Liouville target is `∫_0^k (g(k−t) − g(k−1−t))² dt`.
pub fn hybrid_increment_variance(h: Hurst, m: usize, k: usize) -> Result<f64> {
    if m == 0 || k == 0 {
        return Err(Error::Invalid("need m >= 1 and k >= 1".into()));
    }
    let dt = 1.0 / m as f64;
    let end = k * m;
    let start = (k - 1) * m;
    let hw = hybrid_weights(h, dt, end + 1);
    let mut var = 0.0;
    for i in 0..end {
        let mut alpha = 0.0;
        let mut beta = 0.0;
        if i + 1 < end {
            alpha += hw.w[end - 1 - i];
        } else {
            beta += 1.0;
        }
        if i + 1 < start {
            alpha -= hw.w[start - 1 - i];
        } else if i + 1 == start {
            beta -= 1.0;
        }
        let coef = alpha + beta * hw.slope;
        var += coef * coef * dt + beta * beta * hw.resid_sd * hw.resid_sd;
    }
    Ok(var)
}
