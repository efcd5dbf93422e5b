//! Closed-form kernels for fractional Gaussian noise and the mixed model.
//!
//! Conventions: `Γ^H_r` is the fGn autocovariance at lag `r`, `Φ^H_r` the
//! cross term between a Brownian increment and the Riemann–Liouville
//! convolution `∫ K_H⁻¹ (t−s)^{H−½} dB_s`, and `a_r` the triangular weight
//! vector `(r, 2(r−1), …, 2)`.

mod lagcov;
mod matrices;
pub mod quad;
mod spectral;

pub use lagcov::{
    lag_cov_matrix, lag_cov_tail_bound, quad_form_compact, quad_form_diag_smooth, LagCovMatrix,
};
pub use matrices::{cholesky_lower, fgn_toeplitz, mixed_autocov, mixed_cov, toeplitz};
pub use quad::{g_first_cell, g_increment_inner, g_truncated_square, k_h_integral};
pub use spectral::{spectral_autocov, spectral_density, SPECTRAL_TERMS_DEFAULT};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Default truncation of the infinite lag series.
pub const SERIES_CUTOFF_DEFAULT: usize = 10_000;

/// A Hurst index in the open unit interval.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Hurst(f64);

impl Hurst {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 1.0 {
            Ok(Self(value))
        } else {
            Err(Error::Domain {
                name: "H",
                value,
                domain: "(0, 1)",
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// The intermediate index `½(H + ½)`.
    pub fn bar(self) -> Hurst {
        Hurst(0.5 * (self.0 + 0.5))
    }

    pub fn is_rough(self) -> bool {
        self.0 < 0.5
    }
}

impl TryFrom<f64> for Hurst {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Hurst::new(v)
    }
}

impl From<Hurst> for f64 {
    fn from(h: Hurst) -> f64 {
        h.0
    }
}

impl std::fmt::Display for Hurst {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// The parametric mixed fBm `θ = (H, σ², Λ, Π)`.
///
/// `Λ = ρσ` is the covolatility and `Π = ρ² + ρ′²` the total fractional
/// variance. Values built with [`ModelTheta::new`] satisfy `σ² > 0`, `Π > 0`
/// and `Λ² < σ²Π`; [`ModelTheta::boundary`] admits the closure of that set
/// for degenerate simulations (pure fGn, pure Brownian motion).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThetaFields", into = "ThetaFields")]
pub struct ModelTheta {
    h: Hurst,
    sigma_sq: f64,
    lambda_cov: f64,
    pi_total: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
struct ThetaFields {
    h: f64,
    sigma_sq: f64,
    lambda_cov: f64,
    pi_total: f64,
}

impl TryFrom<ThetaFields> for ModelTheta {
    type Error = Error;
    fn try_from(t: ThetaFields) -> Result<Self> {
        ModelTheta::boundary(t.h, t.sigma_sq, t.lambda_cov, t.pi_total)
    }
}

impl From<ModelTheta> for ThetaFields {
    fn from(t: ModelTheta) -> Self {
        ThetaFields {
            h: t.h.0,
            sigma_sq: t.sigma_sq,
            lambda_cov: t.lambda_cov,
            pi_total: t.pi_total,
        }
    }
}

impl ModelTheta {
    pub fn new(h: f64, sigma_sq: f64, lambda_cov: f64, pi_total: f64) -> Result<Self> {
        let theta = Self::boundary(h, sigma_sq, lambda_cov, pi_total)?;
        if !theta.is_interior() {
            return Err(Error::ParameterSet(format!(
                "need sigma_sq > 0, pi_total > 0 and lambda^2 < sigma_sq * pi_total, got {theta}"
            )));
        }
        Ok(theta)
    }

    pub fn boundary(h: f64, sigma_sq: f64, lambda_cov: f64, pi_total: f64) -> Result<Self> {
        let h = Hurst::new(h)?;
        let finite = sigma_sq.is_finite() && lambda_cov.is_finite() && pi_total.is_finite();
        if !finite || sigma_sq < 0.0 || pi_total < 0.0 {
            return Err(Error::ParameterSet(format!(
                "need finite sigma_sq >= 0 and pi_total >= 0, got ({sigma_sq}, {lambda_cov}, {pi_total})"
            )));
        }
        if lambda_cov * lambda_cov > sigma_sq * pi_total * (1.0 + 1e-12) {
            return Err(Error::ParameterSet(format!(
                "lambda^2 = {} exceeds sigma_sq * pi_total = {}",
                lambda_cov * lambda_cov,
                sigma_sq * pi_total
            )));
        }
        Ok(Self {
            h,
            sigma_sq,
            lambda_cov,
            pi_total,
        })
    }

    /// Builds θ from the driver coefficients `σ`, `ρ`, `ρ′`.
    pub fn from_factors(h: f64, sigma: f64, rho: f64, rho_prime: f64) -> Result<Self> {
        Self::boundary(h, sigma * sigma, rho * sigma, rho * rho + rho_prime * rho_prime)
    }

    pub fn is_interior(&self) -> bool {
        self.sigma_sq > 0.0
            && self.pi_total > 0.0
            && self.lambda_cov * self.lambda_cov < self.sigma_sq * self.pi_total
    }

    pub fn h(&self) -> Hurst {
        self.h
    }

    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    pub fn lambda_cov(&self) -> f64 {
        self.lambda_cov
    }

    pub fn pi_total(&self) -> f64 {
        self.pi_total
    }

    pub fn sigma(&self) -> f64 {
        self.sigma_sq.sqrt()
    }

    /// Loading of the fractional part on the martingale driver.
    pub fn rho(&self) -> f64 {
        if self.sigma_sq > 0.0 {
            self.lambda_cov / self.sigma()
        } else {
            0.0
        }
    }

    /// Loading on the independent driver, `sqrt(Π − ρ²)`.
    pub fn rho_prime(&self) -> f64 {
        (self.pi_total - self.rho().powi(2)).max(0.0).sqrt()
    }

    /// Correlation between the martingale driver and the total fractional
    /// driver, `Λ / (σ √Π)`; carries the sign of `Λ`.
    pub fn lambda_corr(&self) -> f64 {
        let d = self.sigma() * self.pi_total.sqrt();
        if d > 0.0 {
            self.lambda_cov / d
        } else {
            0.0
        }
    }

    /// Cross-term coefficient `Λ b(H)` of the `Γ^{H̄}` component.
    pub fn cross_coefficient(&self) -> f64 {
        self.lambda_cov * b_h(self.h)
    }

    /// The value the lagged-QV estimator of the covolatility converges to on
    /// a unit horizon when data follow this parametric model: the cross term
    /// `Λ b(H) Γ^{H̄}` is read through `Φ^H = Φ^H_0 Γ^{H̄}`.
    pub fn covolatility_target(&self) -> f64 {
        self.lambda_cov * b_h(self.h) / phi0(self.h.0)
    }

    pub fn with_h(&self, h: f64) -> Result<Self> {
        Self::boundary(h, self.sigma_sq, self.lambda_cov, self.pi_total)
    }
}

impl std::fmt::Display for ModelTheta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "(H={}, sigma_sq={}, lambda={}, pi={})",
            self.h, self.sigma_sq, self.lambda_cov, self.pi_total
        )
    }
}

/// `K_H = Γ(H+½) / sqrt(2H sin(πH) Γ(2H))`, the constant that gives the
/// kernel `K_H⁻¹ t^{H−½}` unit-variance increments.
pub fn k_h(h: Hurst) -> f64 {
    k_h_raw(h.0)
}

pub(crate) fn k_h_raw(h: f64) -> f64 {
    gamma(h + 0.5) / (2.0 * h * (PI * h).sin() * gamma(2.0 * h)).sqrt()
}

/// `b(H) = 2 / Γ(H + 3/2)`.
pub fn b_h(h: Hurst) -> f64 {
    2.0 / gamma(h.0 + 1.5)
}

/// fGn autocovariance `Γ^H_r`.
pub fn gamma_h(h: Hurst, r: usize) -> f64 {
    gamma_raw(h.0, r)
}

pub(crate) fn gamma_raw(h: f64, r: usize) -> f64 {
    if r == 0 {
        1.0
    } else {
        0.5 * sym_diff(2.0 * h, r as f64, 1.0)
    }
}

/// `Φ^H_r`.
pub fn phi_h(h: Hurst, r: usize) -> f64 {
    phi_raw(h.0, r)
}

pub(crate) fn phi0(h: f64) -> f64 {
    2.0 / (k_h_raw(h) * (h + 0.5))
}

pub(crate) fn phi_raw(h: f64, r: usize) -> f64 {
    let p0 = phi0(h);
    if r == 0 {
        p0
    } else {
        p0 * 0.5 * sym_diff(h + 0.5, r as f64, 1.0)
    }
}

/// `ρ_{H,r}(k) = (k+r)^{2H} − 2k^{2H} + |k−r|^{2H}`.
pub fn rho_hr(h: Hurst, r: usize, k: usize) -> f64 {
    sym_diff(2.0 * h.0, k as f64, r as f64)
}

/// `(k+r)^p − 2k^p + |k−r|^p`, switching to the even binomial series when
/// `r/k` is small so that no digits are lost to cancellation.
pub(crate) fn sym_diff(p: f64, k: f64, r: f64) -> f64 {
    if k < 4.0 * r {
        return (k + r).powf(p) - 2.0 * k.powf(p) + (k - r).abs().powf(p);
    }
    let x2 = (r / k).powi(2);
    let mut coef = p * (p - 1.0) / 2.0;
    let mut xp = x2;
    let mut acc = 0.0;
    let mut j = 2.0;
    for _ in 0..64 {
        let term = coef * xp;
        acc += term;
        if term.abs() <= 1e-18 * acc.abs() {
            break;
        }
        coef *= (p - j) * (p - j - 1.0) / ((j + 1.0) * (j + 2.0));
        xp *= x2;
        j += 2.0;
    }
    2.0 * k.powf(p) * acc
}

/// `N(H) = ⌊1/|2H−1|⌋`; `None` at `H = ½`.
pub fn n_of_h(h: Hurst) -> Option<u32> {
    let d = (2.0 * h.0 - 1.0).abs();
    if d == 0.0 {
        None
    } else {
        Some((1.0 / d).floor().min(u32::MAX as f64) as u32)
    }
}

/// True when `1/|2H−1|` sits within `tol` of an integer, where the floor in
/// [`n_of_h`] is numerically fragile.
pub fn n_near_integer(h: Hurst, tol: f64) -> bool {
    let d = (2.0 * h.0 - 1.0).abs();
    if d == 0.0 {
        return false;
    }
    let x = 1.0 / d;
    (x - x.round()).abs() * d < tol
}

/// `a_r = (r, 2(r−1), …, 2)` zero-padded to `len`. Any `r ≥ 1` is accepted
/// (`a_1 = (1)` closes the dyadic ladder).
pub fn weight_vector_a(r: usize, len: usize) -> Result<Vec<f64>> {
    if r == 0 || r > len {
        return Err(Error::Invalid(format!(
            "weight vector a_{r} needs 1 <= r <= len = {len}"
        )));
    }
    let mut v = vec![0.0; len];
    v[0] = r as f64;
    for (j, x) in v.iter_mut().enumerate().take(r).skip(1) {
        *x = 2.0 * (r - j) as f64;
    }
    Ok(v)
}

/// `a′_r = a_r − 2 a_{r/2}`, defined for even `r`; its first entry is 0.
pub fn weight_vector_a_prime(r: usize, len: usize) -> Result<Vec<f64>> {
    if r < 2 || r % 2 != 0 {
        return Err(Error::Invalid(format!("a'_r needs even r >= 2, got {r}")));
    }
    let a = weight_vector_a(r, len)?;
    let b = weight_vector_a(r / 2, len)?;
    Ok(a.iter().zip(&b).map(|(x, y)| x - 2.0 * y).collect())
}

/// Precomputed kernels for one `H` and lag count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub h: Hurst,
    pub lags: usize,
    pub gamma: Vec<f64>,
    pub phi: Vec<f64>,
    pub k_h: f64,
    pub series_cutoff: usize,
    pub n_of_h: Option<u32>,
    pub lag_cov: Option<LagCovMatrix>,
}

impl KernelTable {
    /// Builds the table; the lag covariance matrix is included for `H < ½`.
    pub fn new(h: Hurst, lags: usize, series_cutoff: usize) -> Result<Self> {
        if lags == 0 {
            return Err(Error::Invalid("lag count must be positive".into()));
        }
        let lag_cov = if h.is_rough() {
            Some(lag_cov_matrix(h, lags, series_cutoff)?)
        } else {
            None
        };
        Ok(Self {
            h,
            lags,
            gamma: (0..lags).map(|r| gamma_h(h, r)).collect(),
            phi: (0..lags).map(|r| phi_h(h, r)).collect(),
            k_h: k_h(h),
            series_cutoff,
            n_of_h: n_of_h(h),
            lag_cov,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
