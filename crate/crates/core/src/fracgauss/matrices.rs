use faer::linalg::cholesky::llt::factor::LltError;
use faer::{Mat, Side};

use super::{b_h, gamma_raw, Hurst, ModelTheta};
use crate::error::{Error, Result};

/// Symmetric Toeplitz matrix with the given first row.
pub fn toeplitz(row: &[f64]) -> Mat<f64> {
    let n = row.len();
    Mat::from_fn(n, n, |i, j| row[i.abs_diff(j)])
}

/// `Σ_n(H) = (Γ^H_{|i−j|})`.
pub fn fgn_toeplitz(h: Hurst, n: usize) -> Mat<f64> {
    let row: Vec<f64> = (0..n).map(|k| gamma_raw(h.value(), k)).collect();
    toeplitz(&row)
}

/// First row of the increment covariance at step `delta`:
/// `σ²Δ·1{k=0} + ΠΔ^{2H}Γ^H_k + Λb(H)Δ^{2H̄}Γ^{H̄}_k`.
pub fn mixed_autocov(theta: &ModelTheta, delta: f64, len: usize) -> Vec<f64> {
    let h = theta.h().value();
    let hb = theta.h().bar().value();
    let c_pi = theta.pi_total() * delta.powf(2.0 * h);
    let c_la = theta.lambda_cov() * b_h(theta.h()) * delta.powf(2.0 * hb);
    (0..len)
        .map(|k| {
            let bm = if k == 0 { theta.sigma_sq() * delta } else { 0.0 };
            bm + c_pi * gamma_raw(h, k) + c_la * gamma_raw(hb, k)
        })
        .collect()
}

/// `Σ̃_n(θ) = σ²n⁻¹I + Πn^{−2H}Σ_n(H) + Λb(H)n^{−2H̄}Σ_n(H̄)`.
pub fn mixed_cov(theta: &ModelTheta, n: usize) -> Result<Mat<f64>> {
    if n == 0 {
        return Err(Error::Invalid("n must be positive".into()));
    }
    Ok(toeplitz(&mixed_autocov(theta, 1.0 / n as f64, n)))
}

/// Lower Cholesky factor; the error carries the first failing pivot.
pub fn cholesky_lower(m: &Mat<f64>) -> Result<Mat<f64>> {
    match m.llt(Side::Lower) {
        Ok(llt) => Ok(llt.L().to_owned()),
        Err(LltError::NonPositivePivot { index }) => Err(Error::NotPositiveDefinite { pivot: index }),
    }
}
