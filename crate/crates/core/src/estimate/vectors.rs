//! Normalised filters, extrapolation weight vectors and the asymptotic
//! variances built from them.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use super::hurst::{a_coeffs_at, ladder_lags};
use super::Regime;
use crate::error::{Error, Result};
use crate::fracgauss::{
    gamma_h, lag_cov_tail_bound, n_of_h, phi0, phi_h, quad_form_compact, quad_form_diag_smooth,
    rho_hr, weight_vector_a, weight_vector_a_prime, Hurst,
};
use crate::numeric::{dot, CompensatedSum};

/// Finite-difference step for `∂_H` of the filters.
pub const FILTER_DIFF_STEP: f64 = 1e-5;

pub fn gamma_vec(h: f64, len: usize) -> Result<Vec<f64>> {
    let h = Hurst::new(h)?;
    Ok((0..len).map(|k| gamma_h(h, k)).collect())
}

pub fn phi_vec(h: f64, len: usize) -> Result<Vec<f64>> {
    let h = Hurst::new(h)?;
    Ok((0..len).map(|k| phi_h(h, k)).collect())
}

fn pad(v: &[f64], len: usize) -> Result<Vec<f64>> {
    if v.len() > len {
        if v[len..].iter().any(|x| *x != 0.0) {
            return Err(Error::Invalid(format!(
                "filter of length {} does not fit in {len} lags",
                v.len()
            )));
        }
        return Ok(v[..len].to_vec());
    }
    let mut out = v.to_vec();
    out.resize(len, 0.0);
    Ok(out)
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

fn scaled(a: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| a * v).collect()
}

/// `θ̄(H)` (annihilates `Φ^H`, unit inner product with `Γ^H`) and `ϑ̄(H)`
/// (annihilates `Γ^H`, unit inner product with `Φ^H`) for filters `v`, `w`.
fn normalised(h: f64, v: &[f64], w: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let len = v.len();
    let g = gamma_vec(h, len)?;
    let f = phi_vec(h, len)?;
    let (vg, wg, vf, wf) = (dot(v, &g), dot(w, &g), dot(v, &f), dot(w, &f));
    let gap = (vf / vg - wf / wg).abs();
    if !gap.is_finite() || gap < 1e-10 {
        return Err(Error::FilterCondition { h, gap });
    }
    let theta: Vec<f64> = v.iter().zip(w).map(|(a, b)| a / vf - b / wf).collect();
    let vartheta: Vec<f64> = v.iter().zip(w).map(|(a, b)| a / vg - b / wg).collect();
    let tg = dot(&theta, &g);
    let vtf = dot(&vartheta, &f);
    Ok((scaled(1.0 / tg, &theta), scaled(1.0 / vtf, &vartheta), gap))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Filters {
    pub h: f64,
    pub theta_bar: Vec<f64>,
    pub vartheta_bar: Vec<f64>,
    /// `Φ^H_0 ϑ̄(H)`.
    pub psi: Vec<f64>,
    pub d_theta_bar: Vec<f64>,
    pub d_vartheta_bar: Vec<f64>,
    pub d_psi: Vec<f64>,
    /// `|⟨v,Φ⟩/⟨v,Γ⟩ − ⟨w,Φ⟩/⟨w,Γ⟩|`.
    pub condition_gap: f64,
}

impl Filters {
    pub fn new(h: f64, v: &[f64], w: &[f64], len: usize) -> Result<Self> {
        Self::with_step(h, v, w, len, FILTER_DIFF_STEP)
    }

    /// Same as [`Filters::new`] with a custom difference step.
    pub fn with_step(h: f64, v: &[f64], w: &[f64], len: usize, step: f64) -> Result<Self> {
        let v = pad(v, len)?;
        let w = pad(w, len)?;
        if v.first().copied().unwrap_or(0.0) != 0.0 || w.first().copied().unwrap_or(0.0) != 0.0 {
            return Err(Error::Invalid("filters must have zero first entry".into()));
        }
        let (tb, vb, gap) = normalised(h, &v, &w)?;
        let (tp, vp, _) = normalised(h + step, &v, &w)?;
        let (tm, vm, _) = normalised(h - step, &v, &w)?;
        let diff = |p: &[f64], m: &[f64]| -> Vec<f64> {
            p.iter().zip(m).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        };
        let (p0, pp, pm) = (phi0(h), phi0(h + step), phi0(h - step));
        let psi = scaled(p0, &vb);
        let d_psi = diff(&scaled(pp, &vp), &scaled(pm, &vm));
        Ok(Self {
            h,
            d_theta_bar: diff(&tp, &tm),
            d_vartheta_bar: diff(&vp, &vm),
            theta_bar: tb,
            vartheta_bar: vb,
            psi,
            d_psi,
            condition_gap: gap,
        })
    }

    pub fn unit(len: usize, idx: usize) -> Vec<f64> {
        let mut e = vec![0.0; len];
        e[idx] = 1.0;
        e
    }
}

/// Weight vectors of the linearised estimators at `H` with extrapolation
/// order `n`.
///
/// Rough: `u` is `u_{r,H}/(r/2)^{2H}` and `Ĥ − H ≈ Δ^{½}⟨u,Z⟩/(denom·Π)`.
/// Smooth: `u` is `u′_{r,H}` and `Ĥ′ − H ≈ Δ^{1−H}⟨u,Z′⟩/(denom·Λ)`, with
/// `Φ^H_0` included in `denom`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UVectors {
    pub regime: Regime,
    pub h: f64,
    pub n: u32,
    pub r: usize,
    pub u: Vec<f64>,
    pub sum_a: f64,
    pub denom: f64,
    pub u_pi: Vec<f64>,
    pub u_lambda: Vec<f64>,
    pub u_c: Vec<f64>,
    pub filters: Filters,
}

/// `u_{r,H}` normalised by `(r/2)^{2H}` (rough) or `u′_{r,H}` (smooth).
pub fn ladder_vector(h: f64, n: u32, regime: Regime) -> Result<Vec<f64>> {
    let r = ladder_lags(n, regime);
    let a = a_coeffs_at(n as usize, h, regime);
    let mut u = vec![0.0; r];
    match regime {
        Regime::Rough => {
            let q = 2f64.powf(2.0 * h);
            for (l, al) in a.iter().enumerate() {
                let s = r >> l;
                let c = (-q).powi(l as i32) * al;
                let hi = weight_vector_a(s, r)?;
                let lo = weight_vector_a(s / 2, r)?;
                for i in 0..r {
                    u[i] += c * (hi[i] - q * lo[i]);
                }
            }
            let norm = ((r / 2) as f64).powf(2.0 * h);
            Ok(scaled(1.0 / norm, &u))
        }
        Regime::Smooth => {
            let q = 2f64.powf(h + 0.5);
            for (l, al) in a.iter().enumerate() {
                let s = r >> l;
                let c = (-q).powi(l as i32) * al;
                let hi = weight_vector_a_prime(s, r)?;
                let lo = weight_vector_a_prime(s / 2, r)?;
                for i in 0..r {
                    u[i] += c * (hi[i] - q * lo[i]);
                }
            }
            let kappa = 1.0 - 2f64.powf(0.5 - h);
            let norm = ((r / 2) as f64).powf(h + 0.5) * kappa;
            Ok(scaled(1.0 / norm, &u))
        }
    }
}

fn alt_sum(a: &[f64]) -> f64 {
    a.iter()
        .enumerate()
        .map(|(l, v)| if l % 2 == 0 { *v } else { -v })
        .sum()
}

pub fn u_vectors(h: f64, n: u32, regime: Regime, v: &[f64], w: &[f64]) -> Result<UVectors> {
    let r = ladder_lags(n, regime);
    let u = ladder_vector(h, n, regime)?;
    let sum_a = alt_sum(&a_coeffs_at(n as usize, h, regime));
    let filters = Filters::new(h, v, w, r)?;
    let g = gamma_vec(h, r)?;
    let f = phi_vec(h, r)?;
    let e1 = Filters::unit(r, 0);
    let (denom, u_pi, u_lambda, u_c) = match regime {
        Regime::Rough => {
            let denom = 2f64.powf(1.0 + 2.0 * h) * LN_2 * sum_a;
            let u_pi = axpy(dot(&filters.d_theta_bar, &g) / denom, &u, &filters.theta_bar);
            let p0 = phi0(h);
            let u_lambda = scaled(
                p0,
                &axpy(dot(&filters.d_vartheta_bar, &g) / denom, &u, &filters.vartheta_bar),
            );
            let u_c: Vec<f64> = (0..r).map(|i| e1[i] - u_pi[i] - u_lambda[i]).collect();
            (denom, u_pi, u_lambda, u_c)
        }
        Regime::Smooth => {
            let denom = 2f64.powf(h + 0.5) * LN_2 * sum_a * phi0(h);
            let u_pi = axpy(dot(&filters.d_theta_bar, &f) / denom, &u, &filters.theta_bar);
            let u_lambda = axpy(dot(&filters.d_psi, &f) / denom, &u, &filters.psi);
            let u_c: Vec<f64> = (0..r).map(|i| 2.0 * e1[i] - u_pi[i] - u_lambda[i]).collect();
            (denom, u_pi, u_lambda, u_c)
        }
    };
    Ok(UVectors {
        regime,
        h,
        n,
        r,
        u,
        sum_a,
        denom,
        u_pi,
        u_lambda,
        u_c,
        filters,
    })
}

/// Both representations of the rough-regime variance constant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarHForms {
    /// Series in `ρ_{H,s}(k)`.
    pub series: f64,
    /// `uᵀ𝒞u`.
    pub quadratic: f64,
    pub tolerance: f64,
}

pub fn var_h_forms(h: Hurst, k_max: usize) -> Result<VarHForms> {
    if !h.is_rough() {
        return Err(Error::Regime(format!("Var_H needs H < 1/2, got {h}")));
    }
    let n = n_of_h(h).ok_or_else(|| Error::Regime("H = 1/2".into()))?;
    let hv = h.value();
    let r = ladder_lags(n, Regime::Rough);
    let a = a_coeffs_at(n as usize, hv, Regime::Rough);
    let q = -(2f64.powf(2.0 * hv));
    // coefficient of ρ_{H, r/2^ℓ}, ℓ = 0..=n+1
    let mut coef = vec![0.0; n as usize + 2];
    coef[0] = a[0];
    for l in 1..=n as usize {
        coef[l] = q.powi(l as i32) * (a[l] + a[l - 1]);
    }
    coef[n as usize + 1] = q.powi(n as i32 + 1);
    let mut s = CompensatedSum::new();
    for k in 1..=k_max {
        let inner: f64 = coef
            .iter()
            .enumerate()
            .map(|(l, c)| c * rho_hr(h, r >> l, k))
            .sum();
        s.add(inner * inner);
    }
    let series = s.value() / 2f64.powf(4.0 * hv * n as f64);

    let u = ladder_vector(hv, n, Regime::Rough)?;
    let quadratic = quad_form_compact(h, &u, k_max);
    let l1: f64 = u.iter().map(|x| x.abs()).sum();
    let tolerance = (1e-9 * series.abs()).max(2.0 * l1 * l1 * lag_cov_tail_bound(h, r, k_max));
    if (series - quadratic).abs() > tolerance {
        return Err(Error::Truncation(format!(
            "Var_H representations differ: {series} vs {quadratic} (tolerance {tolerance:e})"
        )));
    }
    Ok(VarHForms {
        series,
        quadratic,
        tolerance,
    })
}

/// `Var_H`, the rough-regime constant in the limiting variance of `Ĥ`.
pub fn var_h(h: Hurst, k_max: usize) -> Result<f64> {
    Ok(var_h_forms(h, k_max)?.series)
}

/// `Var′_H = ‖u′‖²`, the smooth-regime constant.
pub fn var_h_prime(h: Hurst) -> Result<f64> {
    if h.value() <= 0.5 {
        return Err(Error::Regime(format!("Var'_H needs H > 1/2, got {h}")));
    }
    let n = n_of_h(h).ok_or_else(|| Error::Regime("H = 1/2".into()))?;
    let u = ladder_vector(h.value(), n, Regime::Smooth)?;
    Ok(quad_form_diag_smooth(&u))
}
