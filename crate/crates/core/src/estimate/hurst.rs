use serde::{Deserialize, Serialize};

use super::{EstimateOptions, LaggedQV, Regime};
use crate::error::{Error, Result};
use crate::fracgauss::{n_of_h, weight_vector_a, weight_vector_a_prime, Hurst};
use crate::numeric::dot;

/// `A_{k,ℓ}(x_1, …, x_{ℓ+1})` for `ℓ = 0..=k`, by the multinomial closed
/// form and by the recursion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ACoeffs {
    pub k: usize,
    pub regime: Regime,
    pub closed: Vec<f64>,
    pub recursive: Vec<f64>,
}

impl ACoeffs {
    pub fn values(&self) -> &[f64] {
        &self.recursive
    }
}

/// Exponent slope `½ − x` (rough) or `x − ½` (smooth).
fn gap(x: f64, regime: Regime) -> f64 {
    match regime {
        Regime::Rough => 0.5 - x,
        Regime::Smooth => x - 0.5,
    }
}

fn a_recursive(k: usize, l: usize, x: &[f64], regime: Regime) -> f64 {
    if l == k {
        return 1.0;
    }
    let d = gap(x[0], regime);
    if l == 0 {
        return 2f64.powf(-0.5 * d * (k * (k + 1)) as f64);
    }
    2f64.powf(-d * k as f64) * a_recursive(k - 1, l, x, regime)
        + a_recursive(k - 1, l - 1, &x[1..], regime)
}

/// Calls `f` with every `ν ∈ ℕ₀^parts` summing to `total`.
fn compositions(total: usize, parts: usize, f: &mut dyn FnMut(&[usize])) {
    fn rec(rest: usize, idx: usize, nu: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if idx + 1 == nu.len() {
            nu[idx] = rest;
            f(nu);
            return;
        }
        for v in 0..=rest {
            nu[idx] = v;
            rec(rest - v, idx + 1, nu, f);
        }
    }
    let mut nu = vec![0; parts];
    rec(total, 0, &mut nu, f);
}

fn a_closed(k: usize, l: usize, x: &[f64], regime: Regime) -> f64 {
    let mut total = 0.0;
    compositions(k - l, l + 1, &mut |nu| {
        let mut exponent = 0.0;
        let mut before = 0usize;
        for (j0, &nj) in nu.iter().enumerate() {
            let j = j0 + 1;
            // S_j = Σ_{i<ν_j} (k − Σ_{m<j} ν_m − j + 1 − i)
            let top = k as i64 - before as i64 - j as i64 + 1;
            let s: i64 = (0..nj as i64).map(|i| top - i).sum();
            exponent -= s as f64 * gap(x[j0], regime);
            before += nj;
        }
        total += 2f64.powf(exponent);
    });
    total
}

/// `x` must have length at least `k + 1`; entry `ℓ` uses `x[0..=ℓ]`.
pub fn a_coeffs(k: usize, x: &[f64], regime: Regime) -> Result<ACoeffs> {
    if x.len() < k + 1 {
        return Err(Error::Invalid(format!(
            "A-coefficients of order {k} need {} arguments, got {}",
            k + 1,
            x.len()
        )));
    }
    let closed = (0..=k).map(|l| a_closed(k, l, x, regime)).collect();
    let recursive = (0..=k).map(|l| a_recursive(k, l, x, regime)).collect();
    Ok(ACoeffs {
        k,
        regime,
        closed,
        recursive,
    })
}

/// `A_{k,ℓ}(h, …, h)`.
pub fn a_coeffs_at(k: usize, h: f64, regime: Regime) -> Vec<f64> {
    let x = vec![h; k + 1];
    (0..=k).map(|l| a_recursive(k, l, &x, regime)).collect()
}

/// `Σ_ℓ (−1)^ℓ A_{k,ℓ}(h, …, h)`.
pub fn alternating_a_sum(k: usize, h: f64, regime: Regime) -> f64 {
    a_coeffs_at(k, h, regime)
        .iter()
        .enumerate()
        .map(|(l, a)| if l % 2 == 0 { *a } else { -a })
        .sum()
}

fn statistic_vector(qv: &LaggedQV) -> &[f64] {
    &qv.raw
}

fn ratio_of(num: f64, den: f64, what: &str) -> Result<f64> {
    if !(num > 0.0 && den > 0.0) {
        return Err(Error::NonPositiveStatistic(format!(
            "{what}: inner products {num:e} and {den:e} must both be positive"
        )));
    }
    Ok(num / den)
}

/// Weight-vector pair `(numerator, denominator)` for the pilot at lag `r`.
fn pilot_weights(r: usize, len: usize, regime: Regime) -> Result<(Vec<f64>, Vec<f64>)> {
    match regime {
        Regime::Rough => Ok((weight_vector_a(r, len)?, weight_vector_a(r / 2, len)?)),
        Regime::Smooth => Ok((
            weight_vector_a_prime(r, len)?,
            weight_vector_a_prime(r / 2, len)?,
        )),
    }
}

/// `½log₂(⟨a_r,V̂⟩/⟨a_{r/2},V̂⟩)` or `−½ + log₂(⟨a′_r,V̂⟩/⟨a′_{r/2},V̂⟩)`.
pub fn pilot_h(qv: &LaggedQV, r: usize, regime: Regime) -> Result<f64> {
    let min = match regime {
        Regime::Rough => 2,
        Regime::Smooth => 4,
    };
    if r < min || r % 2 != 0 {
        return Err(Error::Invalid(format!(
            "{regime} pilot needs an even lag count >= {min}, got {r}"
        )));
    }
    if r > qv.r {
        return Err(Error::LagTooLarge { r, n: qv.r });
    }
    let v = statistic_vector(qv);
    let (a, b) = pilot_weights(r, v.len(), regime)?;
    let q = ratio_of(dot(&a, v), dot(&b, v), &format!("pilot at r = {r}"))?;
    Ok(match regime {
        Regime::Rough => 0.5 * q.log2(),
        Regime::Smooth => -0.5 + q.log2(),
    })
}

/// Ladder length `r` for extrapolation order `n`.
pub fn ladder_lags(n: u32, regime: Regime) -> usize {
    match regime {
        Regime::Rough => 1 << (n + 1),
        Regime::Smooth => 1 << (n + 2),
    }
}

/// Pilots `H̃_{r/2^ℓ}`, `ℓ = 0..=n`.
pub fn ladder(qv: &LaggedQV, n: u32, regime: Regime) -> Result<Vec<f64>> {
    let r = ladder_lags(n, regime);
    (0..=n).map(|l| pilot_h(qv, r >> l, regime)).collect()
}

/// Extrapolated estimate from a ladder of pilots.
pub fn debiased_from_ladder(ladder: &[f64], regime: Regime) -> Result<f64> {
    if ladder.is_empty() {
        return Err(Error::Invalid("empty ladder".into()));
    }
    let k = ladder.len() - 1;
    let a = a_coeffs(k, ladder, regime)?;
    let mut num = 0.0;
    let mut den = 0.0;
    for (l, (&al, &hl)) in a.values().iter().zip(ladder).enumerate() {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        let base = match regime {
            Regime::Rough => 2f64.powf(2.0 * hl),
            Regime::Smooth => 2f64.powf(hl + 0.5),
        };
        num += sign * al * base;
        den += sign * al;
    }
    if den.abs() < 1e-12 {
        return Err(Error::DegenerateDenominator(den));
    }
    let q = num / den;
    if q <= 0.0 {
        return Err(Error::NonPositiveStatistic(format!(
            "extrapolated ratio {q:e} is not positive"
        )));
    }
    Ok(match regime {
        Regime::Rough => 0.5 * q.log2(),
        Regime::Smooth => -0.5 + q.log2(),
    })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HurstDiagnostics {
    pub pilot_raw: f64,
    pub pilot_clamped: bool,
    pub estimate_raw: f64,
    pub estimate_clamped: bool,
    /// `N(H̄)` before the cap.
    pub n_of_pilot: u32,
    pub n_used: u32,
    pub n_cap_binding: bool,
    /// `1/|2H̄−1|` within 1e-6 of an integer.
    pub n_near_integer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HurstEstimate {
    pub regime: Regime,
    pub h_hat: f64,
    /// The clamped pilot `H̄`.
    pub h_pilot: f64,
    pub lags: usize,
    pub ladder: Vec<f64>,
    pub diagnostics: HurstDiagnostics,
}

pub(crate) fn regime_interval(regime: Regime, eps: f64) -> (f64, f64) {
    match regime {
        Regime::Rough => (eps, 0.5 - eps),
        Regime::Smooth => (0.5 + eps, 1.0 - eps),
    }
}

/// Pilot, clamp, ladder and extrapolation.
pub fn estimate_h(qv: &LaggedQV, regime: Regime, opts: &EstimateOptions) -> Result<HurstEstimate> {
    let (lo, hi) = regime_interval(regime, opts.clamp_eps);
    let pilot_raw = pilot_h(qv, opts.pilot_r, regime)?;
    let h_pilot = pilot_raw.clamp(lo, hi);
    let hb = Hurst::new(h_pilot)?;
    let n_of_pilot = n_of_h(hb).ok_or_else(|| Error::Regime("pilot at H = 1/2".into()))?;
    let n_used = n_of_pilot.min(opts.n_cap).max(1);
    let inv = 1.0 / (2.0 * h_pilot - 1.0).abs();
    let lags = ladder_lags(n_used, regime);
    if lags > qv.r {
        return Err(Error::LagTooLarge { r: lags, n: qv.r });
    }
    let ladder = ladder(qv, n_used, regime)?;
    let estimate_raw = debiased_from_ladder(&ladder, regime)?;
    let h_hat = estimate_raw.clamp(lo, hi);
    Ok(HurstEstimate {
        regime,
        h_hat,
        h_pilot,
        lags,
        ladder,
        diagnostics: HurstDiagnostics {
            pilot_raw,
            pilot_clamped: pilot_raw != h_pilot,
            estimate_raw,
            estimate_clamped: estimate_raw != h_hat,
            n_of_pilot,
            n_used,
            n_cap_binding: n_of_pilot > opts.n_cap,
            n_near_integer: (inv - inv.round()).abs() < 1e-6,
        },
    })
}
