use serde::{Deserialize, Serialize};

use super::{gamma_raw, Hurst};
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Asymptotic covariance of the √n-scaled lagged quadratic variations of
/// unit fGn with `H < ½`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LagCovMatrix {
    pub h: Hurst,
    pub entries: Vec<Vec<f64>>,
    pub series_cutoff: usize,
    /// Bound on the dropped tail of each entry's series.
    pub truncation_bound: f64,
    /// Largest entrywise gap between the explicit and the outer-product form.
    pub form_gap: f64,
}

impl LagCovMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    pub fn quad_form(&self, u: &[f64]) -> f64 {
        let r = self.dim().min(u.len());
        let mut s = CompensatedSum::new();
        for i in 0..r {
            for j in 0..r {
                s.add(u[i] * self.entries[i][j] * u[j]);
            }
        }
        s.value()
    }
}

/// `|Γ^H_k| ≤ H|2H−1|(k−1)^{2H−2}` summed over the dropped part of the
/// series gives this bound on each entry's truncation error.
pub fn lag_cov_tail_bound(h: Hurst, r: usize, k_max: usize) -> f64 {
    let h = h.value();
    let c = h * (2.0 * h - 1.0).abs();
    let base = k_max as f64 - r as f64 - 1.0;
    if base <= 0.0 {
        return f64::INFINITY;
    }
    4.0 * c * c * base.powf(4.0 * h - 3.0) / (3.0 - 4.0 * h)
}

fn gamma_table(h: f64, len: usize) -> Vec<f64> {
    (0..len).map(|k| gamma_raw(h, k)).collect()
}

/// Builds `𝒞` from the explicit lag series and cross-checks it against the
/// outer-product form `2ΓΓᵀ + Σ_k Γ^{(k)}Γ^{(k)ᵀ}`, `Γ^{(k)}_i = Γ_{k+i} + Γ_{|k−i|}`.
pub fn lag_cov_matrix(h: Hurst, r: usize, k_max: usize) -> Result<LagCovMatrix> {
    if !h.is_rough() {
        return Err(Error::Regime(format!(
            "lag covariance matrix needs H < 1/2, got {h}"
        )));
    }
    if r == 0 || k_max == 0 {
        return Err(Error::Invalid("need r >= 1 and k_max >= 1".into()));
    }
    let g = gamma_table(h.value(), k_max + 2 * r + 2);
    let gi = |k: i64| g[k.unsigned_abs() as usize];

    let mut explicit = vec![vec![0.0; r]; r];
    for i in 0..r {
        for j in i..r {
            let (ii, jj) = (i as i64, j as i64);
            let mut s = CompensatedSum::new();
            s.add(gi(ii - jj));
            s.add(gi(ii) * gi(jj));
            for k in 1..=k_max as i64 {
                s.add(gi(k) * gi(ii - jj + k));
                s.add(gi(k - jj) * gi(ii + k));
                s.add(gi(k) * gi(jj - ii + k));
                s.add(gi(k - ii) * gi(jj + k));
            }
            explicit[i][j] = s.value();
            explicit[j][i] = explicit[i][j];
        }
    }

    let mut compact = vec![vec![CompensatedSum::new(); r]; r];
    for i in 0..r {
        for j in 0..r {
            compact[i][j].add(2.0 * g[i] * g[j]);
        }
    }
    let mut col = vec![0.0; r];
    for k in 1..=k_max as i64 {
        for (i, c) in col.iter_mut().enumerate() {
            *c = gi(k + i as i64) + gi(k - i as i64);
        }
        for i in 0..r {
            for j in i..r {
                compact[i][j].add(col[i] * col[j]);
            }
        }
    }

    let bound = lag_cov_tail_bound(h, r, k_max);
    let mut gap: f64 = 0.0;
    for i in 0..r {
        for j in i..r {
            gap = gap.max((explicit[i][j] - compact[i][j].value()).abs());
        }
    }
    if gap > 2.0 * bound + 1e-12 {
        return Err(Error::Truncation(format!(
            "explicit and compact forms differ by {gap:e}, bound {bound:e}"
        )));
    }
    Ok(LagCovMatrix {
        h,
        entries: explicit,
        series_cutoff: k_max,
        truncation_bound: bound,
        form_gap: gap,
    })
}

/// `uᵀ𝒞u` through the outer-product form, `2⟨u,Γ⟩² + Σ_k ⟨u,Γ^{(k)}⟩²`;
/// O(r·k_max) instead of building the matrix.
pub fn quad_form_compact(h: Hurst, u: &[f64], k_max: usize) -> f64 {
    let r = u.len();
    let g = gamma_table(h.value(), k_max + r + 1);
    let head: f64 = u.iter().zip(&g).map(|(a, b)| a * b).sum();
    let mut s = CompensatedSum::new();
    s.add(2.0 * head * head);
    for k in 1..=k_max {
        let mut inner = 0.0;
        for (i, ui) in u.iter().enumerate() {
            inner += ui * (g[k + i] + g[k.abs_diff(i)]);
        }
        s.add(inner * inner);
    }
    s.value()
}

/// `xᵀ diag(2, 1, 1, …) x`, the limiting covariance shape in the smooth regime.
pub fn quad_form_diag_smooth(x: &[f64]) -> f64 {
    x.iter()
        .enumerate()
        .map(|(i, v)| if i == 0 { 2.0 * v * v } else { v * v })
        .sum()
}
