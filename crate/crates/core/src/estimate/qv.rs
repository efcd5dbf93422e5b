use serde::{Deserialize, Serialize};

use super::Regime;
use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;
use crate::simulate::IncrementSeries;

/// Lagged quadratic variations `V̂_j = Σ_{i=1}^{n−j} Δ_iY Δ_{i+j}Y`, `j < r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaggedQV {
    pub raw: Vec<f64>,
    /// `Δ^{1−2H} V̂`, once an `H` has been supplied.
    pub normalized: Option<Vec<f64>>,
    pub delta: f64,
    pub t_end: f64,
    pub r: usize,
    pub n: usize,
}

impl LaggedQV {
    pub fn normalize(&mut self, h: f64) {
        let s = self.delta.powf(1.0 - 2.0 * h);
        self.normalized = Some(self.raw.iter().map(|v| v * s).collect());
    }

    /// Builds a statistic directly from given values (for expectation inputs).
    pub fn from_raw(raw: Vec<f64>, delta: f64, t_end: f64) -> Self {
        let r = raw.len();
        Self {
            raw,
            normalized: None,
            delta,
            t_end,
            r,
            n: (t_end / delta).round() as usize,
        }
    }
}

pub fn lagged_qv(series: &IncrementSeries, r: usize) -> Result<LaggedQV> {
    let x = &series.increments;
    let n = x.len();
    if r == 0 || 2 * r >= n {
        return Err(Error::LagTooLarge { r, n });
    }
    let raw = (0..r)
        .map(|j| {
            let mut s = CompensatedSum::new();
            for i in 0..n - j {
                s.add(x[i] * x[i + j]);
            }
            s.value()
        })
        .collect();
    Ok(LaggedQV {
        raw,
        normalized: None,
        delta: series.delta,
        t_end: series.t_end,
        r,
        n,
    })
}

/// Fourth-power plug-in for the quarticity in the limiting variances:
/// `Δ^{1−4Ĥ}Σ(ΔY)⁴/3` (rough) or `Δ^{−1}Σ(ΔY)⁴/3` (smooth). The division
/// by the Gaussian fourth moment makes these consistent for
/// `∫(ρ²+ρ′²)²` and `∫σ⁴` respectively.
pub fn quarticity(series: &IncrementSeries, h_hat: f64, regime: Regime) -> f64 {
    let s: f64 = series.increments.iter().map(|x| x.powi(4)).sum();
    let scale = match regime {
        Regime::Rough => series.delta.powf(1.0 - 4.0 * h_hat),
        Regime::Smooth => 1.0 / series.delta,
    };
    scale * s / 3.0
}

/// `log₂ m(2Δ) − log₂ m(Δ) − 1` with `m` the mean squared increment;
/// about `2H − 1` when the fractional part dominates and about 0 when the
/// Brownian part does.
pub fn coarsening_slope(series: &IncrementSeries) -> Result<f64> {
    let x = &series.increments;
    let pairs = x.len() / 2;
    let fine = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let coarse = (0..pairs)
        .map(|i| (x[2 * i] + x[2 * i + 1]).powi(2))
        .sum::<f64>()
        / pairs as f64;
    if !(fine > 0.0 && coarse > 0.0) {
        return Err(Error::NonPositiveStatistic(
            "realised variance is zero; cannot choose a regime".into(),
        ));
    }
    Ok((coarse / fine).log2() - 1.0)
}
