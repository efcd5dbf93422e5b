use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::vectors::{gamma_vec, phi_vec, u_vectors, Filters};
use super::{LaggedQV, Regime};
use crate::error::{Error, Result};
use crate::fracgauss::{phi0, quad_form_compact, quad_form_diag_smooth, Hurst};
use crate::numeric::dot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegralEstimates {
    pub c: Option<f64>,
    pub lambda: Option<f64>,
    pub pi: Option<f64>,
    pub c_identifiable: bool,
    pub lambda_identifiable: bool,
    pub pi_identifiable: bool,
    pub condition_gap: f64,
}

/// `Π̂ = Δ^{1−2Ĥ}⟨θ̄,V̂⟩`, `Λ̂ = Δ^{½−Ĥ}⟨ϑ̄,V̂⟩` and
/// `Ĉ = V̂₀ − ⟨θ̄,V̂⟩ − Φ_0⟨ϑ̄,V̂⟩`, all at `Ĥ`. The same formulas serve
/// both regimes; identifiability differs.
pub fn estimate_integrals(
    qv: &LaggedQV,
    h_hat: f64,
    regime: Regime,
    v: &[f64],
    w: &[f64],
    margin: f64,
) -> Result<IntegralEstimates> {
    let len = qv.raw.len();
    if len < 3 {
        return Err(Error::LagTooLarge { r: 3, n: len });
    }
    let f = Filters::new(h_hat, v, w, len)?;
    let vhat = &qv.raw;
    let d = qv.delta;
    let tv = dot(&f.theta_bar, vhat);
    let lv = dot(&f.vartheta_bar, vhat);
    let pi = d.powf(1.0 - 2.0 * h_hat) * tv;
    let lambda = d.powf(0.5 - h_hat) * lv;
    let c = vhat[0] - tv - phi0(h_hat) * lv;
    let (c_ok, pi_ok) = match regime {
        Regime::Rough => (h_hat > 0.25 + margin, true),
        Regime::Smooth => (true, h_hat < 0.75 - margin),
    };
    Ok(IntegralEstimates {
        c: c_ok.then_some(c),
        lambda: Some(lambda),
        pi: pi_ok.then_some(pi),
        c_identifiable: c_ok,
        lambda_identifiable: true,
        pi_identifiable: pi_ok,
        condition_gap: f.condition_gap,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
    pub sd: f64,
}

impl Interval {
    fn around(x: f64, sd: f64, z: f64) -> Option<Self> {
        (sd.is_finite() && sd > 0.0 && x.is_finite()).then(|| Self {
            lower: x - z * sd,
            upper: x + z * sd,
            sd,
        })
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Plug-in inputs for [`confidence_intervals`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CiInputs {
    pub regime: Regime,
    pub h_hat: f64,
    /// Extrapolation order actually used.
    pub n_used: u32,
    pub delta: f64,
    pub estimates: IntegralEstimates,
    pub quarticity: f64,
    pub level: f64,
    pub series_cutoff: usize,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub h: Option<Interval>,
    pub c: Option<Interval>,
    pub lambda: Option<Interval>,
    pub pi: Option<Interval>,
}

pub fn z_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Domain {
            name: "level",
            value: level,
            domain: "(0, 1)",
        });
    }
    let n = Normal::new(0.0, 1.0).map_err(|e| Error::Invalid(e.to_string()))?;
    Ok(n.inverse_cdf(0.5 + 0.5 * level))
}

fn comb(terms: &[(f64, &[f64])]) -> Vec<f64> {
    let len = terms[0].1.len();
    (0..len)
        .map(|i| terms.iter().map(|(c, v)| c * v[i]).sum())
        .collect()
}

/// Normal intervals from the first-order expansions of the estimators,
/// including the non-leading terms that matter at moderate `n`.
pub fn confidence_intervals(inp: &CiInputs) -> Result<Intervals> {
    let z = z_quantile(inp.level)?;
    let h = inp.h_hat;
    let uv = u_vectors(h, inp.n_used, inp.regime, &inp.v, &inp.w)?;
    let f = &uv.filters;
    let r = uv.r;
    let g = gamma_vec(h, r)?;
    let ph = phi_vec(h, r)?;
    let d = inp.delta;
    let log_d = d.ln().abs();
    let q = inp.quarticity;
    let est = &inp.estimates;
    let mut out = Intervals::default();
    match inp.regime {
        Regime::Rough => {
            let hu = Hurst::new(h)?;
            let quad = |x: &[f64]| quad_form_compact(hu, x, inp.series_cutoff).max(0.0);
            let pi = est.pi.ok_or_else(|| Error::Invalid("rough regime needs pi".into()))?;
            let dp = uv.denom * pi;
            out.h = Interval::around(h, d.sqrt() * (quad(&uv.u) * q).sqrt() / dp.abs(), z);
            let x_pi = comb(&[(2.0 * log_d / uv.denom, &uv.u), (1.0, &uv.u_pi)]);
            out.pi = Interval::around(pi, d.sqrt() * (quad(&x_pi) * q).sqrt(), z);
            if let Some(lam) = est.lambda {
                let p0 = phi0(h);
                let extra = d.powf(0.5 - h) * log_d * lam / pi / uv.denom;
                let x = comb(&[(1.0 / p0, &uv.u_lambda), (extra, &uv.u)]);
                out.lambda = Interval::around(lam, d.powf(h) * (quad(&x) * q).sqrt(), z);
                if let Some(c) = est.c {
                    let tilt = dot(&f.d_theta_bar, &ph) + dot(&f.d_psi, &ph);
                    let extra = -d.powf(0.5 - h) * lam / pi * tilt / uv.denom;
                    let x = comb(&[(1.0, &uv.u_c), (extra, &uv.u)]);
                    out.c = Interval::around(c, d.powf(2.0 * h - 0.5) * (quad(&x) * q).sqrt(), z);
                }
            }
        }
        Regime::Smooth => {
            let quad = |x: &[f64]| quad_form_diag_smooth(x);
            let lam = est
                .lambda
                .ok_or_else(|| Error::Invalid("smooth regime needs lambda".into()))?;
            let rate = d.powf(1.0 - h);
            out.h = Interval::around(h, rate * (quad(&uv.u) * q).sqrt() / (uv.denom * lam).abs(), z);
            // Π-coupling terms, present only while Π is identifiable
            let pl = est.pi.map(|p| d.powf(h - 0.5) * p / lam).unwrap_or(0.0);
            let dvg = dot(&f.d_vartheta_bar, &g);
            let x_l = comb(&[
                ((log_d + dot(&f.d_vartheta_bar, &ph) + pl * dvg) / uv.denom, &uv.u),
                (1.0, &f.vartheta_bar),
            ]);
            out.lambda = Interval::around(lam, rate * (quad(&x_l) * q).sqrt(), z);
            if let Some(pi) = est.pi {
                let coef = dot(&f.d_theta_bar, &ph) + pl * (2.0 * log_d + dot(&f.d_theta_bar, &g));
                let x = comb(&[(coef / uv.denom, &uv.u), (1.0, &f.theta_bar)]);
                out.pi = Interval::around(pi, d.powf(1.5 - 2.0 * h) * (quad(&x) * q).sqrt(), z);
            }
            if let Some(c) = est.c {
                let e1 = Filters::unit(r, 0);
                let tilt = pl * (dot(&f.d_psi, &g) + dot(&f.d_theta_bar, &g));
                let x = comb(&[(1.0, &uv.u_c), (-1.0, &e1), (-tilt / uv.denom, &uv.u)]);
                out.c = Interval::around(c, d.sqrt() * (quad(&x) * q).sqrt(), z);
            }
        }
    }
    Ok(out)
}
