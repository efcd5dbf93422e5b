use std::fmt;

use serde::{Deserialize, Serialize};

use super::hurst::{estimate_h, ladder_lags, regime_interval, HurstDiagnostics};
use super::integrals::{confidence_intervals, estimate_integrals, CiInputs, Interval};
use super::qv::{coarsening_slope, lagged_qv, quarticity};
use super::{EstimateOptions, Regime, RegimeChoice};
use crate::error::{Error, Result};
use crate::fracgauss::{lag_cov_tail_bound, Hurst};
use crate::simulate::IncrementSeries;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeSource {
    Explicit,
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEstimate {
    pub identifiable: bool,
    pub value: Option<f64>,
    pub sd: Option<f64>,
    pub variance: Option<f64>,
    pub ci: Option<[f64; 2]>,
    /// Convergence rate of the estimator.
    pub rate: String,
    pub note: Option<String>,
}

impl ParamEstimate {
    fn new(value: Option<f64>, ci: Option<Interval>, rate: &str) -> Self {
        Self {
            identifiable: value.is_some(),
            value,
            sd: ci.map(|c| c.sd),
            variance: ci.map(|c| c.sd * c.sd),
            ci: ci.map(|c| [c.lower, c.upper]),
            rate: rate.to_string(),
            note: None,
        }
    }

    pub fn interval(&self) -> Option<Interval> {
        let (ci, sd) = (self.ci?, self.sd?);
        Some(Interval {
            lower: ci[0],
            upper: ci[1],
            sd,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateDiagnostics {
    pub hurst: HurstDiagnostics,
    pub filter_condition_gap: f64,
    pub coarsening_slope: Option<f64>,
    /// Bound on the neglected tail of the lag series in the rough `𝒞` forms.
    pub series_truncation_bound: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub regime: Regime,
    pub regime_source: RegimeSource,
    pub n: usize,
    pub delta: f64,
    pub t_end: f64,
    pub level: f64,
    pub h_pilot: f64,
    pub h: ParamEstimate,
    pub c: ParamEstimate,
    pub lambda: ParamEstimate,
    pub pi: ParamEstimate,
    pub quarticity: f64,
    pub lags: usize,
    pub ladder: Vec<f64>,
    pub diagnostics: EstimateDiagnostics,
}

impl EstimateReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_options(opts: &EstimateOptions) -> Result<()> {
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::Domain {
            name: "level",
            value: opts.level,
            domain: "(0, 1)",
        });
    }
    if !(opts.clamp_eps > 0.0 && opts.clamp_eps < 0.25) {
        return Err(Error::Domain {
            name: "clamp_eps",
            value: opts.clamp_eps,
            domain: "(0, 1/4)",
        });
    }
    if !(opts.identifiability_margin >= 0.0 && opts.identifiability_margin < 0.25) {
        return Err(Error::Domain {
            name: "identifiability_margin",
            value: opts.identifiability_margin,
            domain: "[0, 1/4)",
        });
    }
    Ok(())
}

fn rates(regime: Regime) -> [&'static str; 4] {
    match regime {
        Regime::Rough => ["Δ^(1/2)", "Δ^(2H-1/2)", "Δ^H", "Δ^(1/2) |log Δ|"],
        Regime::Smooth => ["Δ^(1-H)", "Δ^(1/2)", "Δ^(1-H) |log Δ|", "Δ^(3/2-2H)"],
    }
}

/// Regime choice, pilot, debiased `Ĥ`, integrated quantities, quarticity
/// and intervals for one series.
pub fn full_report(series: &IncrementSeries, opts: &EstimateOptions) -> Result<EstimateReport> {
    check_options(opts).map_err(|e| e.at("options"))?;
    let mut notes = Vec::new();
    let slope_res = coarsening_slope(series);
    let slope = slope_res.as_ref().ok().copied();
    let (regime, regime_source) = match opts.regime {
        RegimeChoice::Rough => (Regime::Rough, RegimeSource::Explicit),
        RegimeChoice::Smooth => (Regime::Smooth, RegimeSource::Explicit),
        RegimeChoice::Auto => {
            let s = slope_res.map_err(|e| e.at("regime"))?;
            let r = if s < opts.auto_threshold {
                Regime::Rough
            } else {
                Regime::Smooth
            };
            notes.push(format!("regime chosen from coarsening slope {s:.4}"));
            (r, RegimeSource::Auto)
        }
    };

    let lag_count = [
        ladder_lags(opts.n_cap.max(1), regime),
        opts.pilot_r,
        opts.v.len(),
        opts.w.len(),
        3,
    ]
    .into_iter()
    .max()
    .unwrap_or(3);
    let qv = lagged_qv(series, lag_count).map_err(|e| e.at("lagged variations"))?;
    let hest = estimate_h(&qv, regime, opts).map_err(|e| e.at("hurst"))?;
    let h = hest.h_hat;
    let d = &hest.diagnostics;
    if d.pilot_clamped {
        notes.push(format!("pilot {:.4} clamped to {:.4}", d.pilot_raw, hest.h_pilot));
    }
    if d.estimate_clamped {
        notes.push(format!("estimate {:.4} clamped to {h:.4}", d.estimate_raw));
    }
    if d.n_cap_binding {
        notes.push(format!(
            "extrapolation order capped at {} (pilot asks for {})",
            d.n_used, d.n_of_pilot
        ));
    }
    if d.n_near_integer {
        notes.push("1/|2H-1| is close to an integer at the pilot".into());
    }

    let est = estimate_integrals(
        &qv,
        h,
        regime,
        &opts.v,
        &opts.w,
        opts.identifiability_margin,
    )
    .map_err(|e| e.at("integrals"))?;
    let q = quarticity(series, h, regime);
    let ci = confidence_intervals(&CiInputs {
        regime,
        h_hat: h,
        n_used: d.n_used,
        delta: series.delta,
        estimates: est.clone(),
        quarticity: q,
        level: opts.level,
        series_cutoff: opts.series_cutoff,
        v: opts.v.clone(),
        w: opts.w.clone(),
    })
    .map_err(|e| e.at("confidence intervals"))?;

    let truncation = match regime {
        Regime::Rough => {
            let r = ladder_lags(d.n_used, regime);
            Some(lag_cov_tail_bound(Hurst::new(h)?, r, opts.series_cutoff))
        }
        Regime::Smooth => None,
    };

    let [rh, rc, rl, rp] = rates(regime);
    let mut hp = ParamEstimate::new(Some(h), ci.h, rh);
    let mut cp = ParamEstimate::new(est.c, ci.c, rc);
    let mut lp = ParamEstimate::new(est.lambda, ci.lambda, rl);
    let mut pp = ParamEstimate::new(est.pi, ci.pi, rp);
    let (lo, hi) = regime_interval(regime, opts.clamp_eps);
    if !(lo..=hi).contains(&h) {
        return Err(Error::Invalid(format!("estimate {h} outside [{lo}, {hi}]")).at("hurst"));
    }
    if !est.c_identifiable {
        cp.note = Some(format!(
            "not identifiable for H <= {}",
            0.25 + opts.identifiability_margin
        ));
    }
    if !est.pi_identifiable {
        pp.note = Some(format!(
            "not identifiable for H >= {}",
            0.75 - opts.identifiability_margin
        ));
    }
    for (name, p) in [("H", &mut hp), ("C", &mut cp), ("Lambda", &mut lp), ("Pi", &mut pp)] {
        if p.identifiable && p.ci.is_none() {
            p.note = Some("plug-in standard deviation is not finite and positive".into());
            notes.push(format!("no interval for {name}"));
        }
    }

    Ok(EstimateReport {
        regime,
        regime_source,
        n: series.len(),
        delta: series.delta,
        t_end: series.t_end,
        level: opts.level,
        h_pilot: hest.h_pilot,
        h: hp,
        c: cp,
        lambda: lp,
        pi: pp,
        quarticity: q,
        lags: hest.lags,
        ladder: hest.ladder,
        diagnostics: EstimateDiagnostics {
            hurst: hest.diagnostics,
            filter_condition_gap: est.condition_gap,
            coarsening_slope: slope,
            series_truncation_bound: truncation,
            notes,
        },
    })
}

/// Fixed notation for moderate magnitudes, scientific otherwise.
fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e5).contains(&a) || !v.is_finite() {
        format!("{v:.6}")
    } else {
        format!("{v:.4e}")
    }
}

fn cell(x: Option<f64>) -> String {
    x.map(num).unwrap_or_else(|| "-".into())
}

impl fmt::Display for EstimateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "regime {} ({:?}), n = {}, delta = {:e}, t = {}",
            self.regime, self.regime_source, self.n, self.delta, self.t_end
        )?;
        writeln!(f, "pilot H = {:.6}, lags = {}", self.h_pilot, self.lags)?;
        let pct = self.level * 100.0;
        writeln!(
            f,
            "{:<8} {:>13} {:>13} {:>28}  rate",
            "param",
            "estimate",
            "sd",
            format!("{pct:.0}% interval")
        )?;
        for (name, p) in [
            ("H", &self.h),
            ("C", &self.c),
            ("Lambda", &self.lambda),
            ("Pi", &self.pi),
        ] {
            let ci = p
                .ci
                .map(|c| format!("[{}, {}]", num(c[0]), num(c[1])))
                .unwrap_or_else(|| "-".into());
            write!(
                f,
                "{:<8} {:>13} {:>13} {:>28}  {}",
                name,
                cell(p.value),
                cell(p.sd),
                ci,
                p.rate
            )?;
            if let Some(n) = &p.note {
                write!(f, "  ({n})")?;
            }
            writeln!(f)?;
        }
        writeln!(f, "quarticity = {}", num(self.quarticity))?;
        for n in &self.diagnostics.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}
