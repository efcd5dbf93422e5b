use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{anderson_darling, binomial_se, fit_line, summarize_errors, AndersonDarling};
use super::{ExperimentConfig, ExperimentKind, ModelConfig};
use crate::error::{Error, Result};
use crate::estimate::{full_report, Regime};
use crate::lowerbound::{kl_scan, kl_scan_kind, max_r0, KlScanResult, ScanKind};
use crate::simulate::{sample_mixed_sm_stream, IncrementSeries, MfbmSampler};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Param {
    H,
    C,
    Lambda,
    Pi,
}

impl Param {
    pub const ALL: [Param; 4] = [Param::H, Param::C, Param::Lambda, Param::Pi];

    fn idx(self) -> usize {
        self as usize
    }

    /// Exponent of `Δ` in the convergence rate and whether a `|log Δ|`
    /// factor accompanies it.
    pub fn rate(self, regime: Regime, h: f64) -> (f64, bool) {
        match (regime, self) {
            (Regime::Rough, Param::H) => (0.5, false),
            (Regime::Rough, Param::C) => (2.0 * h - 0.5, false),
            (Regime::Rough, Param::Lambda) => (h, false),
            (Regime::Rough, Param::Pi) => (0.5, true),
            (Regime::Smooth, Param::H) => (1.0 - h, false),
            (Regime::Smooth, Param::C) => (0.5, false),
            (Regime::Smooth, Param::Lambda) => (1.0 - h, true),
            (Regime::Smooth, Param::Pi) => (1.5 - 2.0 * h, false),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Param::H => "H",
            Param::C => "C",
            Param::Lambda => "Lambda",
            Param::Pi => "Pi",
        })
    }
}

/// Stream index of replication `rep` at grid position `grid_index`.
pub fn replication_stream(grid_index: usize, rep: usize) -> u64 {
    ((grid_index as u64) << 32) | rep as u64
}

#[derive(Clone, Debug)]
struct Rep {
    pilot: f64,
    est: [Option<f64>; 4],
    sd: [Option<f64>; 4],
    ci: [Option<[f64; 2]>; 4],
    truth: [f64; 4],
}

enum Source {
    Exact(MfbmSampler),
    Hybrid,
}

struct GridRun {
    n: usize,
    delta: f64,
    reps: Vec<Rep>,
    failures: usize,
}

fn truth_of(cfg: &ExperimentConfig, series: &IncrementSeries) -> Result<[f64; 4]> {
    let h = cfg.model.h().value();
    match &cfg.model {
        ModelConfig::Parametric { theta } => {
            let t = series.t_end;
            Ok([
                h,
                theta.sigma_sq() * t,
                theta.covolatility_target() * t,
                theta.pi_total() * t,
            ])
        }
        ModelConfig::StochVol { .. } => {
            let tr = series
                .meta
                .truth
                .as_ref()
                .ok_or_else(|| Error::Experiment("simulated path carries no truth".into()))?;
            Ok([h, tr.c, tr.lambda, tr.pi])
        }
    }
}

fn run_grid(cfg: &ExperimentConfig) -> Result<Vec<GridRun>> {
    cfg.validate()?;
    let opts = cfg.estimate_options();
    let mut out = Vec::with_capacity(cfg.n_grid.len());
    for (g, &n) in cfg.n_grid.iter().enumerate() {
        let delta = cfg.t_end / n as f64;
        let source = match &cfg.model {
            ModelConfig::Parametric { theta } => {
                Source::Exact(MfbmSampler::new(*theta, n, delta, cfg.method)?)
            }
            ModelConfig::StochVol { .. } => Source::Hybrid,
        };
        let results: Vec<Result<Rep>> = (0..cfg.replications)
            .into_par_iter()
            .map(|rep| {
                let stream = replication_stream(g, rep);
                let series = match (&source, &cfg.model) {
                    (Source::Exact(s), _) => s.sample(cfg.seed, stream),
                    (Source::Hybrid, ModelConfig::StochVol { spec }) => {
                        sample_mixed_sm_stream(spec, n, delta, cfg.seed, stream)?
                    }
                    _ => unreachable!(),
                };
                let truth = truth_of(cfg, &series)?;
                let r = full_report(&series, &opts)?;
                let ps = [&r.h, &r.c, &r.lambda, &r.pi];
                Ok(Rep {
                    pilot: r.diagnostics.hurst.pilot_raw,
                    est: ps.map(|p| p.value),
                    sd: ps.map(|p| p.sd),
                    ci: ps.map(|p| p.ci),
                    truth,
                })
            })
            .collect();
        let mut reps = Vec::with_capacity(results.len());
        let mut failures = 0;
        for r in results {
            match r {
                Ok(rep) => reps.push(rep),
                Err(e) => {
                    failures += 1;
                    match e.root() {
                        Error::NonPositiveStatistic(_)
                        | Error::DegenerateDenominator(_)
                        | Error::FilterCondition { .. } => {}
                        _ => return Err(e),
                    }
                }
            }
        }
        let rate = failures as f64 / cfg.replications as f64;
        if rate > cfg.max_failure_rate {
            return Err(Error::Experiment(format!(
                "{failures} of {} replications failed at n = {n}",
                cfg.replications
            )));
        }
        if failures > 0 {
            warn!("{failures} replications failed at n = {n}");
        }
        info!("n = {n}: {} replications done", reps.len());
        out.push(GridRun {
            n,
            delta,
            reps,
            failures,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub param: Param,
    pub n: usize,
    pub delta: f64,
    pub count: usize,
    pub failures: usize,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub param: Param,
    pub slope: f64,
    pub slope_se: f64,
    pub target: f64,
    /// The fit regressed `log(RMSE/|log Δ|)`.
    pub log_factor: bool,
}

impl SlopeFit {
    pub fn within(&self, tol: f64) -> bool {
        (self.slope - self.target).abs() <= tol
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateTable {
    pub model: ModelConfig,
    pub regime: Regime,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<RateRow>,
    pub slopes: Vec<SlopeFit>,
}

impl RateTable {
    pub fn slope(&self, p: Param) -> Option<&SlopeFit> {
        self.slopes.iter().find(|s| s.param == p)
    }

    pub fn rows_for(&self, p: Param) -> impl Iterator<Item = &RateRow> {
        self.rows.iter().filter(move |r| r.param == p)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

fn regime_of(cfg: &ExperimentConfig) -> Regime {
    cfg.model.regime()
}

pub fn run_rates(cfg: &ExperimentConfig) -> Result<RateTable> {
    let grid = run_grid(cfg)?;
    let regime = regime_of(cfg);
    let h = cfg.model.h().value();
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    for p in Param::ALL {
        let i = p.idx();
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let (target, log_factor) = p.rate(regime, h);
        for g in &grid {
            let errs: Vec<f64> = g
                .reps
                .iter()
                .filter_map(|r| r.est[i].map(|v| v - r.truth[i]))
                .collect();
            let Some(s) = summarize_errors(&errs) else {
                continue;
            };
            rows.push(RateRow {
                param: p,
                n: g.n,
                delta: g.delta,
                count: s.count,
                failures: g.failures,
                bias: s.bias,
                sd: s.sd,
                rmse: s.rmse,
            });
            let scale = if log_factor { g.delta.ln().abs() } else { 1.0 };
            if s.rmse > 0.0 {
                xs.push(g.delta.ln());
                ys.push((s.rmse / scale).ln());
            }
        }
        if xs.len() >= 2 {
            let fit = fit_line(&xs, &ys)?;
            slopes.push(SlopeFit {
                param: p,
                slope: fit.slope,
                slope_se: fit.slope_se,
                target,
                log_factor,
            });
        }
    }
    Ok(RateTable {
        model: cfg.model.clone(),
        regime,
        replications: cfg.replications,
        seed: cfg.seed,
        rows,
        slopes,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub param: Param,
    pub n: usize,
    pub count: usize,
    pub covered: usize,
    pub coverage: f64,
    pub se: f64,
    pub mean_width: f64,
    /// Normality check of `(estimate − truth)/sd`.
    pub ad_statistic: Option<f64>,
    pub ad_p_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageTable {
    pub model: ModelConfig,
    pub regime: Regime,
    pub level: f64,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<CoverageRow>,
}

impl CoverageTable {
    pub fn row(&self, p: Param, n: usize) -> Option<&CoverageRow> {
        self.rows.iter().find(|r| r.param == p && r.n == n)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record([
            "param",
            "n",
            "count",
            "covered",
            "coverage",
            "se",
            "mean_width",
            "ad_statistic",
            "ad_p_value",
        ])?;
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.rows {
            wr.write_record([
                r.param.to_string(),
                r.n.to_string(),
                r.count.to_string(),
                r.covered.to_string(),
                r.coverage.to_string(),
                r.se.to_string(),
                r.mean_width.to_string(),
                opt(r.ad_statistic),
                opt(r.ad_p_value),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }
}

pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageTable> {
    let grid = run_grid(cfg)?;
    let mut rows = Vec::new();
    for p in Param::ALL {
        let i = p.idx();
        for g in &grid {
            let with_ci: Vec<(&Rep, [f64; 2])> = g
                .reps
                .iter()
                .filter_map(|r| r.ci[i].map(|c| (r, c)))
                .collect();
            let m = with_ci.len();
            if m == 0 {
                continue;
            }
            let covered = with_ci
                .iter()
                .filter(|(r, c)| c[0] <= r.truth[i] && r.truth[i] <= c[1])
                .count();
            let widths: Vec<f64> = with_ci.iter().map(|(_, c)| c[1] - c[0]).collect();
            let z: Vec<f64> = with_ci
                .iter()
                .filter_map(|(r, _)| Some((r.est[i]? - r.truth[i]) / r.sd[i]?))
                .collect();
            let ad: Option<AndersonDarling> = anderson_darling(&z).ok();
            let cov = covered as f64 / m as f64;
            rows.push(CoverageRow {
                param: p,
                n: g.n,
                count: m,
                covered,
                coverage: cov,
                se: binomial_se(cov, m),
                mean_width: crate::numeric::pairwise_sum(&widths) / m as f64,
                ad_statistic: ad.map(|a| a.statistic),
                ad_p_value: ad.map(|a| a.p_value),
            });
        }
    }
    Ok(CoverageTable {
        model: cfg.model.clone(),
        regime: regime_of(cfg),
        level: cfg.level,
        replications: cfg.replications,
        seed: cfg.seed,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasRow {
    pub n: usize,
    pub count: usize,
    pub pilot_bias: f64,
    pub pilot_se: f64,
    pub debiased_bias: f64,
    pub debiased_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasTable {
    pub model: ModelConfig,
    pub pilot_r: usize,
    pub replications: usize,
    pub seed: u64,
    pub rows: Vec<BiasRow>,
    /// `|bias(Ĥ)| < |bias(H̃)|` at the largest `n`.
    pub debiased_smaller_at_largest: bool,
}

impl BiasTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for r in &self.rows {
            wr.serialize(r)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Pilot (unclamped) versus debiased `Ĥ` at each `n`.
pub fn run_bias_comparison(cfg: &ExperimentConfig) -> Result<BiasTable> {
    let grid = run_grid(cfg)?;
    let h = cfg.model.h().value();
    let mut rows = Vec::new();
    for g in &grid {
        let pe: Vec<f64> = g.reps.iter().map(|r| r.pilot - h).collect();
        let de: Vec<f64> = g.reps.iter().filter_map(|r| r.est[0].map(|v| v - h)).collect();
        let (Some(ps), Some(ds)) = (summarize_errors(&pe), summarize_errors(&de)) else {
            continue;
        };
        rows.push(BiasRow {
            n: g.n,
            count: ps.count,
            pilot_bias: ps.bias,
            pilot_se: ps.bias_se,
            debiased_bias: ds.bias,
            debiased_se: ds.bias_se,
        });
    }
    let last = rows
        .last()
        .ok_or_else(|| Error::Experiment("no grid point produced estimates".into()))?;
    let smaller = last.debiased_bias.abs() < last.pilot_bias.abs();
    Ok(BiasTable {
        model: cfg.model.clone(),
        pilot_r: cfg.estimate_options().pilot_r,
        replications: cfg.replications,
        seed: cfg.seed,
        debiased_smaller_at_largest: smaller,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlExperiment {
    pub r0: f64,
    pub r0_bisected: bool,
    pub scan: KlScanResult,
    pub control: Option<KlScanResult>,
    /// Last over first KL of the control scan.
    pub control_growth: Option<f64>,
}

impl KlExperiment {
    pub fn passes(&self) -> bool {
        self.scan.all_ok() && self.control_growth.is_none_or(|g| g >= 10.0)
    }
}

pub fn run_kl(cfg: &ExperimentConfig) -> Result<KlExperiment> {
    cfg.validate()?;
    let ModelConfig::Parametric { theta } = &cfg.model else {
        return Err(Error::Invalid("kl needs a parametric model".into()));
    };
    let (r0, bisected) = match cfg.kl.r0 {
        Some(r) => (r, false),
        None => (max_r0(theta, &cfg.n_grid, cfg.kl.r0_max, cfg.kl.tol)?, true),
    };
    let scan = kl_scan(theta, &cfg.n_grid, r0)?;
    let control = cfg
        .kl
        .control_r0
        .map(|c| kl_scan_kind(theta, &cfg.n_grid, c, ScanKind::ConstantH))
        .transpose()?;
    let control_growth = control.as_ref().map(|c| {
        let first = c.kl[0];
        let last = c.kl[c.kl.len() - 1];
        last / first
    });
    Ok(KlExperiment {
        r0,
        r0_bisected: bisected,
        scan,
        control,
        control_growth,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "lowercase")]
pub enum ExperimentOutput {
    Rates(RateTable),
    Coverage(CoverageTable),
    Bias(BiasTable),
    Kl(KlExperiment),
}

impl ExperimentOutput {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        match self {
            Self::Rates(t) => t.write_csv(w),
            Self::Coverage(t) => t.write_csv(w),
            Self::Bias(t) => t.write_csv(w),
            Self::Kl(k) => k.scan.write_csv(w),
        }
    }

    /// Whether the experiment's own check holds (bias and KL only).
    pub fn passes(&self) -> bool {
        match self {
            Self::Bias(t) => t.debiased_smaller_at_largest,
            Self::Kl(k) => k.passes(),
            _ => true,
        }
    }

    /// Writes the CSV table to `path` and the JSON summary next to it.
    /// Returns the two paths.
    pub fn save(&self, path: &Path) -> Result<(PathBuf, PathBuf)> {
        let csv_path = if path.extension().is_some_and(|e| e == "json") {
            path.with_extension("csv")
        } else {
            path.to_path_buf()
        };
        let json_path = csv_path.with_extension("json");
        let mut f = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
        self.write_csv(&mut f)?;
        f.flush()?;
        std::fs::write(&json_path, self.to_json()?)?;
        Ok((csv_path, json_path))
    }
}

/// Runs the configured experiment and saves it when an output is set.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let out = match cfg.experiment {
        ExperimentKind::Rates => ExperimentOutput::Rates(run_rates(cfg)?),
        ExperimentKind::Coverage => ExperimentOutput::Coverage(run_coverage(cfg)?),
        ExperimentKind::Bias => ExperimentOutput::Bias(run_bias_comparison(cfg)?),
        ExperimentKind::Kl => ExperimentOutput::Kl(run_kl(cfg)?),
    };
    if let Some(p) = &cfg.output {
        out.save(p)?;
    }
    Ok(out)
}
