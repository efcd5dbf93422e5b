//! Gaussian KL divergences between the increment laws at `θ₀` and at the
//! local alternatives `θ_n` used for minimax lower bounds.

use std::fmt;
use std::io::Write;
use std::path::Path;

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fracgauss::{b_h, cholesky_lower, mixed_cov, Hurst, ModelTheta};

/// KL budget for each alternative.
pub const KL_BOUND: f64 = 1.0 / 9.0;

/// Largest `n` accepted by the dense scan.
pub const KL_MAX_N: usize = 1 << 11;

/// `KL(N(0,Σ₁) ‖ N(0,Σ₀)) = ½{tr(Σ₀⁻¹Σ₁) − n + log det Σ₀ − log det Σ₁}`,
/// with `tr(Σ₀⁻¹Σ₁) = ‖L₀⁻¹L₁‖²_F`.
pub fn kl_gaussian(sigma1: &Mat<f64>, sigma0: &Mat<f64>) -> Result<f64> {
    let n = sigma0.nrows();
    if sigma0.ncols() != n || sigma1.nrows() != n || sigma1.ncols() != n {
        return Err(Error::Invalid(format!(
            "shape mismatch: {}x{} vs {}x{}",
            sigma1.nrows(),
            sigma1.ncols(),
            sigma0.nrows(),
            sigma0.ncols()
        )));
    }
    let l0 = cholesky_lower(sigma0)?;
    let l1 = cholesky_lower(sigma1)?;
    let mut m = l1.clone();
    l0.solve_lower_triangular_in_place(&mut m);
    let trace = m.squared_norm_l2();
    let log_ratio: f64 = (0..n).map(|i| (l0[(i, i)] / l1[(i, i)]).ln()).sum();
    Ok(0.5 * (trace - n as f64 + 2.0 * log_ratio))
}

/// The four intervals of `H` with their own perturbation rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateColumn {
    /// `(0, ¼]`
    BelowQuarter,
    /// `(¼, ½)`
    Rough,
    /// `(½, ¾)`
    Smooth,
    /// `[¾, 1)`
    AboveThreeQuarters,
}

impl RateColumn {
    pub fn of(h: Hurst) -> Self {
        let h = h.value();
        if h <= 0.25 {
            Self::BelowQuarter
        } else if h < 0.5 {
            Self::Rough
        } else if h < 0.75 {
            Self::Smooth
        } else {
            Self::AboveThreeQuarters
        }
    }

    /// Exponents `α_i` of `r_{i,n} = r₀ n^{α_i}`; `None` means `r_{i,n} = 0`.
    pub fn exponents(self, h: Hurst) -> [Option<f64>; 4] {
        let h = h.value();
        let hb = 0.5 * (h + 0.5);
        match self {
            Self::BelowQuarter => [Some(-0.5), None, Some(2.0 * (hb - h) - 0.5), Some(-0.5)],
            Self::Rough => [
                Some(-0.5),
                Some(0.5 - 2.0 * h),
                Some(2.0 * (hb - h) - 0.5),
                Some(-0.5),
            ],
            Self::Smooth => [
                Some(2.0 * hb - 1.5),
                Some(-0.5),
                Some(2.0 * hb - 1.5),
                Some(2.0 * h - 1.5),
            ],
            Self::AboveThreeQuarters => [Some(2.0 * hb - 1.5), Some(-0.5), Some(2.0 * hb - 1.5), None],
        }
    }
}

impl fmt::Display for RateColumn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::BelowQuarter => "(0, 1/4]",
            Self::Rough => "(1/4, 1/2)",
            Self::Smooth => "(1/2, 3/4)",
            Self::AboveThreeQuarters => "[3/4, 1)",
        })
    }
}

/// `H = ¼` and `H = ¾` borrow the neighbouring column.
pub fn on_column_boundary(h: Hurst) -> bool {
    let h = h.value();
    h == 0.25 || h == 0.75
}

/// `(r_{1,n}, …, r_{4,n})`.
pub fn perturbation_rates(h: Hurst, n: usize, r0: f64) -> [f64; 4] {
    let nf = n as f64;
    RateColumn::of(h)
        .exponents(h)
        .map(|a| a.map_or(0.0, |a| r0 * nf.powf(a)))
}

/// `θ_n` for explicit offsets `r`:
/// `(H + r₁, σ² + r₂, Λ b(H)/b(H+r₁) n^{r₁}(1+r₃), Π n^{2r₁}(1+r₄))`.
pub fn perturbed_theta_with(theta0: &ModelTheta, n: usize, r: [f64; 4]) -> Result<ModelTheta> {
    if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Invalid(format!("offsets must be finite and >= 0, got {r:?}")));
    }
    let h = theta0.h();
    let h_n = Hurst::new(h.value() + r[0])
        .map_err(|_| Error::ParameterSet(format!("H + r1 = {} leaves (0, 1)", h.value() + r[0])))?;
    let nf = n as f64;
    let lambda = theta0.lambda_cov() * b_h(h) / b_h(h_n) * nf.powf(r[0]) * (1.0 + r[2]);
    let pi = theta0.pi_total() * nf.powf(2.0 * r[0]) * (1.0 + r[3]);
    ModelTheta::new(h_n.value(), theta0.sigma_sq() + r[1], lambda, pi)
}

pub fn perturbed_theta(theta0: &ModelTheta, n: usize, r0: f64) -> Result<ModelTheta> {
    if !(r0.is_finite() && r0 >= 0.0) {
        return Err(Error::Domain {
            name: "r0",
            value: r0,
            domain: "[0, inf)",
        });
    }
    perturbed_theta_with(theta0, n, perturbation_rates(theta0.h(), n, r0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPath {
    pub theta0: ModelTheta,
    pub r0: f64,
    pub column: RateColumn,
    pub boundary: bool,
    pub exponents: [Option<f64>; 4],
    pub thetas: Vec<(usize, ModelTheta)>,
}

pub fn perturbation_path(theta0: &ModelTheta, ns: &[usize], r0: f64) -> Result<PerturbationPath> {
    let h = theta0.h();
    let column = RateColumn::of(h);
    let thetas = ns
        .iter()
        .map(|&n| Ok((n, perturbed_theta(theta0, n, r0)?)))
        .collect::<Result<_>>()?;
    Ok(PerturbationPath {
        theta0: *theta0,
        r0,
        column,
        boundary: on_column_boundary(h),
        exponents: column.exponents(h),
        thetas,
    })
}

/// `KL(Σ̃_n(θ_n) ‖ Σ̃_n(θ₀))`.
pub fn kl_theta(theta_n: &ModelTheta, theta0: &ModelTheta, n: usize) -> Result<f64> {
    kl_gaussian(&mixed_cov(theta_n, n)?, &mixed_cov(theta0, n)?)
}

/// How the offsets are generated along a scan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanKind {
    /// Rates from the perturbation table.
    Table,
    /// Same, but `r_{1,n} = r₀` for every `n`.
    ConstantH,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlScanResult {
    pub theta0: ModelTheta,
    pub r0: f64,
    pub kind: ScanKind,
    pub column: RateColumn,
    pub boundary: bool,
    pub ns: Vec<usize>,
    pub kl: Vec<f64>,
    pub bound_ok: Vec<bool>,
}

impl KlScanResult {
    pub fn all_ok(&self) -> bool {
        self.bound_ok.iter().all(|b| *b)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["n", "kl", "bound_ok"])?;
        for ((n, kl), ok) in self.ns.iter().zip(&self.kl).zip(&self.bound_ok) {
            wr.write_record([n.to_string(), kl.to_string(), ok.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Writes CSV or JSON by extension (`.json` gives JSON).
    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        if path.extension().is_some_and(|e| e == "json") {
            let mut f = f;
            f.write_all(self.to_json()?.as_bytes())?;
            f.flush()?;
            Ok(())
        } else {
            self.write_csv(f)
        }
    }
}

fn check_grid(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Invalid("empty n grid".into()));
    }
    if let Some(&n) = ns.iter().find(|&&n| n < 2 || n > KL_MAX_N) {
        return Err(Error::Invalid(format!("n = {n} outside [2, {KL_MAX_N}]")));
    }
    Ok(())
}

fn offsets(theta0: &ModelTheta, n: usize, r0: f64, kind: ScanKind) -> [f64; 4] {
    let mut r = perturbation_rates(theta0.h(), n, r0);
    if kind == ScanKind::ConstantH {
        r[0] = r0;
    }
    r
}

pub fn kl_scan_kind(theta0: &ModelTheta, ns: &[usize], r0: f64, kind: ScanKind) -> Result<KlScanResult> {
    check_grid(ns)?;
    if !(r0.is_finite() && r0 >= 0.0) {
        return Err(Error::Domain {
            name: "r0",
            value: r0,
            domain: "[0, inf)",
        });
    }
    let kl = ns
        .par_iter()
        .map(|&n| {
            let tn = perturbed_theta_with(theta0, n, offsets(theta0, n, r0, kind))?;
            kl_theta(&tn, theta0, n)
        })
        .collect::<Result<Vec<f64>>>()?;
    let h = theta0.h();
    Ok(KlScanResult {
        theta0: *theta0,
        r0,
        kind,
        column: RateColumn::of(h),
        boundary: on_column_boundary(h),
        ns: ns.to_vec(),
        bound_ok: kl.iter().map(|k| *k <= KL_BOUND).collect(),
        kl,
    })
}

pub fn kl_scan(theta0: &ModelTheta, ns: &[usize], r0: f64) -> Result<KlScanResult> {
    kl_scan_kind(theta0, ns, r0, ScanKind::Table)
}

/// Largest `r₀ ∈ [0, r0_max]` (to `tol`) keeping every KL on the grid at most
/// [`KL_BOUND`]. An `r₀` that pushes some `θ_n` out of the parameter set
/// counts as a violation.
pub fn max_r0(theta0: &ModelTheta, ns: &[usize], r0_max: f64, tol: f64) -> Result<f64> {
    check_grid(ns)?;
    if !(r0_max > 0.0 && tol > 0.0) {
        return Err(Error::Invalid("need r0_max > 0 and tol > 0".into()));
    }
    let ok = |r0: f64| -> Result<bool> {
        match kl_scan(theta0, ns, r0) {
            Ok(s) => Ok(s.all_ok()),
            Err(Error::ParameterSet(_)) | Err(Error::NotPositiveDefinite { .. }) => Ok(false),
            Err(e) => Err(e),
        }
    };
    if ok(r0_max)? {
        return Ok(r0_max);
    }
    let (mut lo, mut hi) = (0.0, r0_max);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}
