//! Double-exponential quadrature and the kernel integrals it checks.
//!
//! The integrands handed to [`tanh_sinh`] receive the distances to both
//! endpoints computed without cancellation, which keeps algebraic endpoint
//! singularities such as `s^{H−½}` accurate down to the last node.

use std::f64::consts::FRAC_PI_2;

use super::{k_h_raw, Hurst};
use crate::error::{Error, Result};

const T_MAX: f64 = 6.5;
const MAX_LEVEL: u32 = 12;
const MIN_LEVEL: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl Quadrature {
    fn scale(self, c: f64) -> Self {
        Self {
            value: self.value * c,
            error: self.error * c.abs(),
            evaluations: self.evaluations,
        }
    }

    fn plus(self, other: Self) -> Self {
        Self {
            value: self.value + other.value,
            error: self.error + other.error,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

struct Ladder {
    sum: f64,
    abs_sum: f64,
    evaluations: usize,
}

fn refine<N>(node: N, tol: f64) -> Result<Quadrature>
where
    N: Fn(f64) -> Option<(f64, f64)>,
{
    let mut acc = Ladder {
        sum: 0.0,
        abs_sum: 0.0,
        evaluations: 0,
    };
    let visit = |t: f64, acc: &mut Ladder| {
        if let Some((w, fx)) = node(t) {
            acc.sum += w * fx;
            acc.abs_sum += (w * fx).abs();
            acc.evaluations += 1;
        }
    };
    let kmax = T_MAX as i64;
    for k in -kmax..=kmax {
        visit(k as f64, &mut acc);
    }
    let mut h = 1.0;
    let mut prev = acc.sum * h;
    let mut err = f64::INFINITY;
    for level in 1..=MAX_LEVEL {
        h *= 0.5;
        let steps = (T_MAX / h) as i64;
        let mut k = -steps + if steps % 2 == 0 { 1 } else { 0 };
        while k <= steps {
            visit(k as f64 * h, &mut acc);
            k += 2;
        }
        let cur = acc.sum * h;
        if !cur.is_finite() {
            return Err(Error::Quadrature {
                achieved: f64::INFINITY,
                requested: tol,
            });
        }
        err = (cur - prev).abs();
        prev = cur;
        let scale = (acc.abs_sum * h).max(f64::MIN_POSITIVE);
        if level >= MIN_LEVEL && err <= tol * cur.abs().max(1e-3 * scale) {
            return Ok(Quadrature {
                value: cur,
                error: err,
                evaluations: acc.evaluations,
            });
        }
    }
    let scale = (acc.abs_sum * h).max(f64::MIN_POSITIVE);
    Err(Error::Quadrature {
        achieved: err / prev.abs().max(1e-3 * scale),
        requested: tol,
    })
}

/// `∫_a^b f`; `f` receives `(x, x − a, b − x)`.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> Result<Quadrature>
where
    F: Fn(f64, f64, f64) -> f64,
{
    let len = b - a;
    refine(
        |t| {
            let u = FRAC_PI_2 * t.sinh();
            let em = (-2.0 * u.abs()).exp();
            let near = len * em / (1.0 + em);
            if near <= 0.0 {
                return None;
            }
            let w = 0.5 * len * FRAC_PI_2 * t.cosh() * 4.0 * em / ((1.0 + em) * (1.0 + em));
            if w == 0.0 {
                return None;
            }
            let far = len - near;
            let fx = if t < 0.0 {
                f(a + near, near, far)
            } else {
                f(b - near, far, near)
            };
            Some((w, fx))
        },
        tol,
    )
}

/// `∫_a^∞ f`; `f` receives `(x, x − a)`. Suited to algebraic decay.
pub fn exp_sinh<F>(f: F, a: f64, tol: f64) -> Result<Quadrature>
where
    F: Fn(f64, f64) -> f64,
{
    refine(
        |t| {
            let e = (FRAC_PI_2 * t.sinh()).exp();
            if e == 0.0 || !e.is_finite() {
                return None;
            }
            let w = FRAC_PI_2 * t.cosh() * e;
            let x = a + e;
            if !w.is_finite() || !x.is_finite() {
                return None;
            }
            let fx = f(x, e);
            if fx == 0.0 {
                return Some((0.0, 0.0));
            }
            Some((w, fx))
        },
        tol,
    )
}

/// `(lo+1)^p − lo^p` for `lo ≥ 0`, stable for large `lo`.
fn step_diff(p: f64, lo: f64) -> f64 {
    if lo >= 1.0 {
        let x = lo + 1.0;
        -x.powf(p) * (p * (-1.0 / x).ln_1p()).exp_m1()
    } else {
        (lo + 1.0).powf(p) - lo.powf(p)
    }
}

const KERNEL_TOL: f64 = 1e-12;

/// The integral form of `K_H`: `sqrt(1/(2H) + ∫_1^∞ (r^{H−½} − (r−1)^{H−½})² dr)`.
pub fn k_h_integral(h: Hurst) -> Result<Quadrature> {
    let p = h.value() - 0.5;
    let near = tanh_sinh(|_, d, _| step_diff(p, d).powi(2), 1.0, 2.0, KERNEL_TOL)?;
    let far = exp_sinh(|x, _| step_diff(p, x - 1.0).powi(2), 2.0, KERNEL_TOL)?;
    let total = near.plus(far);
    let sq = 1.0 / (2.0 * h.value()) + total.value;
    let root = sq.sqrt();
    Ok(Quadrature {
        value: root,
        error: total.error / (2.0 * root),
        evaluations: total.evaluations,
    })
}

/// `∫ Δ_k g(t) Δ_l g(t) dt` over the real line for `k ≠ l` (unit step),
/// and `∫_0^∞ Δ_k g(t)² dt` for `k = l`, with `g(t) = K_H⁻¹ t^{H−½}_+` and
/// `Δ_k g(t) = g(k−t) − g(k−1−t)`.
pub fn g_increment_inner(h: Hurst, k: usize, l: usize) -> Result<Quadrature> {
    if k == 0 || l == 0 {
        return Err(Error::Invalid("increment indices start at 1".into()));
    }
    if k == l {
        return g_truncated_square(h, k);
    }
    let m = k.abs_diff(l) as f64;
    let p = h.value() - 0.5;
    let kinv2 = k_h_raw(h.value()).powi(-2);
    // t ∈ [k−1, k]: only the earlier increment's kernel is singular.
    let cell = tanh_sinh(
        |_, s, _| s.powf(p) * step_diff(p, m - 1.0 + s),
        0.0,
        1.0,
        KERNEL_TOL,
    )?;
    let body = |s: f64| step_diff(p, s) * step_diff(p, s + m);
    let near = tanh_sinh(|_, s, _| body(s), 0.0, 1.0, KERNEL_TOL)?;
    let far = exp_sinh(|x, _| body(x), 1.0, KERNEL_TOL)?;
    Ok(cell.plus(near).plus(far).scale(kinv2))
}

/// `∫_0^∞ Δ_k g(t)² dt`.
pub fn g_truncated_square(h: Hurst, k: usize) -> Result<Quadrature> {
    if k == 0 {
        return Err(Error::Invalid("increment indices start at 1".into()));
    }
    let p = h.value() - 0.5;
    let kinv2 = k_h_raw(h.value()).powi(-2);
    let mut total = tanh_sinh(|_, s, _| s.powf(2.0 * p), 0.0, 1.0, KERNEL_TOL)?;
    let upper = (k - 1) as f64;
    if upper > 0.0 {
        let first = upper.min(1.0);
        total = total.plus(tanh_sinh(
            |_, s, _| step_diff(p, s).powi(2),
            0.0,
            first,
            KERNEL_TOL,
        )?);
        if upper > 1.0 {
            total = total.plus(tanh_sinh(
                |x, _, _| step_diff(p, x).powi(2),
                1.0,
                upper,
                KERNEL_TOL,
            )?);
        }
    }
    Ok(total.scale(kinv2))
}

/// `∫_0^1 Δ_{r+1} g(s) ds` (unit step).
pub fn g_first_cell(h: Hurst, r: usize) -> Result<Quadrature> {
    let p = h.value() - 0.5;
    let kinv = 1.0 / k_h_raw(h.value());
    let q = if r == 0 {
        tanh_sinh(|_, _, d| d.powf(p), 0.0, 1.0, KERNEL_TOL)?
    } else {
        let base = (r - 1) as f64;
        tanh_sinh(|_, _, d| step_diff(p, base + d), 0.0, 1.0, KERNEL_TOL)?
    };
    Ok(q.scale(kinv))
}
