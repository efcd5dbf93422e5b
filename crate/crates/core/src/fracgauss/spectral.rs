use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use super::quad::{tanh_sinh, Quadrature};
use super::Hurst;
use crate::error::{Error, Result};

pub const SPECTRAL_TERMS_DEFAULT: usize = 1_000;

/// Spectral density of unit fGn,
/// `f_H(λ) = Γ(2H+1) sin(πH)/π · (1−cos λ) Σ_k |λ + 2kπ|^{−2H−1}`,
/// normalised so that `∫_{−π}^{π} f_H(λ) e^{−iλr} dλ = Γ^H_r`.
///
/// The series is summed for `|k| ≤ k_terms` and the remainder is replaced by
/// its midpoint integral, which leaves an error of order `k_terms^{−2H−2}`.
/// At `λ = 0` the density is 0 for `H < ½`, `1/(2π)` at `H = ½` and
/// `+∞` (a pole) for `H > ½`.
pub fn spectral_density(h: Hurst, lambda: f64, k_terms: usize) -> Result<f64> {
    if !(-PI..=PI).contains(&lambda) {
        return Err(Error::Domain {
            name: "lambda",
            value: lambda,
            domain: "[-pi, pi]",
        });
    }
    let hv = h.value();
    let c = gamma(2.0 * hv + 1.0) * (PI * hv).sin() / PI;
    let lam = lambda.abs();
    if lam == 0.0 {
        return Ok(match hv.partial_cmp(&0.5) {
            Some(std::cmp::Ordering::Less) => 0.0,
            Some(std::cmp::Ordering::Equal) => 1.0 / (2.0 * PI),
            _ => f64::INFINITY,
        });
    }
    let q = 2.0 * hv + 1.0;
    let one_minus_cos = 2.0 * (0.5 * lam).sin().powi(2);
    // central term written as sinc² · λ^{1−2H} / 2 so tiny λ stays finite
    let half = 0.5 * lam;
    let sinc = half.sin() / half;
    let central = 0.5 * sinc * sinc * lam.powf(2.0 - q);
    let mut s = 0.0;
    for k in (1..=k_terms).rev() {
        let two_k_pi = 2.0 * PI * k as f64;
        s += (two_k_pi + lam).powf(-q) + (two_k_pi - lam).powf(-q);
    }
    let edge = 2.0 * PI * (k_terms as f64 + 0.5);
    let tail = ((edge + lam).powf(1.0 - q) + (edge - lam).powf(1.0 - q)) / (2.0 * PI * (q - 1.0));
    Ok(c * (central + one_minus_cos * (s + tail)))
}

/// `∫_{−π}^{π} f_H(λ) cos(λr) dλ` by quadrature; test support for the
/// Toeplitz identity `Σ_n(H) = T_n(f_H)`.
pub fn spectral_autocov(h: Hurst, r: usize, k_terms: usize, tol: f64) -> Result<Quadrature> {
    let pieces = (r / 2).max(1);
    let width = PI / pieces as f64;
    let mut value = 0.0;
    let mut error = 0.0;
    let mut evaluations = 0;
    for j in 0..pieces {
        let a = j as f64 * width;
        let b = if j + 1 == pieces { PI } else { a + width };
        let q = tanh_sinh(
            |x, da, _| {
                let lam = if j == 0 { da } else { x };
                spectral_density(h, lam.min(PI), k_terms).unwrap_or(0.0) * (lam * r as f64).cos()
            },
            a,
            b,
            tol,
        )?;
        value += q.value;
        error += q.error;
        evaluations += q.evaluations;
    }
    Ok(Quadrature {
        value: 2.0 * value,
        error: 2.0 * error,
        evaluations,
    })
}
