use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope; `NaN` with two points.
    pub slope_se: f64,
}

/// Least-squares line through `(x, y)`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(Error::Invalid(format!(
            "need at least two paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::Invalid("abscissae are all equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| (b - intercept - slope * a).powi(2))
            .sum();
        (rss / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_se,
    })
}

/// Mean, population standard deviation and root mean square of `xs − truth`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub count: usize,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    /// Standard error of the bias, `sd/√(count−1)`.
    pub bias_se: f64,
}

pub fn summarize_errors(errors: &[f64]) -> Option<ErrorSummary> {
    let m = errors.len();
    if m == 0 {
        return None;
    }
    let mf = m as f64;
    let bias = pairwise_sum(errors) / mf;
    let centred: Vec<f64> = errors.iter().map(|e| (e - bias).powi(2)).collect();
    let var = pairwise_sum(&centred) / mf;
    let sd = var.sqrt();
    let rmse = (bias * bias + var).sqrt();
    let bias_se = if m > 1 { sd / (mf - 1.0).sqrt() } else { f64::NAN };
    Some(ErrorSummary {
        count: m,
        bias,
        sd,
        rmse,
        bias_se,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AndersonDarling {
    /// `A²` with the small-sample factor `1 + 0.75/n + 2.25/n²`.
    pub statistic: f64,
    pub p_value: f64,
}

/// Normality test with mean and variance estimated from the sample.
pub fn anderson_darling(xs: &[f64]) -> Result<AndersonDarling> {
    let n = xs.len();
    if n < 8 {
        return Err(Error::Invalid(format!("Anderson-Darling needs at least 8 points, got {n}")));
    }
    let nf = n as f64;
    let mean = pairwise_sum(xs) / nf;
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let sd = (pairwise_sum(&dev) / (nf - 1.0)).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Invalid("sample has zero spread".into()));
    }
    let norm = Normal::new(0.0, 1.0).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut z: Vec<f64> = xs.iter().map(|x| (x - mean) / sd).collect();
    z.sort_by(f64::total_cmp);
    let mut s = 0.0;
    for i in 0..n {
        let lo = norm.cdf(z[i]).clamp(1e-300, 1.0);
        let hi = norm.sf(z[n - 1 - i]).clamp(1e-300, 1.0);
        s += (2 * i + 1) as f64 * (lo.ln() + hi.ln());
    }
    let a2 = -nf - s / nf;
    let a = a2 * (1.0 + 0.75 / nf + 2.25 / (nf * nf));
    let p = if a >= 0.6 {
        (1.2937 - 5.709 * a + 0.0186 * a * a).exp()
    } else if a >= 0.34 {
        (0.9177 - 4.279 * a - 1.38 * a * a).exp()
    } else if a >= 0.2 {
        1.0 - (-8.318 + 42.796 * a - 59.938 * a * a).exp()
    } else {
        1.0 - (-13.436 + 101.14 * a - 223.73 * a * a).exp()
    };
    Ok(AndersonDarling {
        statistic: a,
        p_value: p.clamp(0.0, 1.0),
    })
}

/// `sqrt(p(1−p)/m)`.
pub fn binomial_se(p: f64, m: usize) -> f64 {
    if m == 0 {
        f64::NAN
    } else {
        (p * (1.0 - p) / m as f64).sqrt()
    }
}
