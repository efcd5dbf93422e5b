use mixfrac::fracgauss::{b_h, g_truncated_square, mixed_autocov, mixed_cov};
use mixfrac::simulate::*;
use mixfrac::{Hurst, ModelTheta};
use statrs::function::gamma::gamma;

fn theta(h: f64, s2: f64, l: f64, p: f64) -> ModelTheta {
    ModelTheta::new(h, s2, l, p).unwrap()
}

/// Sample second moments `E[X_i X_j]` and their standard errors.
struct Moments {
    mean: Vec<Vec<f64>>,
    se: Vec<Vec<f64>>,
}

fn moments<F: FnMut(u64) -> Vec<f64>>(n: usize, paths: u64, mut draw: F) -> Moments {
    let mut s1 = vec![vec![0.0; n]; n];
    let mut s2 = vec![vec![0.0; n]; n];
    for p in 0..paths {
        let x = draw(p);
        for i in 0..n {
            for j in i..n {
                let v = x[i] * x[j];
                s1[i][j] += v;
                s2[i][j] += v * v;
            }
        }
    }
    let m = paths as f64;
    let mut mean = vec![vec![0.0; n]; n];
    let mut se = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mu = s1[i][j] / m;
            let var = (s2[i][j] / m - mu * mu).max(0.0) * m / (m - 1.0);
            mean[i][j] = mu;
            mean[j][i] = mu;
            se[i][j] = (var / m).sqrt();
            se[j][i] = se[i][j];
        }
    }
    Moments { mean, se }
}

/// With ~2000 correlated entries a handful of 4-SE excursions is expected
/// even for an exact sampler: allow at most two, none beyond 5 SE, and a
/// mean squared z-score near one.
fn assert_z_scores(label: &str, z: &[f64]) {
    let worst = z.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let over = z.iter().filter(|v| v.abs() > 4.0).count();
    let msq = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
    assert!(over <= 2 && worst < 5.0, "{label}: {over} entries beyond 4 SE, worst {worst}");
    assert!((msq - 1.0).abs() < 0.35, "{label}: mean squared z {msq}");
}

fn check_against_cov(th: ModelTheta, method: SampleMethod) {
    let n = 64;
    let sampler = MfbmSampler::new(th, n, 1.0 / n as f64, method).unwrap();
    let mom = moments(n, 10_000, |p| sampler.sample(11, p).increments);
    let cov = mixed_cov(&th, n).unwrap();
    let mut z = Vec::new();
    for i in 0..n {
        for j in i..n {
            z.push((mom.mean[i][j] - cov[(i, j)]) / mom.se[i][j]);
        }
    }
    assert_z_scores(&format!("{method} {th}"), &z);
}

#[test]
fn mfbm_covariance_matches_model_circulant() {
    check_against_cov(theta(0.3, 1.0, 0.5, 1.0), SampleMethod::Circulant);
    check_against_cov(theta(0.7, 1.0, 0.4, 1.0), SampleMethod::Circulant);
}

#[test]
fn mfbm_covariance_matches_model_cholesky() {
    check_against_cov(theta(0.3, 1.0, 0.5, 1.0), SampleMethod::Cholesky);
}

#[test]
fn brownian_only_gives_iid_normals() {
    let th = ModelTheta::boundary(0.3, 2.0, 0.0, 0.0).unwrap();
    let delta = 0.01;
    let s = sample_mfbm(th, 20_000, delta, 3, SampleMethod::Circulant).unwrap();
    let x = &s.increments;
    let n = x.len() as f64;
    let var = x.iter().map(|v| v * v).sum::<f64>() / n;
    let lag1 = x.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1.0);
    let sd = 2.0 * delta;
    assert!((var - sd).abs() < 4.0 * sd * (2.0 / n).sqrt());
    assert!(lag1.abs() < 4.0 * sd / n.sqrt());
}

#[test]
fn increment_variance_examples() {
    let bm = ModelTheta::boundary(0.3, 1.5, 0.0, 0.0).unwrap();
    assert!((increment_variance(&bm, 0.2).unwrap() - 0.3).abs() < 1e-15);

    let th = theta(0.3, 1.0, 0.5, 1.0);
    let h = 0.25f64;
    // b(0.3) = 2 / Γ(1.8)
    let want = h + h.powf(0.6) + 0.5 * 2.0 / gamma(1.8) * h.powf(0.8);
    assert!((increment_variance(&th, h).unwrap() - want).abs() < 1e-14);

    let m = mixed_cov(&th, 4).unwrap();
    assert!((m[(2, 2)] - increment_variance(&th, 0.25).unwrap()).abs() < 1e-15);
    assert!(increment_variance(&th, 0.0).is_err());
}

#[test]
fn three_process_middle_coefficient() {
    let (h, sigma, rho, rho_p) = (0.7, 1.3, 0.6, 0.2);
    let th = ModelTheta::from_factors(h, sigma, rho, rho_p).unwrap();
    let delta = 0.01f64;
    // λ·ρ_total·σ is the covolatility; the middle component variance is
    // 2λρσΔ^{2H̄}/Γ(H+3/2)
    let middle = increment_variance(&th, delta).unwrap()
        - sigma * sigma * delta
        - (rho * rho + rho_p * rho_p) * delta.powf(2.0 * h);
    let want = 2.0 * rho * sigma * delta.powf(2.0 * (0.5 * (h + 0.5))) / gamma(h + 1.5);
    assert!((middle - want).abs() < 1e-14, "{middle} vs {want}");
}

#[test]
fn three_process_with_zero_lambda() {
    let th = theta(0.3, 1.0, 0.0, 0.8);
    let n = 32;
    let sampler = ThreeProcessSampler::new(th, n, 1.0 / n as f64).unwrap();
    let mom = moments(n, 8_000, |p| sampler.sample(5, p).increments);
    let row = mixed_autocov(&th, 1.0 / n as f64, n);
    let mut z = Vec::new();
    for i in 0..n {
        for j in i..n {
            z.push((mom.mean[i][j] - row[i.abs_diff(j)]) / mom.se[i][j]);
        }
    }
    assert_z_scores("lambda = 0", &z);
}

#[test]
fn three_process_rejects_negative_lambda() {
    let th = theta(0.3, 1.0, -0.2, 1.0);
    assert!(sample_three_process(th, 16, 0.1, 1).is_err());
    assert!(sample_mfbm(th, 16, 0.1, 1, SampleMethod::Circulant).is_ok());
}

#[test]
fn three_process_matches_mfbm_covariance() {
    let th = theta(0.8, 1.0, 0.4, 1.0);
    let n = 64;
    let delta = 1.0 / n as f64;
    let a = MfbmSampler::new(th, n, delta, SampleMethod::Circulant).unwrap();
    let b = ThreeProcessSampler::new(th, n, delta).unwrap();
    let ma = moments(n, 10_000, |p| a.sample(21, p).increments);
    let mb = moments(n, 10_000, |p| b.sample(22, p).increments);
    let mut z = Vec::new();
    for i in 0..n {
        for j in i..n {
            let se = ma.se[i][j].hypot(mb.se[i][j]);
            z.push((ma.mean[i][j] - mb.mean[i][j]) / se);
        }
    }
    assert_z_scores("three-process vs mfbm", &z);
}

#[test]
fn sampling_is_reproducible() {
    let th = theta(0.3, 1.0, 0.5, 1.0);
    for method in [SampleMethod::Circulant, SampleMethod::Cholesky] {
        let a = sample_mfbm(th, 256, 0.01, 99, method).unwrap();
        let b = sample_mfbm(th, 256, 0.01, 99, method).unwrap();
        assert_eq!(a, b);
        let c = sample_mfbm(th, 256, 0.01, 100, method).unwrap();
        assert_ne!(a.increments, c.increments);
    }
    let s = MfbmSampler::new(th, 128, 0.01, SampleMethod::Circulant).unwrap();
    assert_ne!(s.sample(1, 0).increments, s.sample(1, 1).increments);
    assert_eq!(s.sample(1, 7), s.sample(1, 7));

    let spec = StochVolSpec::constant(Hurst::new(0.3).unwrap(), 1.0, 0.5, 0.5);
    let a = sample_mixed_sm(&spec, 128, 0.01, 4).unwrap();
    let b = sample_mixed_sm(&spec, 128, 0.01, 4).unwrap();
    assert_eq!(a, b);
}

#[test]
fn autocovariance_is_shift_invariant() {
    let th = theta(0.3, 1.0, 0.5, 1.0);
    let n = 2048;
    let half = n / 2;
    let s = MfbmSampler::new(th, n, 1.0 / n as f64, SampleMethod::Circulant).unwrap();
    let paths = 200;
    for lag in 0..4 {
        let mut diffs = Vec::with_capacity(paths);
        for p in 0..paths as u64 {
            let x = s.sample(8, p).increments;
            let ac = |lo: usize| {
                (lo..lo + half - lag).map(|i| x[i] * x[i + lag]).sum::<f64>() / (half - lag) as f64
            };
            diffs.push(ac(0) - ac(half));
        }
        let m = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / m;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0);
        assert!(mean.abs() < 4.0 * (var / m).sqrt(), "lag {lag}");
    }
}

#[test]
fn covariance_row_scales_by_component() {
    let th = theta(0.3, 1.0, 0.5, 1.0);
    let h = th.h().value();
    let hb = th.h().bar().value();
    let delta = 0.01;
    let only_bm = ModelTheta::boundary(0.3, 1.0, 0.0, 0.0).unwrap();
    let only_pi = ModelTheta::boundary(0.3, 0.0, 0.0, 1.0).unwrap();
    let row = |t: &ModelTheta, d: f64| mixed_autocov(t, d, 8);
    let lam = |d: f64| -> Vec<f64> {
        let f = row(&th, d);
        let a = row(&only_bm, d);
        let b = row(&only_pi, d);
        (0..8).map(|k| f[k] - a[k] - b[k]).collect()
    };
    let full2 = row(&th, 2.0 * delta);
    let (bm1, pi1, la1) = (row(&only_bm, delta), row(&only_pi, delta), lam(delta));
    for k in 0..8 {
        let want = 2.0 * bm1[k] + 2f64.powf(2.0 * h) * pi1[k] + 2f64.powf(2.0 * hb) * la1[k];
        assert!((full2[k] - want).abs() < 1e-14, "k={k}");
    }
    assert!((la1[0] - 0.5 * b_h(th.h()) * delta.powf(2.0 * hb)).abs() < 1e-15);
}

#[test]
fn cholesky_size_limit_and_method_parsing() {
    let th = theta(0.3, 1.0, 0.5, 1.0);
    assert!(MfbmSampler::new(th, CHOLESKY_MAX_N + 1, 0.001, SampleMethod::Cholesky).is_err());
    assert_eq!("Circulant".parse::<SampleMethod>().unwrap(), SampleMethod::Circulant);
    assert!("fft".parse::<SampleMethod>().is_err());
    assert!(sample_mfbm(th, 1, 0.1, 0, SampleMethod::Circulant).is_err());
    assert!(sample_mfbm(th, 8, -0.1, 0, SampleMethod::Circulant).is_err());
}

#[test]
fn series_invariants() {
    let th = theta(0.7, 1.0, 0.4, 1.0);
    let s = sample_mfbm(th, 1000, 0.003, 1, SampleMethod::Circulant).unwrap();
    assert_eq!(s.len(), 1000);
    assert!((s.t_end - 3.0).abs() < 1e-12);
    assert_eq!(s.theta(), Some(&th));
    assert!(IncrementSeries::new(vec![1.0], 0.1, SeriesMeta::observed()).is_err());
    assert!(IncrementSeries::new(vec![1.0, f64::NAN], 0.1, SeriesMeta::observed()).is_err());
}

#[test]
fn stochvol_pure_drift_is_deterministic() {
    let spec = StochVolSpec {
        drift: ProcessSpec::constant(1.0),
        ..StochVolSpec::constant(Hurst::new(0.3).unwrap(), 0.0, 0.0, 0.0)
    };
    let delta = 1.0 / 256.0;
    let s = sample_mixed_sm(&spec, 256, delta, 1).unwrap();
    for x in &s.increments {
        assert!((x - delta).abs() < 1e-15);
    }
}

#[test]
fn stochvol_ito_case_realised_variance() {
    let spec = StochVolSpec {
        sigma_proc: ProcessSpec::Ou {
            x0: 1.0,
            mean: 1.0,
            kappa: 2.0,
            vol: 0.5,
            driver: Driver::Own,
        },
        ..StochVolSpec::constant(Hurst::new(0.3).unwrap(), 0.0, 0.0, 0.0)
    };
    let n = 8192;
    for seed in 0..5 {
        let s = sample_mixed_sm(&spec, n, 1.0 / n as f64, seed).unwrap();
        let truth = s.meta.truth.unwrap();
        let rv: f64 = s.increments.iter().map(|x| x * x).sum();
        let se = (2.0 * truth.sigma_quarticity / n as f64).sqrt();
        assert!((rv - truth.c).abs() < 4.0 * se, "seed {seed}: {rv} vs {}", truth.c);
    }
}

#[test]
fn stochvol_scheme_converges_in_oversampling() {
    for h in [0.1, 0.3, 0.7, 0.9] {
        let hh = Hurst::new(h).unwrap();
        for k in [2, 5, 50] {
            let exact = g_truncated_square(hh, k).unwrap().value;
            let errs: Vec<f64> = [1, 4, 16]
                .iter()
                .map(|&m| (hybrid_increment_variance(hh, m, k).unwrap() - exact).abs())
                .collect();
            assert!(errs[0] > errs[1] && errs[1] > errs[2], "H={h} k={k}: {errs:?}");
            assert!(errs[2] < 2e-4, "H={h} k={k}: {errs:?}");
        }
    }
}

#[test]
fn stochvol_constant_coefficients_match_scheme_variance() {
    let hh = Hurst::new(0.3).unwrap();
    let spec = StochVolSpec {
        oversample: 4,
        ..StochVolSpec::constant(hh, 0.0, 0.8, 0.6)
    };
    let n = 16;
    let paths = 20_000u64;
    let k = 10;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for p in 0..paths {
        let s = sample_mixed_sm_stream(&spec, n, 1.0, 17, p).unwrap();
        let v = s.increments[k - 1].powi(2);
        s1 += v;
        s2 += v * v;
    }
    let m = paths as f64;
    let mean = s1 / m;
    let se = ((s2 / m - mean * mean) / m).sqrt();
    let want = hybrid_increment_variance(hh, 4, k).unwrap();
    assert!((mean - want).abs() < 4.0 * se, "{mean} vs {want} (se {se})");
}

#[test]
fn csv_round_trip_is_exact() {
    let th = theta(0.3, 1.0, 0.5, 1.0);
    let s = sample_mfbm(th, 300, 1.0 / 300.0, 42, SampleMethod::Circulant).unwrap();
    let mut buf = Vec::new();
    write_csv(&s, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("# delta="));
    let back = read_csv(buf.as_slice(), None).unwrap();
    assert_eq!(s, back);
}

#[test]
fn binary_round_trip_is_exact() {
    let spec = StochVolSpec::constant(Hurst::new(0.7).unwrap(), 1.0, 0.3, 0.1);
    let s = sample_mixed_sm(&spec, 200, 0.005, 9).unwrap();
    let mut buf = Vec::new();
    write_binary(&s, &mut buf).unwrap();
    assert_eq!(&buf[..4], MAGIC);
    let back = read_binary(buf.as_slice()).unwrap();
    assert_eq!(s, back);
    buf[0] = b'X';
    assert!(read_binary(buf.as_slice()).is_err());
}

#[test]
fn files_dispatch_on_content() {
    let dir = tempfile::tempdir().unwrap();
    let th = theta(0.3, 1.0, 0.5, 1.0);
    let s = sample_mfbm(th, 64, 0.01, 1, SampleMethod::Cholesky).unwrap();
    for name in ["a.csv", "b.bin"] {
        let p = dir.path().join(name);
        write_series(&s, &p).unwrap();
        assert_eq!(read_series(&p, None).unwrap(), s);
    }
}

#[test]
fn plain_csv_needs_a_step() {
    let text = "increment\n0.1\n-0.2\n0.05\n";
    assert!(read_csv(text.as_bytes(), None).is_err());
    let s = read_csv(text.as_bytes(), Some(0.5)).unwrap();
    assert_eq!(s.increments, vec![0.1, -0.2, 0.05]);
    assert!((s.t_end - 1.5).abs() < 1e-15);
    let tagged = "# delta=0.25\nincrement\n1\n2\n";
    assert!(read_csv(tagged.as_bytes(), Some(0.5)).is_err());
}

#[test]
fn stochvol_spec_json_and_validation() {
    let spec = StochVolSpec {
        rho_proc: ProcessSpec::Ou {
            x0: 0.5,
            mean: 0.5,
            kappa: 1.0,
            vol: 0.2,
            driver: Driver::B,
        },
        ..StochVolSpec::constant(Hurst::new(0.3).unwrap(), 1.0, 0.5, 0.0)
    };
    let json = serde_json::to_string(&spec).unwrap();
    let back: StochVolSpec = serde_json::from_str(&json).unwrap();
    assert_eq!(spec, back);
    let bad = StochVolSpec {
        oversample: 0,
        ..spec
    };
    assert!(sample_mixed_sm(&bad, 16, 0.1, 0).is_err());
    let bad = StochVolSpec {
        sigma_proc: ProcessSpec::constant(f64::INFINITY),
        ..spec
    };
    assert!(bad.validate().is_err());
}
