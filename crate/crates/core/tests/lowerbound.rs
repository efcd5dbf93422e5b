use mixfrac::faer::Mat;
use mixfrac::fracgauss::{b_h, fgn_toeplitz, mixed_cov};
use mixfrac::lowerbound::*;
use mixfrac::{Error, Hurst, ModelTheta};
use proptest::prelude::*;

fn theta(h: f64) -> ModelTheta {
    ModelTheta::new(h, 1.0, 0.5, 1.0).unwrap()
}

fn diag(d: &[f64]) -> Mat<f64> {
    Mat::from_fn(d.len(), d.len(), |i, j| if i == j { d[i] } else { 0.0 })
}

#[test]
fn kl_of_identical_laws_is_zero() {
    let s = mixed_cov(&theta(0.3), 64).unwrap();
    assert!(kl_gaussian(&s, &s).unwrap().abs() < 1e-12);
}

#[test]
fn kl_diagonal_closed_form() {
    // per coordinate ½(a/b − 1 − ln(a/b))
    let k = kl_gaussian(&diag(&[2.0]), &diag(&[1.0])).unwrap();
    assert!((k - 0.5 * (1.0 - 2f64.ln())).abs() < 1e-15);
    let a: [f64; 4] = [0.5, 3.0, 1.2, 7.0];
    let b: [f64; 4] = [1.0, 2.0, 1.5, 0.3];
    let expect: f64 = a
        .iter()
        .zip(&b)
        .map(|(x, y)| 0.5 * (x / y - 1.0 - (x / y).ln()))
        .sum();
    let k = kl_gaussian(&diag(&a), &diag(&b)).unwrap();
    assert!((k - expect).abs() < 1e-13);
}

/// 2×2 oracle with an explicit inverse and determinant.
#[test]
fn kl_two_by_two_explicit() {
    let s1 = [[2.0, 0.3], [0.3, 1.0]];
    let s0 = [[1.5, -0.4], [-0.4, 2.0]];
    let det = |m: [[f64; 2]; 2]| m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let d0 = det(s0);
    let inv0 = [[s0[1][1] / d0, -s0[0][1] / d0], [-s0[1][0] / d0, s0[0][0] / d0]];
    let mut tr = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            tr += inv0[i][j] * s1[j][i];
        }
    }
    let expect = 0.5 * (tr - 2.0 + (d0 / det(s1)).ln());
    let m = |a: [[f64; 2]; 2]| Mat::from_fn(2, 2, |i, j| a[i][j]);
    let k = kl_gaussian(&m(s1), &m(s0)).unwrap();
    assert!((k - expect).abs() < 1e-14, "{k} vs {expect}");
}

#[test]
fn kl_reports_failing_pivot() {
    let bad = diag(&[1.0, 2.0, -1.0]);
    let good = diag(&[1.0, 1.0, 1.0]);
    assert!(matches!(
        kl_gaussian(&bad, &good),
        Err(Error::NotPositiveDefinite { pivot: 2 })
    ));
    assert!(kl_gaussian(&diag(&[1.0]), &good).is_err());
}

#[test]
fn zero_offset_returns_theta0() {
    for h in [0.2, 0.3, 0.7, 0.8] {
        let t = theta(h);
        let tn = perturbed_theta(&t, 256, 0.0).unwrap();
        assert_eq!(tn.h(), t.h());
        assert!((tn.sigma_sq() - t.sigma_sq()).abs() < 1e-15);
        assert!((tn.lambda_cov() - t.lambda_cov()).abs() < 1e-15);
        assert!((tn.pi_total() - t.pi_total()).abs() < 1e-15);
    }
}

#[test]
fn rates_at_h_point_three() {
    let h = Hurst::new(0.3).unwrap();
    assert_eq!(RateColumn::of(h), RateColumn::Rough);
    let n = 1024usize;
    let r = perturbation_rates(h, n, 0.2);
    let nf = n as f64;
    let hb = 0.4;
    let expect = [
        0.2 * nf.powf(-0.5),
        0.2 * nf.powf(0.5 - 0.6),
        0.2 * nf.powf(2.0 * (hb - 0.3) - 0.5),
        0.2 * nf.powf(-0.5),
    ];
    for (a, b) in r.iter().zip(&expect) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn rates_at_h_point_eight_keep_pi_fixed() {
    let h = Hurst::new(0.8).unwrap();
    assert_eq!(RateColumn::of(h), RateColumn::AboveThreeQuarters);
    let r = perturbation_rates(h, 512, 0.3);
    assert_eq!(r[3], 0.0);
    let hb = 0.65;
    assert!((r[0] - 0.3 * 512f64.powf(2.0 * hb - 1.5)).abs() < 1e-15);
    assert!((r[1] - 0.3 * 512f64.powf(-0.5)).abs() < 1e-15);
}

#[test]
fn column_boundaries() {
    let c = |h: f64| RateColumn::of(Hurst::new(h).unwrap());
    assert_eq!(c(0.25), RateColumn::BelowQuarter);
    assert_eq!(c(0.2500001), RateColumn::Rough);
    assert_eq!(c(0.75), RateColumn::AboveThreeQuarters);
    assert_eq!(c(0.7499999), RateColumn::Smooth);
    assert!(on_column_boundary(Hurst::new(0.25).unwrap()));
    assert!(!on_column_boundary(Hurst::new(0.3).unwrap()));
    // below ¼ the martingale variance is not perturbed
    assert_eq!(perturbation_rates(Hurst::new(0.1).unwrap(), 64, 1.0)[1], 0.0);
}

/// `Σ̃(θ_n) = (σ²+r₂)/n I + (1+r₄)Πn^{−2H}Σ(H+r₁) + (1+r₃)Λb(H)n^{−2H̄}Σ(H̄+r₁/2)`.
#[test]
fn perturbed_covariance_decomposes() {
    for h in [0.3, 0.7] {
        let t = theta(h);
        let n = 128;
        let r = perturbation_rates(t.h(), n, 0.3);
        let tn = perturbed_theta(&t, n, 0.3).unwrap();
        let nf = n as f64;
        let hb = 0.5 * (h + 0.5);
        let s_h = fgn_toeplitz(Hurst::new(h + r[0]).unwrap(), n);
        let s_hb = fgn_toeplitz(Hurst::new(hb + 0.5 * r[0]).unwrap(), n);
        let c_pi = (1.0 + r[3]) * t.pi_total() * nf.powf(-2.0 * h);
        let c_la = (1.0 + r[2]) * t.lambda_cov() * b_h(t.h()) * nf.powf(-2.0 * hb);
        let direct = mixed_cov(&tn, n).unwrap();
        for i in 0..n {
            for j in 0..n {
                let bm = if i == j { (t.sigma_sq() + r[1]) / nf } else { 0.0 };
                let e = bm + c_pi * s_h[(i, j)] + c_la * s_hb[(i, j)];
                assert!((direct[(i, j)] - e).abs() < 1e-13, "{h} ({i},{j})");
            }
        }
    }
}

#[test]
fn leaving_the_parameter_set_is_an_error() {
    let t = theta(0.7);
    // H + r₁ passes 1
    let e = perturbed_theta(&t, 64, 2.0).unwrap_err();
    assert!(matches!(e, Error::ParameterSet(_)), "{e}");
    assert!(perturbed_theta(&t, 64, -0.1).is_err());
    assert!(perturbed_theta_with(&t, 64, [0.0, f64::NAN, 0.0, 0.0]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kl_is_nonnegative(h in 0.05f64..0.95, r0 in 0.0f64..0.3, k in 3u32..8) {
        prop_assume!((h - 0.5).abs() > 0.02);
        let t = theta(h);
        let n = 1usize << k;
        if let Ok(tn) = perturbed_theta(&t, n, r0) {
            let kl = kl_theta(&tn, &t, n).unwrap();
            prop_assert!(kl >= -1e-12, "{kl}");
            let back = kl_theta(&t, &tn, n).unwrap();
            prop_assert!((kl + back).is_finite() && back >= -1e-12);
        }
    }
}

#[test]
fn kl_grows_with_the_offset() {
    for h in [0.3, 0.7] {
        let t = theta(h);
        let n = 256;
        let mut last = 0.0;
        for r0 in [0.0, 0.05, 0.1, 0.2, 0.4] {
            let kl = kl_theta(&perturbed_theta(&t, n, r0).unwrap(), &t, n).unwrap();
            assert!(kl >= last - 1e-12, "{h}: r0 {r0} gives {kl} < {last}");
            last = kl;
        }
        assert!(last > 0.0);
    }
}

#[test]
fn small_offsets_stay_bounded_and_control_diverges() {
    let ns: Vec<usize> = (6..=9).map(|k| 1 << k).collect();
    for h in [0.3, 0.7] {
        let t = theta(h);
        let scan = kl_scan(&t, &ns, 0.05).unwrap();
        assert!(scan.all_ok(), "{h}: {:?}", scan.kl);
        let spread = scan.kl.iter().cloned().fold(0.0, f64::max)
            / scan.kl.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 5.0, "{h}: table rates keep KL of one order, {:?}", scan.kl);
        let control = kl_scan_kind(&t, &ns, 0.05, ScanKind::ConstantH).unwrap();
        let growth = control.kl[ns.len() - 1] / control.kl[0];
        assert!(growth > 4.0, "{h}: control growth {growth}");
    }
}

#[test]
fn bisection_finds_the_budget_edge() {
    let ns = [64, 128, 256];
    let t = theta(0.3);
    let r0 = max_r0(&t, &ns, 2.0, 1e-3).unwrap();
    assert!(r0 > 0.0 && r0 < 2.0);
    assert!(kl_scan(&t, &ns, r0).unwrap().all_ok());
    let above = kl_scan(&t, &ns, r0 + 2e-3);
    assert!(above.map_or(true, |s| !s.all_ok()));
    assert!(max_r0(&t, &[1 << 12], 1.0, 1e-3).is_err());
    assert!(kl_scan(&t, &[], 0.1).is_err());
}

#[test]
fn scan_serialises() {
    let ns = [64, 128];
    let scan = kl_scan(&theta(0.7), &ns, 0.1).unwrap();
    let mut buf = Vec::new();
    scan.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,kl,bound_ok");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("64,"));
    let back: KlScanResult = serde_json::from_str(&scan.to_json().unwrap()).unwrap();
    assert_eq!(back, scan);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("scan.json");
    scan.save(&p).unwrap();
    assert_eq!(std::fs::read_to_string(&p).unwrap(), scan.to_json().unwrap());
}
