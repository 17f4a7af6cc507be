//! Cross-checks of library routines against independent computations.

use std::io::Write;

use ellipse_minimax::config::RunConfig;
use ellipse_minimax::ellipse::{generate_poly, kernel_to_ellipse, min_kernel_gram, read_gram_csv, uniform_design};
use ellipse_minimax::lower_bounds::{chi2_bound_empirical, chi2_bound_hypercube, hypercube_prior};
use ellipse_minimax::widths::{width_generic_bounds, width_upper_extremal, SearchOptions};

/// Characteristic polynomial coefficients `c[0] + c[1] x + ... + x^n` by
/// Faddeev-LeVerrier.
fn char_poly(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut m = vec![vec![0.0; n]; n];
    for k in 1..=n {
        // m = a m_prev + c[n-k+1] I
        let prev = m.clone();
        for i in 0..n {
            for j in 0..n {
                m[i][j] = (0..n).map(|l| a[i][l] * prev[l][j]).sum::<f64>();
            }
            m[i][i] += c[n - k + 1];
        }
        let am: f64 = (0..n).map(|i| (0..n).map(|l| a[i][l] * m[l][i]).sum::<f64>()).sum();
        c[n - k] = -am / k as f64;
    }
    c
}

#[test]
fn kernel_eigenvalues_are_char_poly_roots() {
    let x = uniform_design(4);
    assert_eq!(x, vec![0.25, 0.5, 0.75, 1.0]);
    let gram = min_kernel_gram(&x);
    let a: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| (1.0 + x[i].min(x[j])) / 4.0).collect()).collect();
    let c = char_poly(&a);
    let k = kernel_to_ellipse(&gram, 1.0).unwrap();
    let mu = k.ellipse.mu();
    assert_eq!(mu.len(), 4);
    assert_eq!(k.clamped, 0);
    let trace: f64 = (0..4).map(|i| a[i][i]).sum();
    assert!((mu.iter().sum::<f64>() - trace).abs() < 1e-12);
    for &m in mu {
        let p: f64 = c.iter().rev().fold(0.0, |acc, &ci| acc * m + ci);
        let dp: f64 = (1..c.len()).rev().fold(0.0, |acc, i| acc * m + i as f64 * c[i]);
        // Newton step size as the root error
        assert!((p / dp).abs() < 1e-12 * mu[0], "mu = {m}, p = {p}");
    }
    assert!((k.effective_sigma - 0.5).abs() < 1e-15);
}

#[test]
fn gram_csv_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gram.csv");
    let x = uniform_design(5);
    let g = min_kernel_gram(&x);
    let mut f = std::fs::File::create(&path).unwrap();
    for i in 0..5 {
        let row: Vec<String> = (0..5).map(|j| format!("{:.17e}", g[(i, j)])).collect();
        writeln!(f, "{}", row.join(",")).unwrap();
    }
    drop(f);
    assert_eq!(read_gram_csv(&path).unwrap(), g);
    let cfg = RunConfig::from_str("sigma = 1.0\n[ellipse]\nfamily = \"kernel\"\ngram = \"gram.csv\"\n", dir.path()).unwrap();
    let loaded = cfg.ellipse().unwrap();
    assert_eq!(loaded.ellipse.mu(), kernel_to_ellipse(&g, 1.0).unwrap().ellipse.mu());
}

/// Maximum of `theta_{m+1}^2` over the two-coordinate slice
/// `{(a, b) : (ts + a)^2 / mu_s + b^2 / mu_{m+1} <= 1, a^2 + b^2 <= delta^2}`,
/// by ternary search on the concave `a -> min(delta^2 - a^2, mu_{m+1} (1 - (ts + a)^2 / mu_s))`.
fn slice_max(mu_s: f64, mu_m1: f64, ts: f64, delta: f64) -> f64 {
    let f = |a: f64| (delta * delta - a * a).min(mu_m1 * (1.0 - (ts + a).powi(2) / mu_s));
    let (mut lo, mut hi) = (-delta, delta);
    for _ in 0..300 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if f(m1) < f(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    f(0.5 * (lo + hi)).max(0.0)
}

#[test]
fn extremal_width_matches_slice_search() {
    let e = generate_poly(50, 1.0, 1.0).unwrap();
    for (s, m) in [(1usize, 3usize), (1, 6), (2, 5)] {
        let sq = e.mu_at(s).sqrt();
        for frac in [0.0, 0.01, 0.05] {
            let ts = sq * (1.0 - frac);
            for delta in [0.05, 0.1, 0.2] {
                let Ok(w) = width_upper_extremal(&e, ts, s, delta, m) else {
                    assert!(ts * ts / e.mu_at(s) + delta * delta / e.mu_at(m + 1) <= 1.0, "unexpected error at s={s} m={m} delta={delta}");
                    continue;
                };
                let g = slice_max(e.mu_at(s), e.mu_at(m + 1), ts, delta);
                assert!(
                    (w.width * w.width - g).abs() <= 1e-10 * delta * delta,
                    "s={s} m={m} ts={ts} delta={delta}: {} vs {g}",
                    w.width * w.width
                );
            }
        }
    }
}

#[test]
fn generic_bounds_bracket_the_search() {
    let e = generate_poly(8, 1.0, 1.0).unwrap();
    let theta = vec![0.2, -0.05, 0.03, 0.0, 0.01, 0.0, 0.0, 0.0];
    let opts = SearchOptions::default();
    for k in 0..=8 {
        for eps in [0.05, 0.2, 0.6] {
            let b = width_generic_bounds(&e, &theta, eps, k, &opts).unwrap();
            assert!(b.lower <= b.upper + 1e-12, "{b:?}");
            assert!(b.upper <= eps + 1e-12);
            assert!(b.gap >= 0.0);
        }
    }
}

#[test]
fn empirical_chi2_agrees_with_closed_form_on_small_cubes() {
    let e = generate_poly(40, 1.0, 1.0).unwrap();
    let theta = vec![0.0; 40];
    for (k, eps, sigma) in [(4usize, 0.05, 0.05), (8, 0.08, 0.05)] {
        let prior = hypercube_prior(&e, &theta, eps, k).unwrap();
        let emp = chi2_bound_empirical(&prior, sigma, 20_000, 3).unwrap();
        let closed = chi2_bound_hypercube(eps, sigma, k).unwrap();
        assert!(emp.exact);
        assert!((emp.bound - closed.bound).abs() < 1e-9, "{} vs {}", emp.bound, closed.bound);
    }
}
