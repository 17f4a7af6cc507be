//! Lower-bound certificates.
//!
//! For a prior `Q` on perturbations `eta` with `theta* + eta` in the
//! alternative, every test has uniform error at least
//! `1 - sqrt(E exp(<eta, eta'> / sigma^2) - 1) / 2` (`eta, eta'` i.i.d. from `Q`).
//! The hypercube prior makes the expectation `cosh(x)^k` with
//! `x = eps^2 / (k sigma^2)`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bisect::bisect_predicate;
use crate::critical::shrink_gap_sq;
use crate::ellipse::{l2_norm, theta_shape, EllipseSpec, ThetaShape, MEMBERSHIP_TOL};
use crate::error::{invalid, Error, Result};
use crate::rng::{substream, Purpose};

/// Exponents above this are treated as overflow.
pub const LOG_OVERFLOW: f64 = 700.0;

/// Largest `k` whose `2^k` sign patterns are checked one by one.
pub const EXHAUSTIVE_MAX_K: usize = 20;

/// Patterns sampled when `k` is too large to enumerate.
pub const MEMBERSHIP_SAMPLES: usize = 10_000;

/// Largest `|support|^2` summed exactly by [`chi2_bound_empirical`].
pub const EXACT_PAIR_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorPoints {
    /// Uniform over the listed perturbations.
    Explicit { points: Vec<Vec<f64>> },
    /// Uniform over `half_side * sum_i b_i e_{coords_i}`, `b` in `{-1, 1}^k`.
    /// Never materialized.
    Hypercube { coords: Vec<usize>, half_side: f64 },
}

/// Support of a uniform prior on perturbations of `theta*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorSupport {
    pub points: PriorPoints,
    /// Smallest `||eta||` over the support.
    pub separation: f64,
    /// Every `theta* + eta` is in the ellipse (tolerance `1e-9`).
    pub membership_ok: bool,
}

impl PriorSupport {
    /// Wraps user-supplied perturbations, checking membership.
    pub fn explicit(e: &EllipseSpec, theta_star: &[f64], points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Precondition("prior support is empty".into()));
        }
        let mut membership_ok = true;
        let mut separation = f64::INFINITY;
        for p in &points {
            if p.len() != theta_star.len() {
                return Err(Error::DimensionMismatch {
                    expected: theta_star.len(),
                    got: p.len(),
                });
            }
            let shifted: Vec<f64> = theta_star.iter().zip(p).map(|(t, d)| t + d).collect();
            membership_ok &= e.contains(&shifted, MEMBERSHIP_TOL)?;
            separation = separation.min(l2_norm(p));
        }
        Ok(Self {
            points: PriorPoints::Explicit { points },
            separation,
            membership_ok,
        })
    }

    /// Number of support points (`2^k` for a hypercube, saturating).
    pub fn size(&self) -> usize {
        match &self.points {
            PriorPoints::Explicit { points } => points.len(),
            PriorPoints::Hypercube { coords, .. } => 1usize.checked_shl(coords.len() as u32).unwrap_or(usize::MAX),
        }
    }
}

fn pattern_point(theta_star: &[f64], coords: &[usize], h: f64, bits: impl Fn(usize) -> bool) -> Vec<f64> {
    let mut v = theta_star.to_vec();
    for (j, &c) in coords.iter().enumerate() {
        v[c - 1] += if bits(j) { h } else { -h };
    }
    v
}

/// The `2^k` sign-pattern perturbations of size `eps / sqrt(k)` per
/// coordinate, on axes `1..k` (skipping the axis of `theta*` when it sits on
/// one). Fails with the violating pattern if some `theta* + eta` leaves the
/// ellipse.
pub fn hypercube_prior(e: &EllipseSpec, theta_star: &[f64], eps: f64, k: usize) -> Result<PriorSupport> {
    let d = e.dim();
    if theta_star.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta_star.len(),
        });
    }
    if !(eps > 0.0) {
        return Err(invalid("eps", eps, "must be positive"));
    }
    let skip = match theta_shape(theta_star) {
        ThetaShape::Axis { s, .. } => Some(s),
        _ => None,
    };
    let coords: Vec<usize> = (1..=d).filter(|&i| Some(i) != skip).take(k).collect();
    if k == 0 || coords.len() < k {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: 1,
            hi: coords.len().max(1),
        });
    }
    let h = eps / (k as f64).sqrt();
    let fits = |v: &[f64]| e.norm_sq_unchecked(v) <= 1.0 + MEMBERSHIP_TOL;
    let fail = |signs: Vec<bool>| {
        let pattern: String = signs.iter().map(|&b| if b { '+' } else { '-' }).collect();
        Error::Infeasible(format!(
            "hypercube pattern {pattern} on coords {coords:?} leaves the ellipse at eps = {eps:e}"
        ))
    };
    // the sign pattern of theta* maximizes the ellipse norm
    let worst: Vec<bool> = coords.iter().map(|&c| theta_star[c - 1] >= 0.0).collect();
    if !fits(&pattern_point(theta_star, &coords, h, |j| worst[j])) {
        return Err(fail(worst));
    }
    if k <= EXHAUSTIVE_MAX_K {
        let bad = (0u64..1 << k).into_par_iter().find_first(|&m| {
            !fits(&pattern_point(theta_star, &coords, h, |j| m >> j & 1 == 1))
        });
        if let Some(m) = bad {
            return Err(fail((0..k).map(|j| m >> j & 1 == 1).collect()));
        }
    } else {
        let bad = (0..MEMBERSHIP_SAMPLES as u64).into_par_iter().find_map_first(|i| {
            let mut rng = substream(0, Purpose::PriorMembership, i);
            let signs: Vec<bool> = (0..k).map(|_| rng.random()).collect();
            (!fits(&pattern_point(theta_star, &coords, h, |j| signs[j]))).then_some(signs)
        });
        if let Some(signs) = bad {
            return Err(fail(signs));
        }
    }
    Ok(PriorSupport {
        points: PriorPoints::Hypercube { coords, half_side: h },
        separation: eps,
        membership_ok: true,
    })
}

/// A testing-error lower bound with how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chi2Bound {
    pub bound: f64,
    /// `ln E exp(<eta, eta'> / sigma^2)`.
    pub log_value: f64,
    pub diagnostic: Option<String>,
}

/// `ln cosh x` without overflow.
fn ln_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

fn bound_from_excess(excess: f64) -> f64 {
    (1.0 - 0.5 * excess.max(0.0).sqrt()).clamp(0.0, 1.0)
}

/// `1 - sqrt(cosh(x)^k - 1) / 2` with `x = eps^2 / (k sigma^2)`, clamped to
/// `[0, 1]`. Returns the vacuous bound 0 when `k x^2 > 700`.
pub fn chi2_bound_hypercube(eps: f64, sigma: f64, k: usize) -> Result<Chi2Bound> {
    if !(eps > 0.0) {
        return Err(invalid("eps", eps, "must be positive"));
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma", sigma, "must be positive"));
    }
    if k == 0 {
        return Err(invalid("k", 0.0, "must be at least 1"));
    }
    let kf = k as f64;
    let x = eps * eps / (kf * sigma * sigma);
    let log_value = kf * ln_cosh(x);
    if kf * x * x > LOG_OVERFLOW || log_value > LOG_OVERFLOW {
        return Ok(Chi2Bound {
            bound: 0.0,
            log_value,
            diagnostic: Some(format!("k x^2 = {:e} exceeds {LOG_OVERFLOW}; bound is vacuous", kf * x * x)),
        });
    }
    Ok(Chi2Bound {
        bound: bound_from_excess(log_value.exp_m1()),
        log_value,
        diagnostic: None,
    })
}

/// Estimate of the generic chi-square bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalChi2 {
    pub bound: f64,
    /// Standard error of `bound` (0 for exact enumeration).
    pub stderr: f64,
    /// `E exp(<eta, eta'> / sigma^2) - 1`.
    pub excess: f64,
    pub exact: bool,
    pub pairs: usize,
    /// Pairs whose exponent exceeded 700. Any overflow makes the bound 0.
    pub overflow: usize,
}

/// Compensated sum, so that the exact enumeration reproduces closed forms
/// to rounding.
fn neumaier(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

fn dot_hypercube(a: u64, b: u64, k: usize, h: f64) -> f64 {
    let agree = k as i64 - 2 * ((a ^ b).count_ones() as i64);
    h * h * agree as f64
}

/// `1 - sqrt(E exp(<eta, eta'>/sigma^2) - 1) / 2` over pairs from `prior`.
///
/// Sums all pairs when the support has at most `1000` points; otherwise
/// averages `n_pairs` random pairs (antithetic in the second point for
/// hypercube priors) drawn from per-pair substreams of `seed`.
pub fn chi2_bound_empirical(prior: &PriorSupport, sigma: f64, n_pairs: usize, seed: u64) -> Result<EmpiricalChi2> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", sigma, "must be positive"));
    }
    let s2 = sigma * sigma;
    let n = prior.size();
    let exact = n <= 1000 && n * n <= EXACT_PAIR_LIMIT;
    // terms are exp(z) - 1 so the excess keeps full precision
    let terms: Vec<f64> = if exact {
        match &prior.points {
            PriorPoints::Explicit { points } => (0..n * n)
                .into_par_iter()
                .map(|ij| l2_dot(&points[ij / n], &points[ij % n]) / s2)
                .collect(),
            PriorPoints::Hypercube { coords, half_side } => {
                let k = coords.len();
                (0..(n * n) as u64)
                    .into_par_iter()
                    .map(|ij| dot_hypercube(ij / n as u64, ij % n as u64, k, *half_side) / s2)
                    .collect()
            }
        }
    } else {
        if n_pairs < 10_000 {
            return Err(invalid("n_pairs", n_pairs as f64, "Monte Carlo needs at least 1e4 pairs"));
        }
        (0..n_pairs as u64)
            .into_par_iter()
            .map(|i| {
                let mut rng = substream(seed, Purpose::PriorPairs, i);
                match &prior.points {
                    PriorPoints::Explicit { points } => {
                        let a = &points[rng.random_range(0..points.len())];
                        let b = &points[rng.random_range(0..points.len())];
                        l2_dot(a, b) / s2
                    }
                    PriorPoints::Hypercube { coords, half_side } => {
                        // only sign agreements matter; z and -z are the antithetic pair
                        let k = coords.len();
                        let agree = (0..k).filter(|_| rng.random::<bool>()).count();
                        half_side * half_side * (2 * agree) as f64 / s2 - half_side * half_side * k as f64 / s2
                    }
                }
            })
            .collect()
    };
    let overflow = terms.iter().filter(|&&z| z > LOG_OVERFLOW).count();
    let antithetic = !exact && matches!(prior.points, PriorPoints::Hypercube { .. });
    let values: Vec<f64> = terms
        .iter()
        .map(|&z| {
            let z = z.min(LOG_OVERFLOW);
            if antithetic {
                // (e^z + e^-z)/2 - 1
                0.5 * (z.exp_m1() + (-z).exp_m1())
            } else {
                z.exp_m1()
            }
        })
        .collect();
    let count = values.len() as f64;
    let excess = neumaier(values.iter().copied()) / count;
    let stderr_mean = if exact {
        0.0
    } else {
        let var = neumaier(values.iter().map(|v| (v - excess).powi(2))) / (count - 1.0).max(1.0);
        (var / count).sqrt()
    };
    let bound = if overflow > 0 { 0.0 } else { bound_from_excess(excess) };
    // delta method on 1 - sqrt(u)/2
    let stderr = if exact || overflow > 0 {
        0.0
    } else if excess > 0.0 {
        (stderr_mean / (4.0 * excess.sqrt())).min(1.0)
    } else {
        (0.5 * stderr_mean.sqrt()).min(1.0)
    };
    Ok(EmpiricalChi2 {
        bound,
        stderr,
        excess,
        exact,
        pairs: values.len(),
        overflow,
    })
}

fn l2_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Shrunken companion of `theta*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaDagger {
    /// `(I + rM)^{-1} theta*`.
    pub theta: Vec<f64>,
    pub r: f64,
    /// `||theta* - theta_dagger||`, equal to `a eps` up to rounding.
    pub distance: f64,
}

/// Solves `sum_i r^2 theta*_i^2 / (r + mu_i)^2 = (a eps)^2` for `r` and
/// returns `theta*_i / (1 + r / mu_i)`.
pub fn theta_dagger(e: &EllipseSpec, theta_star: &[f64], a: f64, eps: f64) -> Result<ThetaDagger> {
    let mu = e.mu();
    if theta_star.len() != mu.len() {
        return Err(Error::DimensionMismatch {
            expected: mu.len(),
            got: theta_star.len(),
        });
    }
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid("a", a, "must lie in (0, 1)"));
    }
    if !(eps > 0.0) {
        return Err(invalid("eps", eps, "must be positive"));
    }
    let target = (a * eps).powi(2);
    let norm = l2_norm(theta_star);
    if !(norm > a * eps) {
        return Err(Error::Precondition(format!(
            "||theta*|| = {norm:e} must exceed a eps = {:e}",
            a * eps
        )));
    }
    let mut hi = 1.0;
    while shrink_gap_sq(mu, theta_star, hi) < target {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Infeasible("no finite root for theta dagger".into()));
        }
    }
    let b = bisect_predicate(0.0, hi, 1e-15, 1e-300, |r| shrink_gap_sq(mu, theta_star, r) >= target);
    let r = 0.5 * (b.lo + b.hi);
    let theta: Vec<f64> = theta_star.iter().zip(mu).map(|(t, m)| t / (1.0 + r / m)).collect();
    let diff: Vec<f64> = theta_star.iter().zip(&theta).map(|(t, d)| t - d).collect();
    if e.norm_sq_unchecked(&theta) >= e.norm_sq_unchecked(theta_star) {
        return Err(Error::Infeasible("theta dagger is not strictly inside theta*".into()));
    }
    // the residual points along M theta_dagger
    let m_theta: Vec<f64> = theta.iter().zip(mu).map(|(t, m)| t / m).collect();
    let cos = l2_dot(&diff, &m_theta) / (l2_norm(&diff) * l2_norm(&m_theta));
    if !(cos >= 1.0 - 1e-8) {
        return Err(Error::Infeasible(format!("theta dagger residual is off direction (cos = {cos})")));
    }
    Ok(ThetaDagger {
        distance: l2_norm(&diff),
        theta,
        r,
    })
}

/// JSON record for a lower-bound certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub eps: f64,
    pub sigma: f64,
    pub k: usize,
    pub bound: f64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stderr: Option<f64>,
}

impl Certificate {
    pub fn hypercube(eps: f64, sigma: f64, k: usize) -> Result<Self> {
        Ok(Self {
            eps,
            sigma,
            k,
            bound: chi2_bound_hypercube(eps, sigma, k)?.bound,
            method: "hypercube_closed_form".into(),
            stderr: None,
        })
    }

    pub fn empirical(eps: f64, sigma: f64, k: usize, est: &EmpiricalChi2) -> Self {
        Self {
            eps,
            sigma,
            k,
            bound: est.bound,
            method: if est.exact { "empirical_exact" } else { "empirical_mc" }.into(),
            stderr: (!est.exact).then_some(est.stderr),
        }
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::{generate_poly, make_ellipse};
    use approx::assert_relative_eq;

    #[test]
    fn circle_hypercube() {
        let e = make_ellipse(vec![1.0, 1.0]).unwrap();
        let p = hypercube_prior(&e, &[0.0, 0.0], 1.0, 2).unwrap();
        assert_eq!(p.size(), 4);
        assert!(p.membership_ok);
        match &p.points {
            PriorPoints::Hypercube { coords, half_side } => {
                assert_eq!(coords, &vec![1, 2]);
                assert_relative_eq!(*half_side, 0.5f64.sqrt());
            }
            _ => unreachable!(),
        }
        assert!(hypercube_prior(&e, &[0.0, 0.0], 1.01, 2).is_err());
    }

    #[test]
    fn poly_prior_feasible_at_bernstein_dimension() {
        let e = generate_poly(60, 1.0, 1.0).unwrap();
        let z = vec![0.0; 60];
        for k in [1, 5, 25] {
            let cert = crate::widths::bernstein_certificate(&e, &z, k, crate::widths::BernsteinNorm::Linf).unwrap();
            let eps = cert.sqrt() * (1.0 - 1e-9);
            assert!(hypercube_prior(&e, &z, eps, k).unwrap().membership_ok);
            assert!(hypercube_prior(&e, &z, eps * 1.01, k).is_err());
        }
    }

    #[test]
    fn axis_theta_prior_skips_axis() {
        let e = generate_poly(10, 1.0, 1.0).unwrap();
        let mut t = vec![0.0; 10];
        t[0] = 0.5;
        let p = hypercube_prior(&e, &t, 0.01, 3).unwrap();
        match p.points {
            PriorPoints::Hypercube { coords, .. } => assert_eq!(coords, vec![2, 3, 4]),
            _ => unreachable!(),
        }
    }

    #[test]
    fn closed_form_values() {
        let b = chi2_bound_hypercube(1.0, 1.0, 1).unwrap();
        assert_relative_eq!(b.bound, 1.0 - 0.5 * (1f64.cosh() - 1.0).sqrt(), max_relative = 1e-14);
        assert!((b.bound - 0.6315).abs() < 1e-4);
        assert!(chi2_bound_hypercube(1e-8, 1.0, 3).unwrap().bound > 1.0 - 1e-7);
        for k in [1usize, 16, 4096] {
            let s = 0.1;
            let eps = ((k as f64).sqrt() * s * s / 4.0).sqrt();
            let b = chi2_bound_hypercube(eps, s, k).unwrap().bound;
            assert!(b >= 1.0 - 0.5 * ((1.0f64 / 16.0).exp() - 1.0).sqrt());
        }
        let v = chi2_bound_hypercube(100.0, 0.1, 2).unwrap();
        assert_eq!(v.bound, 0.0);
        assert!(v.diagnostic.is_some());
    }

    #[test]
    fn enumeration_matches_closed_form() {
        let e = make_ellipse(vec![1.0; 9]).unwrap();
        for k in [1, 4, 9] {
            let p = hypercube_prior(&e, &[0.0; 9], 0.8, k).unwrap();
            let est = chi2_bound_empirical(&p, 0.7, 0, 1).unwrap();
            assert!(est.exact);
            let closed = chi2_bound_hypercube(0.8, 0.7, k).unwrap().bound;
            assert!((est.bound - closed).abs() < 1e-12, "{} vs {closed}", est.bound);
        }
    }

    #[test]
    fn monte_carlo_hypercube() {
        let e = make_ellipse(vec![1.0; 30]).unwrap();
        let p = hypercube_prior(&e, &vec![0.0; 30], 0.5, 30).unwrap();
        let est = chi2_bound_empirical(&p, 0.3, 20_000, 9).unwrap();
        assert!(!est.exact);
        let closed = chi2_bound_hypercube(0.5, 0.3, 30).unwrap().bound;
        assert!((est.bound - closed).abs() < 4.0 * est.stderr + 1e-12, "{est:?} vs {closed}");
        assert_eq!(est, chi2_bound_empirical(&p, 0.3, 20_000, 9).unwrap());
    }

    #[test]
    fn small_explicit_priors() {
        let e = make_ellipse(vec![4.0, 1.0]).unwrap();
        let one = PriorSupport::explicit(&e, &[0.0, 0.0], vec![vec![0.3, 0.4]]).unwrap();
        let est = chi2_bound_empirical(&one, 1.0, 0, 0).unwrap();
        assert_relative_eq!(est.excess, 0.25f64.exp_m1(), max_relative = 1e-14);
        let two = PriorSupport::explicit(&e, &[0.0, 0.0], vec![vec![0.3, 0.4], vec![-0.3, -0.4]]).unwrap();
        assert_eq!(two.separation, 0.5);
        let est = chi2_bound_empirical(&two, 1.0, 0, 0).unwrap();
        assert_relative_eq!(est.excess + 1.0, 0.25f64.cosh(), max_relative = 1e-14);
        let out = PriorSupport::explicit(&e, &[0.0, 0.0], vec![vec![0.0, 1.5]]).unwrap();
        assert!(!out.membership_ok);
    }

    #[test]
    fn overflow_is_vacuous() {
        let e = make_ellipse(vec![1.0]).unwrap();
        let p = PriorSupport::explicit(&e, &[0.0], vec![vec![1.0]]).unwrap();
        let est = chi2_bound_empirical(&p, 0.01, 0, 0).unwrap();
        assert_eq!(est.overflow, 1);
        assert_eq!(est.bound, 0.0);
    }

    #[test]
    fn dagger_one_dimensional() {
        let e = make_ellipse(vec![2.0]).unwrap();
        let (a, eps, t) = (0.5, 0.6, 1.2);
        let out = theta_dagger(&e, &[t], a, eps).unwrap();
        assert_relative_eq!(out.r, a * eps * 2.0 / (t - a * eps), max_relative = 1e-12);
        assert_relative_eq!(out.distance, a * eps, max_relative = 1e-12);
        assert!(theta_dagger(&e, &[0.2], a, eps).is_err());
    }

    #[test]
    fn dagger_general() {
        let e = generate_poly(6, 1.0, 1.0).unwrap();
        let t = [0.6, 0.3, -0.1, 0.05, 0.0, 0.02];
        let out = theta_dagger(&e, &t, 0.8, 0.2).unwrap();
        assert_relative_eq!(out.distance, 0.16, max_relative = 1e-10);
        assert!(e.norm(&out.theta).unwrap() < e.norm(&t).unwrap());
        let tiny = theta_dagger(&e, &t, 0.8, 1e-9).unwrap();
        assert!(tiny.r < 1e-8);
    }

    #[test]
    fn certificate_json() {
        let c = Certificate::hypercube(0.1, 0.1, 4).unwrap();
        let mut buf = Vec::new();
        c.write_json(&mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v["method"], "hypercube_closed_form");
        assert!(v.get("stderr").is_none());
    }
}
