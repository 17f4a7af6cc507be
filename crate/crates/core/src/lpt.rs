//! The linear projection test: project `y - theta*` onto a coordinate set
//! and reject when the squared norm clears `sigma^2 (k + sqrt(4k / rho))`.

use serde::Serialize;

use crate::critical::{k_upper, solve_eps_upper};
use crate::ellipse::{EllipseSpec, TestProblem};
use crate::error::{invalid, Error, Result};
use crate::widths::width_upper;

/// A projection test on a coordinate support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LptTest {
    pub k: usize,
    /// Sorted, distinct, 1-based.
    pub coords: Vec<usize>,
    /// Cut on the squared statistic.
    pub threshold: f64,
    pub sigma: f64,
    pub rho: f64,
    #[serde(skip)]
    pub theta_star: Vec<f64>,
}

/// `sigma^2 (k + sqrt(4k / rho))`.
pub fn threshold_for(k: usize, sigma: f64, rho: f64) -> f64 {
    let k = k as f64;
    sigma * sigma * (k + (4.0 * k / rho).sqrt())
}

impl LptTest {
    /// Test on an arbitrary coordinate support with the standard threshold.
    pub fn new(theta_star: Vec<f64>, coords: Vec<usize>, sigma: f64, rho: f64) -> Result<Self> {
        let d = theta_star.len();
        if coords.is_empty() {
            return Err(invalid("k", 0.0, "projection must keep at least one coordinate"));
        }
        if !coords.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Precondition("coords must be sorted and distinct".into()));
        }
        if let Some(&bad) = coords.iter().find(|&&c| c < 1 || c > d) {
            return Err(Error::IndexOutOfRange { index: bad, lo: 1, hi: d });
        }
        if !(sigma > 0.0) {
            return Err(invalid("sigma", sigma, "must be positive"));
        }
        if !(rho > 0.0 && rho <= 0.5) {
            return Err(invalid("rho", rho, "must lie in (0, 1/2]"));
        }
        let k = coords.len();
        Ok(Self {
            k,
            threshold: threshold_for(k, sigma, rho),
            coords,
            sigma,
            rho,
            theta_star,
        })
    }

    /// `beta` on the unsquared norm.
    pub fn beta(&self) -> f64 {
        self.threshold.sqrt()
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub(crate) fn statistic_unchecked(&self, y: &[f64]) -> f64 {
        self.coords
            .iter()
            .map(|&c| {
                let r = y[c - 1] - self.theta_star[c - 1];
                r * r
            })
            .sum()
    }

    pub(crate) fn rejects_unchecked(&self, y: &[f64]) -> bool {
        self.statistic_unchecked(y) >= self.threshold
    }
}

/// First-`k` test at a given radius, with `k = k_upper(eps)`.
pub fn build_test_at(p: &TestProblem, eps: f64) -> Result<LptTest> {
    let k = k_upper(&p.ellipse, &p.theta_star, eps)?;
    LptTest::new(p.theta_star.clone(), (1..=k).collect(), p.sigma, p.rho)
}

/// Solves for `eps_u` and builds the test on the first `k_u(eps_u)`
/// coordinates.
pub fn build_test(p: &TestProblem) -> Result<LptTest> {
    build_test_at(p, solve_eps_upper(p)?.eps)
}

fn check_len(test: &LptTest, y: &[f64]) -> Result<()> {
    if y.len() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: test.dim(),
            got: y.len(),
        });
    }
    Ok(())
}

/// `sum_{i in coords} (y_i - theta*_i)^2`.
pub fn test_statistic(test: &LptTest, y: &[f64]) -> Result<f64> {
    check_len(test, y)?;
    Ok(test.statistic_unchecked(y))
}

/// `true` (reject) iff the statistic is at least the threshold.
pub fn decide(test: &LptTest, y: &[f64]) -> Result<bool> {
    check_len(test, y)?;
    Ok(test.rejects_unchecked(y))
}

/// `eps^2 - w^2` with `w` the width upper bound at `(eps, k)`. Fails unless
/// `w <= eps / sqrt 2`, so a returned value is always at least `eps^2 / 2`.
pub fn noncentrality_floor(e: &EllipseSpec, theta_star: &[f64], eps: f64, k: usize) -> Result<f64> {
    let w = width_upper(e, theta_star, eps, k)?;
    if w * w > 0.5 * eps * eps * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "width bound {w:e} exceeds eps/sqrt(2) = {:e} at k = {k}",
            eps / std::f64::consts::SQRT_2
        )));
    }
    Ok((eps * eps - w * w).max(0.5 * eps * eps))
}

/// Chebyshev bound on the uniform error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorBound {
    /// `rho` when both conditions hold, 1 otherwise.
    pub bound: f64,
    pub type1_ok: bool,
    pub type2_ok: bool,
    pub diagnostic: Option<String>,
}

/// Type I is at most `rho/2` when the threshold is at least
/// `sigma^2 (k + sqrt(4k/rho))`; type II is at most `rho/2` when
/// `c0 / (sigma^2 sqrt k) >= 4 / sqrt(rho)`.
pub fn analytic_error_bound(test: &LptTest, eps: f64, c0_floor: f64) -> ErrorBound {
    let k = test.k as f64;
    let s2 = test.sigma * test.sigma;
    let type1_ok = test.threshold >= threshold_for(test.k, test.sigma, test.rho) * (1.0 - 1e-12);
    let type2_ok = c0_floor / (s2 * k.sqrt()) >= 4.0 / test.rho.sqrt() * (1.0 - 1e-12);
    let mut failed = Vec::new();
    if !type1_ok {
        failed.push("type-I condition threshold >= sigma^2 (k + sqrt(4k/rho)) failed".to_string());
    }
    if !type2_ok {
        failed.push(format!(
            "type-II condition c0/(sigma^2 sqrt k) >= 4/sqrt(rho) failed at eps = {eps:e}"
        ));
    }
    ErrorBound {
        bound: if failed.is_empty() { test.rho } else { 1.0 },
        type1_ok,
        type2_ok,
        diagnostic: (!failed.is_empty()).then(|| failed.join("; ")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::critical::solve_eps_upper;
    use crate::ellipse::{generate_poly, make_ellipse};
    use approx::assert_relative_eq;

    #[test]
    fn thresholds() {
        assert_relative_eq!(threshold_for(10, 1.0, 0.25), 10.0 + 160f64.sqrt());
        assert_relative_eq!(threshold_for(1, 1.0, 0.5), 1.0 + 8f64.sqrt());
        let p = TestProblem::at_zero(make_ellipse(vec![100.0; 100]).unwrap(), 0.1, 0.25).unwrap();
        let t = build_test(&p).unwrap();
        assert_eq!(t.k, 100);
        assert_relative_eq!(t.threshold, 1.4, max_relative = 1e-12);
        assert_relative_eq!(t.beta() * t.beta(), t.threshold, max_relative = 1e-12);
    }

    #[test]
    fn statistic_and_decision() {
        let t = LptTest::new(vec![1.0, 0.0, 0.0], vec![1], 1.0, 0.25).unwrap();
        assert_eq!(test_statistic(&t, &[1.0, 0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(test_statistic(&t, &[4.0, 5.0, 7.0]).unwrap(), 9.0);
        let full = LptTest::new(vec![0.0; 3], vec![1, 2, 3], 1.0, 0.25).unwrap();
        assert_eq!(test_statistic(&full, &[1.0, 2.0, 2.0]).unwrap(), 9.0);
        let th = t.threshold;
        assert!(decide(&t, &[1.0 + th.sqrt(), 0.0, 0.0]).unwrap());
        assert!(!decide(&t, &[1.0 + 0.99 * th.sqrt(), 0.0, 0.0]).unwrap());
        // exactly at the cut
        let on = LptTest {
            threshold: 9.0,
            ..t.clone()
        };
        assert!(decide(&on, &[4.0, 0.0, 0.0]).unwrap());
        // coordinates outside the support do not matter
        assert_eq!(decide(&t, &[2.0, 1e6, -1e6]).unwrap(), decide(&t, &[2.0, 0.0, 0.0]).unwrap());
        assert!(test_statistic(&t, &[0.0]).is_err());
    }

    #[test]
    fn constructor_validation() {
        assert!(LptTest::new(vec![0.0; 3], vec![2, 1], 1.0, 0.25).is_err());
        assert!(LptTest::new(vec![0.0; 3], vec![4], 1.0, 0.25).is_err());
        assert!(LptTest::new(vec![0.0; 3], vec![], 1.0, 0.25).is_err());
        assert!(LptTest::new(vec![0.0; 3], vec![1], 1.0, 0.75).is_err());
    }

    #[test]
    fn noncentrality_examples() {
        // width exactly eps/sqrt 2
        let eps = 2f64.sqrt();
        let e = make_ellipse(vec![4.0, 1.0]).unwrap();
        assert_relative_eq!(noncentrality_floor(&e, &[0.0, 0.0], eps, 1).unwrap(), 1.0, max_relative = 1e-12);
        assert_eq!(noncentrality_floor(&e, &[0.0, 0.0], 0.5, 2).unwrap(), 0.25);
        assert!(noncentrality_floor(&e, &[0.0, 0.0], 0.5, 1).is_err());
    }

    #[test]
    fn analytic_bound_at_and_below_eps_u() {
        let e = generate_poly(200, 1.0, 1.0).unwrap();
        let p = TestProblem::at_zero(e.clone(), 0.05, 0.25).unwrap();
        let eps = solve_eps_upper(&p).unwrap().eps;
        let t = build_test(&p).unwrap();
        let c0 = noncentrality_floor(&e, &p.theta_star, eps, t.k).unwrap();
        let b = analytic_error_bound(&t, eps, c0);
        assert_eq!(b.bound, 0.25, "{b:?}");
        let small = 0.5 * eps;
        let b = analytic_error_bound(&t, small, small * small / 2.0);
        assert_eq!(b.bound, 1.0);
        assert!(b.diagnostic.unwrap().contains("type-II condition c0/(sigma^2 sqrt k) >= 4/sqrt(rho) failed"));
        // tiny noise makes both conditions slack
        let quiet = LptTest::new(vec![0.0; 200], t.coords.clone(), 1e-6, 0.25).unwrap();
        assert_eq!(analytic_error_bound(&quiet, eps, c0).bound, 0.25);
    }
}
