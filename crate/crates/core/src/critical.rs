//! Critical dimensions and radii.
//!
//! Each radius is the switch point of a fixed-point inequality
//! `eps  >=  coef * sqrt(k(eps)) / eps` where `k(eps)` is a step function
//! that never increases with `eps`. The residual `eps - coef sqrt(k)/eps` is
//! therefore increasing, and a sign bisection locates the inf (upper radius)
//! or sup (lower radii) of the satisfying set.

use serde::{Deserialize, Serialize};

use crate::bisect::bisect_predicate;
use crate::ellipse::{l2_norm, theta_shape, EllipseSpec, TestProblem, ThetaShape};
use crate::error::{invalid, Error, Result};
use crate::widths::{bernstein_profile, width_lower_unchecked, BernsteinNorm, UpperProvider};

/// Relative bracket width at which the radius solvers stop.
pub const SOLVER_REL_TOL: f64 = 1e-12;

/// Left end of every radius bracket.
pub const BRACKET_FLOOR: f64 = 1e-12;

/// The constants `(a, b, c)` of the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBoundConstants {
    a: f64,
    b: f64,
    c: f64,
}

impl LowerBoundConstants {
    /// Builds the triple from `(a, b)` with `c = b/(8 sqrt 2) - sqrt(a^2 - 9b^2)/(12 sqrt 2)`.
    pub fn new(a: f64, b: f64) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(invalid(name, v, "must lie in (0, 1)"));
            }
        }
        if !(a > 3.0 * b) {
            return Err(invalid("a", a, format!("must exceed 3b = {}", 3.0 * b)));
        }
        let r2 = std::f64::consts::SQRT_2;
        let c = b / (8.0 * r2) - (a * a - 9.0 * b * b).sqrt() / (12.0 * r2);
        if !(c > 0.0 && c < 1.0) {
            return Err(invalid("c", c, "derived constant must lie in (0, 1)"));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

impl Default for LowerBoundConstants {
    /// `a = sqrt(97)/12`, `b = 1/4`, which gives `c = 1/(288 sqrt 2)`.
    fn default() -> Self {
        Self::new(97f64.sqrt() / 12.0, 0.25).expect("default constants are valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Upper,
    Lower,
    Bernstein,
}

/// A solved critical radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalSolution {
    pub eps: f64,
    /// Critical dimension at `eps`.
    pub k: usize,
    pub side: Side,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    /// `eps - coef sqrt(k) / eps` at the returned radius.
    pub residual: f64,
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid("eps", eps, "must be positive"));
    }
    Ok(())
}

fn check_theta(e: &EllipseSpec, theta_star: &[f64]) -> Result<()> {
    if theta_star.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: theta_star.len(),
        });
    }
    Ok(())
}

/// Smallest `k` in `[1, d]` with `pred(k)`, assuming `pred` flips once from
/// false to true and holds at `d`.
fn smallest_k(d: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (1, d);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Critical dimension `k_u` for repeated evaluation at many radii.
struct UpperDim<'a> {
    provider: UpperProvider<'a>,
    d: usize,
    zero: bool,
}

impl<'a> UpperDim<'a> {
    fn new(e: &'a EllipseSpec, theta_star: &[f64]) -> Self {
        Self {
            provider: UpperProvider::new(e, theta_star),
            d: e.dim(),
            zero: matches!(theta_shape(theta_star), ThetaShape::Zero),
        }
    }

    fn at(&self, eps: f64) -> usize {
        let target = eps / std::f64::consts::SQRT_2;
        let ok = |k: usize| self.provider.eval(eps, k) <= target;
        if self.zero {
            smallest_k(self.d, ok)
        } else {
            (1..=self.d).find(|&k| ok(k)).unwrap_or(self.d)
        }
    }
}

/// Upper critical dimension: the smallest `k` in `[1, d]` whose width upper
/// bound at `eps` is at most `eps / sqrt 2`.
pub fn k_upper(e: &EllipseSpec, theta_star: &[f64], eps: f64) -> Result<usize> {
    check_eps(eps)?;
    check_theta(e, theta_star)?;
    Ok(UpperDim::new(e, theta_star).at(eps))
}

fn k_lower_unchecked(e: &EllipseSpec, theta_norm: f64, eps: f64, consts: &LowerBoundConstants) -> usize {
    let r = consts.a * eps;
    let target = 3.0 * consts.b * eps;
    smallest_k(e.dim(), |k| width_lower_unchecked(e, theta_norm, r, k) <= target)
}

/// Lower critical dimension: the smallest `k` whose width lower bound at
/// radius `a eps` is at most `3 b eps`.
pub fn k_lower(
    e: &EllipseSpec,
    theta_star: &[f64],
    eps: f64,
    consts: &LowerBoundConstants,
) -> Result<usize> {
    check_eps(eps)?;
    let norm = e.norm(theta_star)?;
    Ok(k_lower_unchecked(e, norm, eps, consts))
}

/// Bernstein critical dimension `max{k : cert(k) >= eps^2}` (0 when no `k`
/// qualifies), from a precomputed non-increasing certificate profile.
fn k_from_profile(profile: &[f64], eps: f64) -> usize {
    profile.partition_point(|&v| v >= eps * eps)
}

/// `k_B(eps)` from the inscribed-cube (or inscribed-ball) certificate.
pub fn k_bernstein(e: &EllipseSpec, theta_star: &[f64], eps: f64, norm: BernsteinNorm) -> Result<usize> {
    check_eps(eps)?;
    Ok(k_from_profile(&bernstein_profile(e, theta_star, norm)?, eps))
}

fn bracket_hi(p: &TestProblem) -> f64 {
    p.ellipse.radius() + l2_norm(&p.theta_star)
}

enum Form {
    Inf,
    Sup,
}

fn solve_fixed_point(
    lo: f64,
    hi: f64,
    coef: f64,
    form: Form,
    side: Side,
    k_of: impl Fn(f64) -> usize,
) -> Result<CriticalSolution> {
    let residual = |eps: f64| eps - coef * (k_of(eps) as f64).sqrt() / eps;
    let pred = |eps: f64| match form {
        Form::Inf => residual(eps) >= 0.0,
        Form::Sup => residual(eps) > 0.0,
    };
    if pred(lo) || !pred(hi) {
        return Err(Error::Bracket {
            lo,
            hi,
            residual_lo: residual(lo),
            residual_hi: residual(hi),
        });
    }
    let b = bisect_predicate(lo, hi, SOLVER_REL_TOL, 0.0, pred);
    let eps = match form {
        Form::Inf => b.hi,
        Form::Sup => b.lo,
    };
    Ok(CriticalSolution {
        eps,
        k: k_of(eps),
        side,
        bracket_lo: b.lo,
        bracket_hi: b.hi,
        residual: residual(eps),
    })
}

/// `eps_u = inf{eps : eps >= (8/sqrt(rho)) sigma^2 sqrt(k_u(eps)) / eps}`.
pub fn solve_eps_upper(p: &TestProblem) -> Result<CriticalSolution> {
    let dim = UpperDim::new(&p.ellipse, &p.theta_star);
    let coef = 8.0 / p.rho.sqrt() * p.sigma * p.sigma;
    solve_fixed_point(BRACKET_FLOOR, bracket_hi(p), coef, Form::Inf, Side::Upper, |eps| {
        dim.at(eps)
    })
}

/// `eps_l = sup{eps : eps <= sigma^2 sqrt(k_l(eps)) / (4 eps)}`.
pub fn solve_eps_lower(p: &TestProblem, consts: &LowerBoundConstants) -> Result<CriticalSolution> {
    let norm = p.ellipse.norm_sq_unchecked(&p.theta_star).sqrt();
    let coef = 0.25 * p.sigma * p.sigma;
    solve_fixed_point(BRACKET_FLOOR, bracket_hi(p), coef, Form::Sup, Side::Lower, |eps| {
        k_lower_unchecked(&p.ellipse, norm, eps, consts)
    })
}

/// `eps_B` through the inscribed-hypercube route.
pub fn solve_eps_bernstein(p: &TestProblem) -> Result<CriticalSolution> {
    solve_eps_bernstein_with(p, BernsteinNorm::Linf)
}

/// `eps_B` with a choice of Bernstein width. The `L2` variant gives a
/// possibly weaker radius.
pub fn solve_eps_bernstein_with(p: &TestProblem, norm: BernsteinNorm) -> Result<CriticalSolution> {
    let profile = bernstein_profile(&p.ellipse, &p.theta_star, norm)?;
    let coef = 0.25 * p.sigma * p.sigma;
    solve_fixed_point(BRACKET_FLOOR, bracket_hi(p), coef, Form::Sup, Side::Bernstein, |eps| {
        k_from_profile(&profile, eps)
    })
}

/// `k_u(eps_u) / k_l(eps_l)`, how far the two critical dimensions are from
/// matching on this instance.
pub fn matching_ratio(p: &TestProblem, consts: &LowerBoundConstants) -> Result<f64> {
    let up = solve_eps_upper(p)?;
    let lo = solve_eps_lower(p, consts)?;
    Ok(up.k as f64 / lo.k.max(1) as f64)
}

/// `psi(r) = sum_i r^2 theta*_i^2 / (r + mu_i)^2 = ||theta* - (I + rM)^{-1} theta*||^2`.
pub(crate) fn shrink_gap_sq(mu: &[f64], theta_star: &[f64], r: f64) -> f64 {
    theta_star
        .iter()
        .zip(mu)
        .map(|(t, m)| {
            let q = r / (r + m);
            q * q * t * t
        })
        .sum()
}

fn check_a(a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid("a", a, "must lie in (0, 1)"));
    }
    Ok(())
}

fn phi_unchecked(mu: &[f64], theta_star: &[f64], delta: f64, a: f64) -> f64 {
    if delta > l2_norm(theta_star) / a {
        return 1.0;
    }
    let target = a * a * delta * delta;
    if shrink_gap_sq(mu, theta_star, 1.0) < target {
        return 1.0;
    }
    if target <= 0.0 {
        return 0.0;
    }
    bisect_predicate(0.0, 1.0, SOLVER_REL_TOL, 1e-300, |r| {
        shrink_gap_sq(mu, theta_star, r) >= target
    })
    .hi
}

/// The boundary-proximity map: 1 when `delta > ||theta*|| / a`, otherwise
/// the smallest `r >= 0` with `psi(r) >= a^2 delta^2`, capped at 1.
pub fn phi(e: &EllipseSpec, theta_star: &[f64], delta: f64, a: f64) -> Result<f64> {
    check_theta(e, theta_star)?;
    check_a(a)?;
    if !(delta >= 0.0) {
        return Err(invalid("delta", delta, "must be nonnegative"));
    }
    Ok(phi_unchecked(e.mu(), theta_star, delta, a))
}

/// Largest `delta` with `phi(delta) <= x`; `+inf` when `x >= 1`.
pub fn phi_inverse(e: &EllipseSpec, theta_star: &[f64], x: f64, a: f64) -> Result<f64> {
    check_theta(e, theta_star)?;
    check_a(a)?;
    if x.is_nan() {
        return Err(invalid("x", x, "must be a number"));
    }
    if x >= 1.0 {
        return Ok(f64::INFINITY);
    }
    let norm = l2_norm(theta_star);
    if x <= 0.0 || norm == 0.0 {
        return Ok(0.0);
    }
    let mu = e.mu();
    let b = bisect_predicate(0.0, norm / a, SOLVER_REL_TOL, 1e-300, |delta| {
        phi_unchecked(mu, theta_star, delta, a) > x
    });
    Ok(b.lo)
}

/// Both terms of the lower-bound radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Theorem2Terms {
    pub eps_l: f64,
    /// `phi_inverse((1/||theta*||_E - 1)^2)`, possibly infinite.
    pub phi_term: f64,
    pub radius: f64,
}

pub fn theorem2_terms(p: &TestProblem, consts: &LowerBoundConstants) -> Result<Theorem2Terms> {
    let eps_l = solve_eps_lower(p, consts)?.eps;
    let norm = p.ellipse.norm(&p.theta_star)?;
    let phi_term = if norm == 0.0 {
        f64::INFINITY
    } else {
        let x = (1.0 / norm - 1.0).powi(2);
        phi_inverse(&p.ellipse, &p.theta_star, x, consts.a)?
    };
    Ok(Theorem2Terms {
        eps_l,
        phi_term,
        radius: consts.c * eps_l.min(phi_term),
    })
}

/// `c min{eps_l, phi_inverse((1/||theta*||_E - 1)^2)}`: below this separation
/// no test reaches uniform error `1/2`.
pub fn theorem2_radius(p: &TestProblem, consts: &LowerBoundConstants) -> Result<f64> {
    Ok(theorem2_terms(p, consts)?.radius)
}
