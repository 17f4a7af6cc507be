//! Corollary-level quantities: the `m` functions, the extremal critical
//! radii `t*_u`, `t*_l`, and closed-form rate predictions.

use serde::{Deserialize, Serialize};

use crate::bisect::bisect_predicate;
use crate::critical::{BRACKET_FLOOR, SOLVER_REL_TOL};
use crate::ellipse::{EllipseSpec, Family};
use crate::error::{invalid, Error, Result};

/// Largest `k` in `[1, hi]` with `pred(k)`, 0 if none. `pred` must flip
/// once from true to false.
fn largest_k(hi: usize, pred: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, hi);
    while lo < hi {
        let mid = hi - (hi - lo) / 2;
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

/// `(m_u, m_l)` for testing at the origin:
/// `m_u = max{k : mu_k >= delta^2/2}`, `m_l = max{k : mu_{k+1} >= 9 delta^2/16}`.
pub fn m_zero(e: &EllipseSpec, delta: f64) -> Result<(usize, usize)> {
    let cap = (2.0 * e.mu_at(1)).sqrt().min(4.0 / 3.0 * e.mu_at(2).sqrt());
    if !(delta > 0.0 && delta < cap) {
        return Err(invalid("delta", delta, format!("must lie in (0, {cap})")));
    }
    let d2 = delta * delta;
    let m_u = largest_k(e.dim(), |k| e.mu_at(k) >= d2 / 2.0);
    let m_l = largest_k(e.dim(), |k| e.mu_at(k + 1) >= 9.0 * d2 / 16.0);
    Ok((m_u, m_l))
}

fn check_s(e: &EllipseSpec, s: usize) -> Result<()> {
    if s < 1 || s > e.dim() {
        return Err(Error::IndexOutOfRange {
            index: s,
            lo: 1,
            hi: e.dim(),
        });
    }
    Ok(())
}

fn m_extremal_unchecked(e: &EllipseSpec, delta: f64, s: usize) -> (usize, usize) {
    let d2 = delta * delta * e.mu_at(s);
    let m_u = largest_k(e.dim(), |k| e.mu_at(k).powi(2) >= d2 / 64.0);
    let m_l = largest_k(e.dim(), |k| e.mu_at(k).powi(2) >= d2);
    (m_u, m_l)
}

/// `(m_u, m_l)` for `theta*` on axis `s`:
/// `m_u = max{k : mu_k^2 >= delta^2 mu_s / 64}`, `m_l = max{k : mu_k^2 >= delta^2 mu_s}`.
pub fn m_extremal(e: &EllipseSpec, delta: f64, s: usize) -> Result<(usize, usize)> {
    check_s(e, s)?;
    let cap = e.mu_at(1) / e.mu_at(s).sqrt();
    if !(delta > 0.0 && delta < cap) {
        return Err(invalid("delta", delta, format!("must lie in (0, {cap})")));
    }
    Ok(m_extremal_unchecked(e, delta, s))
}

/// Closed forms and the matching continuous-`m` fixed points for
/// polynomial decay `mu_j = c1 j^(-2 alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolyTStar {
    pub closed_u: f64,
    pub closed_l: f64,
    /// Fixed points with `m` replaced by its un-floored value.
    pub continuous_u: f64,
    pub continuous_l: f64,
}

impl PolyTStar {
    /// Largest relative disagreement between closed form and bisection.
    pub fn max_rel_diff(&self) -> f64 {
        let r = |a: f64, b: f64| (a - b).abs() / b.abs();
        r(self.continuous_u, self.closed_u).max(r(self.continuous_l, self.closed_l))
    }
}

/// Extremal critical radii for `theta*` on axis `s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TStar {
    pub s: usize,
    pub t_u: f64,
    pub t_l: f64,
    /// `m_u(t_u)` and `m_l(t_l)`.
    pub m_u: usize,
    pub m_l: usize,
    pub poly: Option<PolyTStar>,
}

fn fixed_point(coef: f64, hi: f64, inf_form: bool, m: impl Fn(f64) -> f64) -> Result<f64> {
    let residual = |t: f64| t - coef * m(t).sqrt() / t;
    let pred = |t: f64| {
        if inf_form {
            residual(t) >= 0.0
        } else {
            residual(t) > 0.0
        }
    };
    let lo = BRACKET_FLOOR;
    if pred(lo) || !pred(hi) {
        return Err(Error::Bracket {
            lo,
            hi,
            residual_lo: residual(lo),
            residual_hi: residual(hi),
        });
    }
    let b = bisect_predicate(lo, hi, SOLVER_REL_TOL, 0.0, pred);
    Ok(if inf_form { b.hi } else { b.lo })
}

/// `t*_u = inf{t : t >= (8/sqrt rho) sigma^2 sqrt(m_u(t)) / t}` and
/// `t*_l = sup{t : t <= sigma^2 sqrt(m_l(t)) / (4t)}`.
///
/// Fails with [`Error::CorollaryPrecondition`] when `t*_u > sqrt(mu_s)`.
pub fn t_star(e: &EllipseSpec, s: usize, sigma: f64, rho: f64) -> Result<TStar> {
    check_s(e, s)?;
    if !(sigma > 0.0) {
        return Err(invalid("sigma", sigma, "must be positive"));
    }
    if !(rho > 0.0 && rho <= 0.5) {
        return Err(invalid("rho", rho, "must lie in (0, 1/2]"));
    }
    let s2 = sigma * sigma;
    let coef_u = 8.0 / rho.sqrt() * s2;
    let coef_l = 0.25 * s2;
    // beyond this both m functions vanish
    let hi = 8.0 * e.mu_at(1) / e.mu_at(s).sqrt();
    let t_u = fixed_point(coef_u, hi, true, |t| m_extremal_unchecked(e, t, s).0 as f64)?;
    let t_l = fixed_point(coef_l, hi, false, |t| m_extremal_unchecked(e, t, s).1 as f64)?;
    let sqrt_mu_s = e.mu_at(s).sqrt();
    if t_u > sqrt_mu_s {
        return Err(Error::CorollaryPrecondition { t_u, sqrt_mu_s });
    }
    let poly = match e.family() {
        Family::Poly { alpha, c1 } => {
            let sf = s as f64;
            let ex = 4.0 * alpha / (8.0 * alpha + 1.0);
            let root = 1.0 / (4.0 * alpha);
            let cont_u = |t: f64| (64.0 * c1).powf(root) * sf.sqrt() * t.powf(-2.0 * root);
            let cont_l = |t: f64| c1.powf(root) * sf.sqrt() * t.powf(-2.0 * root);
            let big = hi.max(1.0) * 1e6;
            Some(PolyTStar {
                closed_u: (coef_u * (64.0 * c1).powf(root / 2.0) * sf.powf(0.25)).powf(ex),
                closed_l: (coef_l * c1.powf(root / 2.0) * sf.powf(0.25)).powf(ex),
                continuous_u: fixed_point(coef_u, big, true, cont_u)?,
                continuous_l: fixed_point(coef_l, big, false, cont_l)?,
            })
        }
        _ => None,
    };
    let (m_u, _) = m_extremal_unchecked(e, t_u, s);
    let (_, m_l) = m_extremal_unchecked(e, t_l, s);
    Ok(TStar {
        s,
        t_u,
        t_l,
        m_u,
        m_l,
        poly,
    })
}

/// Regimes with a closed-form rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum RateFamily {
    /// Polynomial decay, testing at the origin.
    PolyZero { alpha: f64 },
    /// Exponential decay, testing at the origin.
    ExpZero { gamma: f64 },
    /// Polynomial decay, `theta*` near the boundary on axis `s`.
    PolyExtremal { alpha: f64, s: f64 },
    /// As `PolyExtremal` with `s = (sigma^2)^(-beta)`.
    PolyExtremalGrowing { alpha: f64, beta: f64 },
}

/// Rate prediction with all constants set to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePrediction {
    pub eps_sq: f64,
    /// Power of `sigma^2` (the log factor of `ExpZero` is not counted).
    pub exponent: f64,
    /// Predicted size of the critical dimension.
    pub k_scale: f64,
}

pub fn closed_form_rates(family: RateFamily, sigma: f64) -> Result<RatePrediction> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", sigma, "must be positive"));
    }
    let v = sigma * sigma;
    Ok(match family {
        RateFamily::PolyZero { alpha } => {
            let ex = 4.0 * alpha / (1.0 + 4.0 * alpha);
            RatePrediction {
                eps_sq: v.powf(ex),
                exponent: ex,
                k_scale: v.powf(-2.0 / (4.0 * alpha + 1.0)),
            }
        }
        RateFamily::ExpZero { gamma } => {
            if !(v < 1.0) {
                return Err(invalid("sigma", sigma, "the log rate needs sigma < 1"));
            }
            let l = (1.0 / v).ln();
            RatePrediction {
                eps_sq: v * l.powf(1.0 / (2.0 * gamma)),
                exponent: 1.0,
                k_scale: l.powf(1.0 / gamma),
            }
        }
        RateFamily::PolyExtremal { alpha, s } => {
            let ex = 8.0 * alpha / (1.0 + 8.0 * alpha);
            RatePrediction {
                eps_sq: (v * s.powf(0.25)).powf(ex),
                exponent: ex,
                k_scale: (s.powf(2.0 * alpha) / v).powf(2.0 / (8.0 * alpha + 1.0)),
            }
        }
        RateFamily::PolyExtremalGrowing { alpha, beta } => {
            let s = v.powf(-beta);
            RatePrediction {
                eps_sq: (v * s.powf(0.25)).powf(8.0 * alpha / (1.0 + 8.0 * alpha)),
                exponent: 2.0 * alpha * (4.0 - beta) / (1.0 + 8.0 * alpha),
                k_scale: (s.powf(2.0 * alpha) / v).powf(2.0 / (8.0 * alpha + 1.0)),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::{generate_exp, generate_poly, make_ellipse};
    use approx::assert_relative_eq;

    #[test]
    fn m_zero_examples() {
        let e = generate_poly(100, 1.0, 1.0).unwrap();
        assert_eq!(m_zero(&e, 0.2).unwrap(), (7, 5));
        assert!(m_zero(&e, 4.0 / 3.0 * 0.5).is_err());
        let c = make_ellipse(vec![10.0; 10]).unwrap();
        assert_eq!(m_zero(&c, 1.0).unwrap().0, 10);
    }

    #[test]
    fn m_extremal_examples() {
        let e = generate_poly(100, 1.0, 1.0).unwrap();
        assert_eq!(m_extremal(&e, 0.1, 1).unwrap(), (8, 3));
        assert!(m_extremal(&e, 1.0, 1).is_err());
        for d in [0.01, 0.05, 0.3, 0.9] {
            let (u, l) = m_extremal(&e, d, 1).unwrap();
            assert!(u >= l);
        }
    }

    #[test]
    fn t_star_poly_closed_forms() {
        let e = generate_poly(10_000, 1.0, 1.0).unwrap();
        let t = t_star(&e, 1, 0.01, 0.25).unwrap();
        let p = t.poly.unwrap();
        assert_relative_eq!(p.closed_l, 2.5e-5f64.powf(4.0 / 9.0), max_relative = 1e-12);
        assert_relative_eq!(p.closed_u, (8f64.powf(1.25) * 2.0 * 1e-4).powf(4.0 / 9.0), max_relative = 1e-12);
        assert!(p.max_rel_diff() < 1e-6, "{p:?}");
        assert!(t.t_l <= t.t_u);
        assert!((p.closed_l - 8.99e-3).abs() < 1e-4);
        assert!((p.closed_u - 7.2e-2).abs() < 1e-3);
    }

    #[test]
    fn t_star_general_c1() {
        let e = generate_poly(10_000, 1.5, 2.0).unwrap();
        let t = t_star(&e, 3, 0.005, 0.1).unwrap();
        assert!(t.poly.unwrap().max_rel_diff() < 1e-6);
    }

    #[test]
    fn t_star_precondition() {
        let e = generate_poly(10_000, 1.0, 1.0).unwrap();
        match t_star(&e, 200, 0.01, 0.25) {
            Err(Error::CorollaryPrecondition { t_u, sqrt_mu_s }) => assert!(t_u > sqrt_mu_s),
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn t_star_non_poly() {
        let e = generate_exp(200, 0.5, 1.0, 1.0).unwrap();
        let t = t_star(&e, 1, 0.01, 0.25).unwrap();
        assert!(t.poly.is_none());
        assert!(t.t_l <= t.t_u);
    }

    #[test]
    fn rate_exponents() {
        let r = closed_form_rates(RateFamily::PolyZero { alpha: 1.0 }, 0.1).unwrap();
        assert_relative_eq!(r.exponent, 0.8);
        let r = closed_form_rates(RateFamily::PolyExtremal { alpha: 1.0, s: 1.0 }, 0.1).unwrap();
        assert_relative_eq!(r.exponent, 8.0 / 9.0);
        let r = closed_form_rates(RateFamily::PolyExtremalGrowing { alpha: 1.0, beta: 0.2 }, 0.1).unwrap();
        assert_relative_eq!(r.exponent, 7.6 / 9.0, max_relative = 1e-12);
        // the growing-s prediction is the fixed-s one evaluated at s = sigma^(-2 beta)
        let s = 0.01f64.powf(-0.2);
        let f = closed_form_rates(RateFamily::PolyExtremal { alpha: 1.0, s }, 0.1).unwrap();
        assert_relative_eq!(r.eps_sq, f.eps_sq, max_relative = 1e-12);
        assert_relative_eq!(r.eps_sq, 0.01f64.powf(r.exponent), max_relative = 1e-12);
        let x = closed_form_rates(RateFamily::ExpZero { gamma: 1.0 }, 0.1).unwrap();
        assert_relative_eq!(x.eps_sq, 0.01 * (100f64).ln().sqrt(), max_relative = 1e-12);
    }
}
