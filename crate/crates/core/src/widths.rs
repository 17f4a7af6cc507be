//! Kolmogorov and Bernstein widths of the recentered ellipse cut by a ball.
//!
//! Every width here is taken over coordinate projections. At the origin this
//! is exact; away from it the values are upper bounds on the Kolmogorov
//! width (any coordinate projection is a feasible projection), paired with
//! lower bounds from inscribed balls.
//!
//! The set in question is `E_theta* ∩ B(eps) = { theta - theta* : theta in E,
//! ||theta - theta*|| <= eps }`. It is passed around as the triple
//! `(ellipse, theta_star, eps)`.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::ellipse::{l2_norm, theta_shape, EllipseSpec, ThetaShape};
use crate::error::{invalid, Error, Result};
use crate::rng::{substream, Purpose};

/// Which route produced a [`WidthBounds`] record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMethod {
    CenteredExact,
    ZeroCase,
    ExtremalAxis,
    GenericBound,
    BruteOracle,
}

impl WidthMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            WidthMethod::CenteredExact => "centered_exact",
            WidthMethod::ZeroCase => "zero_case",
            WidthMethod::ExtremalAxis => "extremal_axis",
            WidthMethod::GenericBound => "generic_bound",
            WidthMethod::BruteOracle => "brute_oracle",
        }
    }
}

/// Certified bracket on the width `omega_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WidthBounds {
    pub k: usize,
    pub lower: f64,
    pub upper: f64,
    pub method: WidthMethod,
    /// Difference between the upper bound and the best point found by the
    /// multistart search (zero for closed-form routes).
    pub gap: f64,
}

fn check_k(e: &EllipseSpec, k: usize, max: usize) -> Result<()> {
    if k > max {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: 0,
            hi: max,
        });
    }
    let _ = e;
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(invalid("eps", eps, "ball radius must be positive"));
    }
    Ok(())
}

/// `min{eps, sqrt(mu_{k+1})}`: the width at the origin, an upper bound that
/// only uses the ellipse constraint on the discarded coordinates.
pub fn width_upper_zero(e: &EllipseSpec, eps: f64, k: usize) -> Result<f64> {
    check_eps(eps)?;
    check_k(e, k, e.dim())?;
    Ok(eps.min(e.mu_at(k + 1).sqrt()))
}

/// Exact width of `E ∩ B(eps)` (testing at the origin).
pub fn width_exact_centered(e: &EllipseSpec, eps: f64, k: usize) -> Result<f64> {
    width_upper_zero(e, eps, k)
}

/// Radius `sqrt(mu_{k+1})` of the `(k+1)`-dimensional Euclidean ball
/// inscribed in `E` on its first `k+1` axes.
pub fn bernstein_l2_centered(e: &EllipseSpec, k: usize) -> Result<f64> {
    if e.dim() == 0 || k + 1 > e.dim() {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: 0,
            hi: e.dim().saturating_sub(1),
        });
    }
    Ok(e.mu_at(k + 1).sqrt())
}

/// Which part of the two-constraint solution produced an extremal width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtremalBranch {
    /// Both constraints active, closed-form value non-negative.
    Interior,
    /// Closed form went slightly negative from rounding and was clamped to 0.
    Clamped,
    /// The ellipse vertex on axis `m+1` lies inside the ball, so the width is
    /// `sqrt(mu_{m+1})` and the two-constraint value is not the maximum.
    EllipseVertex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtremalWidth {
    pub width: f64,
    /// `theta_{m+1}^2` before clamping.
    pub raw_sq: f64,
    pub branch: ExtremalBranch,
}

/// Closed-form width for `theta*` supported on axis `s` when both the ball
/// and the ellipse constraint are active.
///
/// With `t = mu_{m+1} / mu_s` the maximizing pair satisfies
/// `theta_{m+1}^2 = delta^2 - (sqrt(D) - t theta*_s / (1 - t))^2` where
/// `D = (delta^2 - mu_{m+1}) / (1 - t) + t theta*_s^2 / (1 - t)^2`.
pub fn width_upper_extremal(
    e: &EllipseSpec,
    theta_star_s: f64,
    s: usize,
    eps: f64,
    m: usize,
) -> Result<ExtremalWidth> {
    check_eps(eps)?;
    let d = e.dim();
    if s < 1 || s > d {
        return Err(Error::IndexOutOfRange { index: s, lo: 1, hi: d });
    }
    if m < s || m + 1 > d {
        return Err(Error::IndexOutOfRange {
            index: m,
            lo: s,
            hi: d.saturating_sub(1),
        });
    }
    let mu_s = e.mu_at(s);
    let mu_out = e.mu_at(m + 1);
    let t = mu_out / mu_s;
    if t >= 1.0 {
        return Err(Error::Infeasible(format!(
            "mu_{} = mu_{s}; the two-constraint solution needs strictly decreasing parameters",
            m + 1
        )));
    }
    let th = theta_star_s;
    if th * th / mu_s + eps * eps / mu_out <= 1.0 {
        return Err(Error::Infeasible(format!(
            "ball cap at radius {eps:e} lies inside the ellipse: only the ball constraint is active"
        )));
    }
    let disc = (eps * eps - mu_out) / (1.0 - t) + t * th * th / ((1.0 - t) * (1.0 - t));
    if disc < 0.0 {
        return Err(Error::Infeasible(format!(
            "negative discriminant {disc:e}: the ellipse constraint is slack at this radius"
        )));
    }
    let gap = disc.sqrt() - t * th / (1.0 - t);
    let raw_sq = eps * eps - gap * gap;
    let (sq, branch) = if th * th + mu_out <= eps * eps {
        (mu_out, ExtremalBranch::EllipseVertex)
    } else if raw_sq < 0.0 {
        (0.0, ExtremalBranch::Clamped)
    } else {
        (raw_sq, ExtremalBranch::Interior)
    };
    Ok(ExtremalWidth {
        width: sq.sqrt().min(eps),
        raw_sq,
        branch,
    })
}

/// Exact `max x^2` subject to `u^2 / mu_s + x^2 / mu_out <= 1` and
/// `(u - c)^2 + x^2 <= delta^2`, where `c = |theta*_s| <= sqrt(mu_s)`.
///
/// This is the squared width of `E_theta* ∩ B(delta)` under the projection
/// onto the first `k >= s` axes when `theta*` lives on axis `s` alone
/// (`mu_out = mu_{k+1}`).
pub(crate) fn axis_sup_sq(mu_s: f64, mu_out: f64, c: f64, delta: f64) -> f64 {
    let c = c.abs();
    let d2 = delta * delta;
    if mu_out <= 0.0 {
        return 0.0;
    }
    // ellipse cap reachable inside the ball
    if c * c + mu_out <= d2 {
        return mu_out;
    }
    // ball cap inside the ellipse
    if c * c / mu_s + d2 / mu_out <= 1.0 {
        return d2;
    }
    let t = mu_out / mu_s;
    if t < 1.0 {
        let disc = (d2 - mu_out) / (1.0 - t) + t * c * c / ((1.0 - t) * (1.0 - t));
        if disc >= 0.0 {
            let u = c / (1.0 - t) - disc.sqrt();
            let x2 = mu_out * (1.0 - u * u / mu_s);
            return x2.clamp(0.0, d2);
        }
    }
    // ties mu_out == mu_s: concave max-min in u
    let lo = (-mu_s.sqrt()).max(c - delta);
    let hi = mu_s.sqrt().min(c + delta);
    let f = |u: f64| (mu_out * (1.0 - u * u / mu_s)).min(d2 - (u - c) * (u - c));
    golden_max(f, lo, hi, 200).1.max(0.0)
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - r * (b - a);
    let mut x2 = a + r * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + r * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - r * (b - a);
            f1 = f(x1);
        }
        if b - a <= 1e-16 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, iters: usize) -> (f64, f64) {
    let (x, v) = golden_max(|x| -f(x), a, b, iters);
    (x, -v)
}

/// Rigorous upper bound on `omega_k(E_theta* ∩ B(eps))` through the
/// projection onto the first `k` axes.
///
/// * origin: `min{eps, sqrt(mu_{k+1})}` (exact);
/// * `theta*` on axis `s <= k`: the exact two-coordinate maximum;
/// * otherwise: `min{eps, sqrt(mu_{k+1}) + ||theta*_{>k}||}` by the
///   triangle inequality.
pub fn width_upper(e: &EllipseSpec, theta_star: &[f64], eps: f64, k: usize) -> Result<f64> {
    check_eps(eps)?;
    check_k(e, k, e.dim())?;
    if theta_star.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: theta_star.len(),
        });
    }
    Ok(width_upper_unchecked(e, theta_star, eps, k))
}

pub(crate) fn width_upper_unchecked(e: &EllipseSpec, theta_star: &[f64], eps: f64, k: usize) -> f64 {
    UpperProvider::new(e, theta_star).eval(eps, k)
}

/// [`width_upper`] with the tail norms `||theta*_{>k}||` precomputed, for
/// scans over many `(eps, k)` pairs.
pub(crate) struct UpperProvider<'a> {
    e: &'a EllipseSpec,
    shape: ThetaShape,
    tails: Vec<f64>,
}

impl<'a> UpperProvider<'a> {
    pub(crate) fn new(e: &'a EllipseSpec, theta_star: &[f64]) -> Self {
        let shape = theta_shape(theta_star);
        let tails = match shape {
            ThetaShape::General => {
                let mut acc = 0.0;
                let mut t = vec![0.0; theta_star.len() + 1];
                for i in (0..theta_star.len()).rev() {
                    acc += theta_star[i] * theta_star[i];
                    t[i] = acc.sqrt();
                }
                t
            }
            _ => Vec::new(),
        };
        Self { e, shape, tails }
    }

    pub(crate) fn eval(&self, eps: f64, k: usize) -> f64 {
        let e = self.e;
        if k >= e.dim() {
            return 0.0;
        }
        let mu_out = e.mu_at(k + 1);
        match self.shape {
            ThetaShape::Zero => eps.min(mu_out.sqrt()),
            ThetaShape::Axis { s, value } if s <= k => {
                axis_sup_sq(e.mu_at(s), mu_out, value, eps).sqrt().min(eps)
            }
            ThetaShape::Axis { value, .. } => eps.min(mu_out.sqrt() + value.abs()),
            ThetaShape::General => eps.min(mu_out.sqrt() + self.tails[k]),
        }
    }
}

/// Lower bound on `omega_k(E_theta* ∩ B(r))` from an inscribed ball:
/// exact at the origin, `min{r, sqrt(mu_{k+1}) / 2}` when
/// `||theta*||_E <= 1/2`, and the trivial 0 otherwise.
pub fn width_lower(e: &EllipseSpec, theta_star: &[f64], r: f64, k: usize) -> Result<f64> {
    check_eps(r)?;
    check_k(e, k, e.dim())?;
    let norm = e.norm(theta_star)?;
    Ok(width_lower_unchecked(e, norm, r, k))
}

pub(crate) fn width_lower_unchecked(e: &EllipseSpec, theta_norm: f64, r: f64, k: usize) -> f64 {
    let root = e.mu_at(k + 1).sqrt();
    if theta_norm == 0.0 {
        r.min(root)
    } else if theta_norm <= 0.5 {
        r.min(0.5 * root)
    } else {
        0.0
    }
}

/// Tuning knobs for the multistart coordinate-supremum search.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Random boundary seeds.
    pub n_dirs: usize,
    /// Best seeds that get refined by ascent.
    pub n_refine: usize,
    pub seed: u64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            n_dirs: 10_000,
            n_refine: 8,
            seed: 0x5eed,
        }
    }
}

/// Boundary of `E_theta* ∩ B(eps)` seen from the origin: for a unit direction
/// `u`, the largest `t` with `t u` in the set.
struct RayShooter<'a> {
    inv_mu: Vec<f64>,
    theta: &'a [f64],
    c: f64,
    eps: f64,
}

impl<'a> RayShooter<'a> {
    fn new(e: &EllipseSpec, theta: &'a [f64], eps: f64) -> Self {
        let inv_mu: Vec<f64> = e.mu().iter().map(|m| 1.0 / m).collect();
        let c = (e.norm_sq_unchecked(theta) - 1.0).min(0.0);
        Self {
            inv_mu,
            theta,
            c,
            eps,
        }
    }

    fn reach(&self, u: &[f64]) -> f64 {
        let mut a = 0.0;
        let mut b = 0.0;
        for ((ui, ti), w) in u.iter().zip(self.theta).zip(&self.inv_mu) {
            a += ui * ui * w;
            b += ti * ui * w;
        }
        if a <= 0.0 {
            return self.eps;
        }
        let disc = (b * b - a * self.c).max(0.0);
        let tau = (-b + disc.sqrt()) / a;
        tau.max(0.0).min(self.eps)
    }

    /// Squared norm of the boundary point along `u` restricted to `mask`.
    fn objective(&self, u: &[f64], mask: &[bool]) -> f64 {
        let norm_sq: f64 = u.iter().map(|x| x * x).sum();
        if norm_sq == 0.0 {
            return 0.0;
        }
        let inv = 1.0 / norm_sq.sqrt();
        let unit: Vec<f64> = u.iter().map(|x| x * inv).collect();
        let t = self.reach(&unit);
        let out: f64 = unit
            .iter()
            .zip(mask)
            .filter(|(_, m)| **m)
            .map(|(x, _)| x * x)
            .sum();
        t * t * out
    }
}

fn normalize(v: &mut [f64]) {
    let n = l2_norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

/// Ascent on the sphere of directions with central-difference gradients and
/// an adaptive angular step; stops when the tangential gradient norm drops
/// below `1e-8 * scale` or the step collapses.
fn refine_direction(ray: &RayShooter<'_>, mask: &[bool], start: &[f64], scale: f64) -> f64 {
    let d = start.len();
    let mut u = start.to_vec();
    normalize(&mut u);
    let mut f = ray.objective(&u, mask);
    let mut step = 0.25;
    let h = 1e-7;
    let mut grad = vec![0.0; d];
    let mut probe = u.clone();
    for _ in 0..400 {
        for i in 0..d {
            probe.copy_from_slice(&u);
            probe[i] = u[i] + h;
            let fp = ray.objective(&probe, mask);
            probe[i] = u[i] - h;
            let fm = ray.objective(&probe, mask);
            grad[i] = (fp - fm) / (2.0 * h);
        }
        let radial: f64 = grad.iter().zip(&u).map(|(g, x)| g * x).sum();
        grad.iter_mut().zip(&u).for_each(|(g, x)| *g -= radial * x);
        let gnorm = l2_norm(&grad);
        if gnorm < 1e-8 * scale {
            break;
        }
        let mut improved = false;
        while step > 1e-12 {
            let mut cand: Vec<f64> = u
                .iter()
                .zip(&grad)
                .map(|(x, g)| x + step * g / gnorm)
                .collect();
            normalize(&mut cand);
            let fc = ray.objective(&cand, mask);
            if fc > f {
                u = cand;
                f = fc;
                step = (step * 2.0).min(1.0);
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    f
}

fn sample_directions(d: usize, n: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, Purpose::Multistart, i as u64);
            let mut u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            normalize(&mut u);
            u
        })
        .collect()
}

/// Seeds on the boundary plus the coordinate axes (both signs), which are
/// the natural extreme points of these sets.
fn seed_points(e: &EllipseSpec, ray: &RayShooter<'_>, opts: &SearchOptions) -> Vec<(Vec<f64>, Vec<f64>)> {
    let d = e.dim();
    let mut dirs = sample_directions(d, opts.n_dirs, opts.seed);
    for i in 0..d {
        for sgn in [1.0, -1.0] {
            let mut u = vec![0.0; d];
            u[i] = sgn;
            dirs.push(u);
        }
    }
    dirs.into_iter()
        .map(|u| {
            let t = ray.reach(&u);
            let p: Vec<f64> = u.iter().map(|x| x * t).collect();
            (u, p)
        })
        .collect()
}

fn best_over_seeds(
    ray: &RayShooter<'_>,
    seeds: &[(Vec<f64>, Vec<f64>)],
    mask: &[bool],
    n_refine: usize,
    scale: f64,
) -> f64 {
    let mut scored: Vec<(f64, usize)> = seeds
        .iter()
        .enumerate()
        .map(|(i, (_, p))| {
            let v: f64 = p
                .iter()
                .zip(mask)
                .filter(|(_, m)| **m)
                .map(|(x, _)| x * x)
                .sum();
            (v, i)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut best = scored.first().map(|s| s.0).unwrap_or(0.0);
    for &(_, i) in scored.iter().take(n_refine) {
        best = best.max(refine_direction(ray, mask, &seeds[i].0, scale));
    }
    best
}

/// Multistart estimate of `max ||Delta_out||^2` over `E_theta* ∩ B(eps)`,
/// where `out` marks the coordinates discarded by the projection.
pub fn coordinate_sup_sq(
    e: &EllipseSpec,
    theta_star: &[f64],
    eps: f64,
    out: &[bool],
    opts: &SearchOptions,
) -> Result<f64> {
    check_eps(eps)?;
    if theta_star.len() != e.dim() || out.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: theta_star.len().min(out.len()),
        });
    }
    if !out.iter().any(|m| *m) {
        return Ok(0.0);
    }
    let ray = RayShooter::new(e, theta_star, eps);
    let seeds = seed_points(e, &ray, opts);
    Ok(best_over_seeds(&ray, &seeds, out, opts.n_refine, eps * eps))
}

/// Weak-duality bound on `max ||Delta_out||^2` over `E_theta* ∩ B(eps)`.
///
/// For multipliers `l1, l2 >= 0` the Lagrangian is separable across
/// coordinates, so its supremum has a closed form; any multiplier pair gives
/// a valid bound and a nested golden-section search tightens it.
pub fn dual_upper_sq(e: &EllipseSpec, theta_star: &[f64], eps: f64, out: &[bool]) -> f64 {
    let mu = e.mu();
    let dual = |l1: f64, l2: f64| -> f64 {
        let mut acc = l1 + l2 * eps * eps;
        for i in 0..mu.len() {
            let a = if out[i] { 1.0 } else { 0.0 };
            let q = a - l1 / mu[i] - l2;
            let lin = l1 * theta_star[i] / mu[i];
            let base = -l1 * theta_star[i] * theta_star[i] / mu[i];
            if q < 0.0 {
                acc += base + lin * lin / (-q);
            } else if q == 0.0 && lin == 0.0 {
                acc += base;
            } else {
                return f64::INFINITY;
            }
        }
        acc
    };
    let l2_floor = |l1: f64| -> f64 {
        mu.iter()
            .zip(out)
            .filter(|(_, o)| **o)
            .map(|(m, _)| 1.0 - l1 / m)
            .fold(0.0, f64::max)
    };
    let inner = |l1: f64| -> f64 {
        let lo = l2_floor(l1);
        let span = 4.0;
        let (_, v) = golden_min(|l2| dual(l1, l2), lo + 1e-15, lo + span, 120);
        v.min(dual(l1, lo + span))
    };
    let l1_max = 8.0 * mu[0].max(eps * eps);
    let (_, best) = golden_min(inner, 0.0, l1_max, 120);
    // (l1, l2) = (0, 1) certifies the trivial eps^2
    best.min(eps * eps).max(0.0)
}

fn first_k_mask(d: usize, k: usize) -> Vec<bool> {
    (0..d).map(|i| i >= k).collect()
}

/// Width bracket for an arbitrary `theta*` through the first-`k` projection.
///
/// The lower end comes from [`width_lower`] (ball radius `eps`). The upper end
/// is the smallest of the rigorous analytic bound, the Lagrangian dual bound,
/// and (for `theta*` on axis `s <= k`) the exact two-coordinate value; `gap`
/// reports how far it sits above the best multistart point.
pub fn width_generic_bounds(
    e: &EllipseSpec,
    theta_star: &[f64],
    eps: f64,
    k: usize,
    opts: &SearchOptions,
) -> Result<WidthBounds> {
    check_eps(eps)?;
    check_k(e, k, e.dim())?;
    let norm = e.norm(theta_star)?;
    let d = e.dim();
    if k == d {
        return Ok(WidthBounds {
            k,
            lower: 0.0,
            upper: 0.0,
            method: WidthMethod::GenericBound,
            gap: 0.0,
        });
    }
    let shape = theta_shape(theta_star);
    if shape == ThetaShape::Zero {
        let w = width_exact_centered(e, eps, k)?;
        return Ok(WidthBounds {
            k,
            lower: w,
            upper: w,
            method: WidthMethod::ZeroCase,
            gap: 0.0,
        });
    }
    let lower = width_lower_unchecked(e, norm, eps, k);
    let analytic = width_upper_unchecked(e, theta_star, eps, k);
    let mask = first_k_mask(d, k);
    let found = coordinate_sup_sq(e, theta_star, eps, &mask, opts)?.sqrt();
    let (upper, method) = match shape {
        ThetaShape::Axis { s, .. } if s <= k => (analytic, WidthMethod::ExtremalAxis),
        _ => {
            let dual = dual_upper_sq(e, theta_star, eps, &mask).sqrt();
            (analytic.min(dual), WidthMethod::GenericBound)
        }
    };
    let upper = upper.max(lower);
    Ok(WidthBounds {
        k,
        lower,
        upper,
        method,
        gap: (upper - found).max(0.0),
    })
}

/// Hard cap on the number of coordinate subsets the brute-force oracle visits.
pub const MAX_SUBSETS: f64 = 1e6;

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        if idx[i] == i + n - k {
            return out;
        }
        idx[i] += 1;
        for j in (i + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Testing oracle: minimum over all `C(d, k)` coordinate projections of the
/// multistart supremum of the residual norm over `E_theta* ∩ B(eps)`.
pub fn brute_force_width(
    e: &EllipseSpec,
    theta_star: &[f64],
    eps: f64,
    k: usize,
    opts: &SearchOptions,
) -> Result<f64> {
    check_eps(eps)?;
    check_k(e, k, e.dim())?;
    let d = e.dim();
    if theta_star.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta_star.len(),
        });
    }
    let subsets = binomial(d, k);
    if subsets > MAX_SUBSETS {
        return Err(Error::TooManySubsets {
            subsets,
            limit: MAX_SUBSETS,
        });
    }
    if k == d {
        return Ok(0.0);
    }
    let ray = RayShooter::new(e, theta_star, eps);
    let seeds = seed_points(e, &ray, opts);
    let best = combinations(d, k)
        .into_par_iter()
        .map(|keep| {
            let mut mask = vec![true; d];
            keep.iter().for_each(|&i| mask[i] = false);
            best_over_seeds(&ray, &seeds, &mask, opts.n_refine, eps * eps)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best.max(0.0).sqrt())
}

/// Whether the hypercube with half-side `delta / sqrt(|M|)` on
/// `M = {1..m} \ {s}`, centered at `theta*_s e_s`, fits in the ellipse
/// according to the bound `theta*_s^2 / mu_s + delta^2 / mu_m <= 1`.
pub fn bernstein_linf_extremal_feasible(
    e: &EllipseSpec,
    s: usize,
    theta_star_s: f64,
    m: usize,
    delta: f64,
) -> Result<bool> {
    let d = e.dim();
    if m < 2 || m > d {
        return Err(Error::IndexOutOfRange { index: m, lo: 2, hi: d });
    }
    if s < 1 || s > d {
        return Err(Error::IndexOutOfRange { index: s, lo: 1, hi: d });
    }
    let mu_s = e.mu_at(s);
    let w = mu_s.sqrt() - theta_star_s;
    let bound = 1.0 - 2.0 * w / mu_s.sqrt() + w * w / mu_s + delta * delta / e.mu_at(m);
    Ok(bound <= 1.0 + 1e-12)
}

/// Which Bernstein width drives a lower critical dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BernsteinNorm {
    /// `k b_{k-1,inf}^2`: inscribed hypercubes.
    Linf,
    /// `b_{k-1,2}^2`: inscribed Euclidean balls.
    L2,
}

/// Certified lower bound on `k b_{k-1,inf}^2(E_theta*)` (resp.
/// `b_{k-1,2}^2`) from an axis-aligned cube (resp. ball) on `k` coordinates.
///
/// At the origin the cube uses axes `1..k`; for `theta*` on axis `s` it uses
/// the first `k` axes other than `s`. Membership is checked exactly:
/// `theta*_s^2 / mu_s + r^2 sum_{i in M} 1 / mu_i <= 1`.
pub fn bernstein_certificate(
    e: &EllipseSpec,
    theta_star: &[f64],
    k: usize,
    norm: BernsteinNorm,
) -> Result<f64> {
    let profile = bernstein_profile(e, theta_star, norm)?;
    if k == 0 || k > profile.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            lo: 1,
            hi: profile.len(),
        });
    }
    Ok(profile[k - 1])
}

/// [`bernstein_certificate`] for every `k = 1..=n` at once (entry `k - 1`).
/// The values are non-increasing in `k`.
pub fn bernstein_profile(e: &EllipseSpec, theta_star: &[f64], norm: BernsteinNorm) -> Result<Vec<f64>> {
    let d = e.dim();
    if theta_star.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: theta_star.len(),
        });
    }
    let (slack, skip) = match theta_shape(theta_star) {
        ThetaShape::Zero => (1.0, None),
        ThetaShape::Axis { s, value } => (1.0 - value * value / e.mu_at(s), Some(s)),
        ThetaShape::General => {
            return Err(Error::Unsupported(
                "Bernstein widths are implemented for theta* = 0 and theta* on a single axis".into(),
            ))
        }
    };
    let slack = slack.max(0.0);
    let mut harmonic = 0.0;
    Ok((1..=d)
        .filter(|&i| Some(i) != skip)
        .enumerate()
        .map(|(j, i)| {
            let mu = e.mu_at(i);
            harmonic += 1.0 / mu;
            match norm {
                BernsteinNorm::Linf => (j + 1) as f64 * slack / harmonic,
                BernsteinNorm::L2 => slack * mu,
            }
        })
        .collect())
}

/// Writes `(eps, bounds)` rows as CSV with columns `k,eps,lower,upper,method`.
pub fn write_width_csv<W: Write>(w: W, rows: &[(f64, WidthBounds)]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["k", "eps", "lower", "upper", "method"])?;
    for (eps, b) in rows {
        wtr.write_record([
            b.k.to_string(),
            format!("{eps:.16e}"),
            format!("{:.16e}", b.lower),
            format!("{:.16e}", b.upper),
            b.method.as_str().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ellipse::{generate_poly, make_ellipse};
    use approx::assert_relative_eq;

    fn quick() -> SearchOptions {
        SearchOptions {
            n_dirs: 2000,
            n_refine: 6,
            seed: 11,
        }
    }

    #[test]
    fn zero_width_examples() {
        let e = make_ellipse(vec![4.0, 1.0]).unwrap();
        assert_eq!(width_upper_zero(&e, 10.0, 1).unwrap(), 1.0);
        assert_eq!(width_upper_zero(&e, 10.0, 2).unwrap(), 0.0);
        assert_eq!(width_upper_zero(&e, 0.5, 0).unwrap(), 0.5);
        assert!(width_upper_zero(&e, 1.0, 3).is_err());

        let e3 = make_ellipse(vec![4.0, 1.0, 0.25]).unwrap();
        assert_eq!(width_exact_centered(&e3, 0.3, 2).unwrap(), 0.3);
        assert_eq!(width_exact_centered(&e3, 2.0, 1).unwrap(), 1.0);
        let e1 = make_ellipse(vec![4.0]).unwrap();
        assert_eq!(width_exact_centered(&e1, 1.0, 1).unwrap(), 0.0);
    }

    #[test]
    fn inscribed_ball_radius() {
        assert_eq!(bernstein_l2_centered(&make_ellipse(vec![4.0, 1.0]).unwrap(), 1).unwrap(), 1.0);
        assert_eq!(bernstein_l2_centered(&make_ellipse(vec![9.0, 4.0, 1.0]).unwrap(), 0).unwrap(), 3.0);
        assert_eq!(bernstein_l2_centered(&make_ellipse(vec![1.0]).unwrap(), 0).unwrap(), 1.0);
        assert!(bernstein_l2_centered(&make_ellipse(vec![1.0]).unwrap(), 1).is_err());
    }

    #[test]
    fn extremal_small_t_limit() {
        // mu_{m+1} << mu_s: the first coordinate moves the full delta toward
        // the center, so theta_{m+1}^2 -> mu_{m+1} (1 - (theta*_s - delta)^2 / mu_s)
        let e = make_ellipse(vec![1.0, 1e-10]).unwrap();
        let w = width_upper_extremal(&e, 0.5, 1, 0.3, 1).unwrap();
        assert_relative_eq!(w.width * w.width, 0.96e-10, max_relative = 1e-6);
    }

    #[test]
    fn extremal_errors() {
        let tie = make_ellipse(vec![1.0, 1.0, 0.5]).unwrap();
        assert!(matches!(width_upper_extremal(&tie, 0.5, 1, 0.3, 1), Err(Error::Infeasible(_))));
        let e = generate_poly(3, 1.0, 1.0).unwrap();
        // delta tiny and theta* at the center: ellipse constraint slack
        assert!(matches!(width_upper_extremal(&e, 0.0, 1, 0.01, 1), Err(Error::Infeasible(_))));
        assert!(width_upper_extremal(&e, 0.5, 2, 0.3, 1).is_err());
    }

    #[test]
    fn axis_sup_matches_closed_form_when_both_active() {
        let e = generate_poly(3, 1.0, 1.0).unwrap();
        let w = width_upper_extremal(&e, 0.9, 1, 0.3, 1).unwrap();
        let exact = axis_sup_sq(1.0, 1.0 / 4.0, 0.9, 0.3);
        // mu_{m+1} = mu_2 = 1/4 here
        assert_relative_eq!(w.width * w.width, exact, max_relative = 1e-12);
    }

    #[test]
    fn upper_provider_is_an_upper_bound() {
        let e = generate_poly(6, 1.0, 1.0).unwrap();
        let theta = vec![0.2, -0.1, 0.05, 0.0, 0.01, 0.0];
        for k in 0..6 {
            let ub = width_upper(&e, &theta, 0.4, k).unwrap();
            let mask = first_k_mask(6, k);
            let found = coordinate_sup_sq(&e, &theta, 0.4, &mask, &quick()).unwrap().sqrt();
            assert!(found <= ub + 1e-9, "k={k}: {found} > {ub}");
        }
    }

    #[test]
    fn dual_bound_dominates_search_and_is_exact_at_zero() {
        let e = generate_poly(5, 1.0, 1.0).unwrap();
        let zero = vec![0.0; 5];
        for k in 0..5 {
            let mask = first_k_mask(5, k);
            let dual = dual_upper_sq(&e, &zero, 0.7, &mask);
            let want = (0.7f64 * 0.7).min(e.mu_at(k + 1));
            assert_relative_eq!(dual, want, max_relative = 1e-6);
        }
        let theta = vec![0.3, 0.2, -0.1, 0.05, 0.0];
        for k in 0..5 {
            let mask = first_k_mask(5, k);
            let dual = dual_upper_sq(&e, &theta, 0.5, &mask);
            let found = coordinate_sup_sq(&e, &theta, 0.5, &mask, &quick()).unwrap();
            assert!(found <= dual * (1.0 + 1e-9) + 1e-12, "k={k}: {found} > {dual}");
        }
    }

    #[test]
    fn generic_bounds_reduce_at_zero() {
        let e = generate_poly(6, 1.0, 1.0).unwrap();
        for k in 0..=6 {
            let b = width_generic_bounds(&e, &[0.0; 6], 0.3, k, &quick()).unwrap();
            let w = width_exact_centered(&e, 0.3, k).unwrap();
            assert_eq!((b.lower, b.upper), (w, w));
        }
    }

    #[test]
    fn brute_force_trivial_cases() {
        let e = make_ellipse(vec![4.0, 1.0, 0.25]).unwrap();
        let zero = [0.0; 3];
        assert_eq!(brute_force_width(&e, &zero, 0.5, 3, &quick()).unwrap(), 0.0);
        // k = 0: diameter of the ball-capped set
        let w0 = brute_force_width(&e, &zero, 10.0, 0, &quick()).unwrap();
        assert_relative_eq!(w0, 2.0, max_relative = 1e-6);
        let w0 = brute_force_width(&e, &zero, 0.5, 0, &quick()).unwrap();
        assert_relative_eq!(w0, 0.5, max_relative = 1e-6);
    }

    #[test]
    fn brute_force_guard() {
        let e = generate_poly(40, 1.0, 1.0).unwrap();
        assert!(matches!(
            brute_force_width(&e, &[0.0; 40], 0.1, 20, &quick()),
            Err(Error::TooManySubsets { .. })
        ));
    }

    #[test]
    fn combinations_enumerate_all() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(binomial(10, 5), 252.0);
    }

    #[test]
    fn linf_extremal_feasibility() {
        let e = generate_poly(20, 1.0, 1.0).unwrap();
        // w = 0 (theta* on the boundary) and a positive cube never fits
        assert!(!bernstein_linf_extremal_feasible(&e, 1, 1.0, 4, 0.5).unwrap());
        assert!(bernstein_linf_extremal_feasible(&e, 1, 0.9, 4, 1e-6).unwrap());
        assert!(bernstein_linf_extremal_feasible(&e, 1, 0.9, 1, 0.1).is_err());
    }

    #[test]
    fn bernstein_sandwich_at_zero() {
        let e = generate_poly(12, 1.3, 2.0).unwrap();
        let zero = vec![0.0; 12];
        for k in 0..11 {
            // b_{k,inf} from a cube on k+1 axes, b_{k,2} from the ball
            let kb = bernstein_certificate(&e, &zero, k + 1, BernsteinNorm::Linf).unwrap();
            let b_inf = (kb / (k + 1) as f64).sqrt();
            let b_2 = bernstein_certificate(&e, &zero, k + 1, BernsteinNorm::L2).unwrap().sqrt();
            assert!(b_inf <= b_2 * (1.0 + 1e-12));
            assert!(b_2 <= ((k + 1) as f64).sqrt() * b_inf * (1.0 + 1e-12));
            assert_relative_eq!(b_2, bernstein_l2_centered(&e, k).unwrap());
        }
    }

    #[test]
    fn bernstein_circle_geometry() {
        // hypercube in a sphere of radius sqrt(d): k b^2 = d
        let e = make_ellipse(vec![50.0; 50]).unwrap();
        let zero = vec![0.0; 50];
        for k in [1, 7, 50] {
            let v = bernstein_certificate(&e, &zero, k, BernsteinNorm::Linf).unwrap();
            assert_relative_eq!(v, 50.0, max_relative = 1e-12);
        }
        let gen = vec![0.1; 50];
        assert!(matches!(
            bernstein_certificate(&e, &gen, 3, BernsteinNorm::Linf),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn csv_dump_columns() {
        let e = generate_poly(3, 1.0, 1.0).unwrap();
        let rows: Vec<(f64, WidthBounds)> = (0..=3)
            .map(|k| (0.3, width_generic_bounds(&e, &[0.0; 3], 0.3, k, &quick()).unwrap()))
            .collect();
        let mut buf = Vec::new();
        write_width_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,eps,lower,upper,method"));
        assert_eq!(text.lines().count(), 5);
        assert!(text.lines().nth(4).unwrap().starts_with("3,"));
    }
}
