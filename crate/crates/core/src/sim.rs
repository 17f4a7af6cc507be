//! Monte Carlo harness: observations, worst-case alternatives, error
//! estimates, empirical radii, and sigma sweeps with slope fits.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::critical::{solve_eps_lower, solve_eps_upper, LowerBoundConstants};
use crate::ellipse::{l2_norm, EllipseSpec, TestProblem, MEMBERSHIP_TOL};
use crate::error::{invalid, Error, Result};
use crate::lpt::{build_test_at, LptTest};
use crate::rates::t_star;
use crate::rng::{substream, Purpose};

/// Default number of Monte Carlo trials for error estimates.
pub const DEFAULT_TRIALS: usize = 20_000;

fn draw(theta: &[f64], sigma: f64, seed: u64, purpose: Purpose, index: u64) -> Vec<f64> {
    let mut rng = substream(seed, purpose, index);
    theta
        .iter()
        .map(|t| t + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `y = theta + sigma g` from the substream of `(seed, trial_index)`.
pub fn sample_observation(theta: &[f64], sigma: f64, seed: u64, trial_index: u64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", sigma, "must be positive"));
    }
    Ok(draw(theta, sigma, seed, Purpose::Observation, trial_index))
}

/// Noise-free observation, `y = theta`.
pub fn sample_observation_exact(theta: &[f64]) -> Vec<f64> {
    theta.to_vec()
}

/// Candidate in-projection and out-of-projection axes for the pair search.
const PAIR_AXES: usize = 32;
const ANGLE_GRID: usize = 4096;

fn top_axes(e: &EllipseSpec, theta_star: &[f64], pool: Vec<usize>) -> Vec<usize> {
    let mut by_mu = pool.clone();
    by_mu.sort_by(|&a, &b| e.mu_at(b).total_cmp(&e.mu_at(a)).then(a.cmp(&b)));
    by_mu.truncate(PAIR_AXES);
    let mut by_theta = pool;
    by_theta.sort_by(|&a, &b| theta_star[b - 1].abs().total_cmp(&theta_star[a - 1].abs()).then(a.cmp(&b)));
    by_theta.truncate(PAIR_AXES / 4);
    by_mu.extend(by_theta.into_iter().filter(|&a| theta_star[a - 1] != 0.0));
    by_mu.sort_unstable();
    by_mu.dedup();
    by_mu
}

/// Best point `theta* + eps (cos phi e_i + sin phi e_j)` in the ellipse,
/// minimizing `cos^2 phi` (the part kept by the projection). `i = None`
/// forces `phi = +-pi/2`.
fn pair_search(e: &EllipseSpec, theta_star: &[f64], base: f64, eps: f64, i: Option<usize>, j: usize) -> Option<(f64, f64)> {
    let mu_j = e.mu_at(j);
    let tj = theta_star[j - 1];
    let (mu_i, ti) = match i {
        Some(i) => (e.mu_at(i), theta_star[i - 1]),
        None => (1.0, 0.0),
    };
    let excess = |phi: f64| {
        let (s, c) = phi.sin_cos();
        let xi = if i.is_some() { ti + eps * c } else { 0.0 };
        let xj = tj + eps * s;
        base + xi * xi / mu_i + xj * xj / mu_j - 1.0
    };
    let feasible = |phi: f64| excess(phi) <= MEMBERSHIP_TOL * 0.5;
    let tau = std::f64::consts::TAU;
    if i.is_none() {
        return [0.25 * tau, 0.75 * tau]
            .into_iter()
            .filter(|&p| feasible(p))
            .map(|p| (0.0, p))
            .next();
    }
    let mut best: Option<(f64, f64)> = None;
    let step = tau / ANGLE_GRID as f64;
    for g in 0..ANGLE_GRID {
        let phi = g as f64 * step;
        if !feasible(phi) {
            continue;
        }
        let mut phi = phi;
        // push toward the nearer of pi/2, 3pi/2 while staying feasible
        let target = if phi.cos() * phi.sin() >= 0.0 {
            if phi < 0.5 * tau { 0.25 * tau } else { 0.75 * tau }
        } else if phi < 0.5 * tau {
            0.25 * tau
        } else {
            0.75 * tau
        };
        if feasible(target) {
            phi = target;
        } else {
            let (mut ok, mut bad) = (phi, target);
            for _ in 0..80 {
                let mid = 0.5 * (ok + bad);
                if feasible(mid) {
                    ok = mid;
                } else {
                    bad = mid;
                }
            }
            phi = ok;
        }
        let kept = phi.cos().powi(2);
        if best.is_none_or(|(b, _)| kept < b) {
            best = Some((kept, phi));
        }
    }
    best
}

/// A point `theta` in the ellipse with `||theta - theta*|| = eps` and small
/// projected separation `||P (theta - theta*)||^2` for the projection on
/// `coords`.
///
/// Two-coordinate candidates (one kept axis, one discarded axis, up to 32 of
/// each, preferring large `mu` and large `|theta*|`) are scanned over the
/// circle of radius `eps` with boundary refinement, together with the
/// straight move toward the origin. The best feasible candidate wins.
pub fn worst_case_alternative(e: &EllipseSpec, theta_star: &[f64], eps: f64, coords: &[usize]) -> Result<Vec<f64>> {
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
    let mut kept = vec![false; d];
    for &c in coords {
        if c < 1 || c > d {
            return Err(Error::IndexOutOfRange { index: c, lo: 1, hi: d });
        }
        kept[c - 1] = true;
    }
    let ins = top_axes(e, theta_star, (1..=d).filter(|&i| kept[i - 1]).collect());
    let outs = top_axes(e, theta_star, (1..=d).filter(|&i| !kept[i - 1]).collect());
    let total = e.norm_sq_unchecked(theta_star);
    let term = |a: usize| theta_star[a - 1].powi(2) / e.mu_at(a);
    let mut pairs: Vec<(Option<usize>, usize)> = outs.iter().map(|&j| (None, j)).collect();
    for &i in &ins {
        pairs.extend(outs.iter().map(|&j| (Some(i), j)));
    }
    let found = pairs
        .par_iter()
        .filter_map(|&(i, j)| {
            let base = total - term(j) - i.map_or(0.0, term);
            pair_search(e, theta_star, base.max(0.0), eps, i, j).map(|(kept, phi)| (kept, i, j, phi))
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut best: Option<(f64, Vec<f64>)> = found.map(|(_, i, j, phi)| {
        let mut v = theta_star.to_vec();
        let (s, c) = phi.sin_cos();
        if let Some(i) = i {
            v[i - 1] += eps * c;
        }
        v[j - 1] += eps * s;
        let p = projected_sq(theta_star, &v, &kept);
        (p, v)
    });
    // straight toward the center (or along the first axis at the origin)
    let norm = l2_norm(theta_star);
    let dir: Vec<f64> = if norm > 0.0 {
        theta_star.iter().map(|t| -t / norm).collect()
    } else {
        (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect()
    };
    let v: Vec<f64> = theta_star.iter().zip(&dir).map(|(t, u)| t + eps * u).collect();
    if e.norm_sq_unchecked(&v) <= 1.0 + MEMBERSHIP_TOL {
        let p = projected_sq(theta_star, &v, &kept);
        if best.as_ref().is_none_or(|(b, _)| p < *b) {
            best = Some((p, v));
        }
    }
    best.map(|(_, v)| v).ok_or_else(|| {
        Error::Infeasible(format!(
            "no point of the ellipse found at distance {eps:e} from theta*"
        ))
    })
}

fn projected_sq(theta_star: &[f64], theta: &[f64], kept: &[bool]) -> f64 {
    theta_star
        .iter()
        .zip(theta)
        .zip(kept)
        .filter(|(_, &k)| k)
        .map(|((a, b), _)| (b - a).powi(2))
        .sum()
}

/// `||P (theta - theta*)||^2` for the test's projection.
pub fn noncentrality(test: &LptTest, theta: &[f64]) -> f64 {
    test.coords
        .iter()
        .map(|&c| (theta[c - 1] - test.theta_star[c - 1]).powi(2))
        .sum()
}

/// Monte Carlo error rates of a test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEstimate {
    pub type1: f64,
    pub type2: f64,
    pub stderr1: f64,
    pub stderr2: f64,
    pub trials: usize,
    pub seed: u64,
    /// Rejections under the null.
    pub null_rejections: u64,
    /// Acceptances under the alternative.
    pub alt_acceptances: u64,
}

impl ErrorEstimate {
    pub fn total(&self) -> f64 {
        self.type1 + self.type2
    }
}

fn binomial_stderr(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Type I rate under `theta*` and type II rate under `theta_alt`, each from
/// `trials` independent observations on per-trial substreams.
pub fn estimate_errors(test: &LptTest, theta_alt: &[f64], trials: usize, seed: u64) -> Result<ErrorEstimate> {
    if trials == 0 {
        return Err(invalid("trials", 0.0, "must be at least 1"));
    }
    if theta_alt.len() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: test.dim(),
            got: theta_alt.len(),
        });
    }
    let (null_rejections, alt_acceptances) = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let y0 = draw(&test.theta_star, test.sigma, seed, Purpose::Null, i);
            let y1 = draw(theta_alt, test.sigma, seed, Purpose::Alternative, i);
            (test.rejects_unchecked(&y0) as u64, !test.rejects_unchecked(&y1) as u64)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = trials as f64;
    let type1 = null_rejections as f64 / n;
    let type2 = alt_acceptances as f64 / n;
    Ok(ErrorEstimate {
        type1,
        type2,
        stderr1: binomial_stderr(type1, trials),
        stderr2: binomial_stderr(type2, trials),
        trials,
        seed,
        null_rejections,
        alt_acceptances,
    })
}

/// Measured radius at which the built test's error crosses `rho`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalRadius {
    pub eps: f64,
    /// Error estimate at `eps`.
    pub estimate: ErrorEstimate,
    pub trials: usize,
    /// Whether the bracket check needed the 4x retry.
    pub retried: bool,
    pub note: String,
}

const RADIUS_DEPTH: usize = 20;

/// Uniform error of the first-`k_u(eps)` test against the constructed
/// alternative at `eps`.
pub fn error_at(p: &TestProblem, eps: f64, trials: usize, seed: u64) -> Result<ErrorEstimate> {
    let test = build_test_at(p, eps)?;
    let alt = worst_case_alternative(&p.ellipse, &p.theta_star, eps, &test.coords)?;
    estimate_errors(&test, &alt, trials, seed)
}

/// Bisection (depth 20) for the smallest `eps` whose estimated uniform error
/// is at most `rho`, between `eps_l` and a multiple of `eps_u`. The same
/// seed is used at every radius. A measurement, not a certificate.
pub fn empirical_radius(p: &TestProblem, trials: usize, seed: u64) -> Result<EmpiricalRadius> {
    match radius_search(p, trials, seed) {
        Ok(r) => Ok(r),
        Err(Error::Infeasible(msg)) if msg.starts_with("non-monotone") => {
            let mut r = radius_search(p, 4 * trials, seed)?;
            r.retried = true;
            Ok(r)
        }
        Err(e) => Err(e),
    }
}

fn radius_search(p: &TestProblem, trials: usize, seed: u64) -> Result<EmpiricalRadius> {
    let consts = LowerBoundConstants::default();
    let eps_u = solve_eps_upper(p)?.eps;
    let mut lo = solve_eps_lower(p, &consts)?.eps.min(eps_u);
    let mut hi = eps_u;
    let ok = |eps: f64| -> Result<(bool, ErrorEstimate)> {
        let est = error_at(p, eps, trials, seed)?;
        Ok((est.total() <= p.rho, est))
    };
    let (mut hi_ok, mut hi_est) = ok(hi)?;
    for _ in 0..4 {
        if hi_ok {
            break;
        }
        hi *= 1.25;
        (hi_ok, hi_est) = ok(hi)?;
    }
    if !hi_ok {
        return Err(Error::Infeasible(format!(
            "non-monotone empirical error: still above rho at eps = {hi:e}"
        )));
    }
    for _ in 0..4 {
        if !ok(lo)?.0 {
            break;
        }
        lo *= 0.5;
    }
    if ok(lo)?.0 {
        return Err(Error::Infeasible(format!(
            "non-monotone empirical error: already below rho at eps = {lo:e}"
        )));
    }
    for _ in 0..RADIUS_DEPTH {
        let mid = 0.5 * (lo + hi);
        let (good, est) = ok(mid)?;
        if good {
            hi = mid;
            hi_est = est;
        } else {
            lo = mid;
        }
    }
    Ok(EmpiricalRadius {
        eps: hi,
        estimate: hi_est,
        trials,
        retried: false,
        note: "point estimate compared with rho, no multiplicity correction".into(),
    })
}

/// Least-squares slope of `ln y` on `ln x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
}

impl ExponentFit {
    pub fn residual(&self, x: f64, y: f64) -> f64 {
        y.ln() - (self.intercept + self.slope * x.ln())
    }
}

/// Ordinary least squares on `(ln x, ln y)`. Needs at least 3 points and
/// an `x` range of at least one decade.
pub fn fit_exponent(rows: &[(f64, f64)]) -> Result<ExponentFit> {
    if rows.len() < 3 {
        return Err(invalid("rows", rows.len() as f64, "need at least 3 points"));
    }
    if let Some(&(x, y)) = rows.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
        return Err(Error::Precondition(format!("non-positive point ({x}, {y})")));
    }
    let (xmin, xmax) = rows
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &(x, _)| (a.min(x), b.max(x)));
    if xmax / xmin < 10.0 * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "x range [{xmin:e}, {xmax:e}] spans less than one decade"
        )));
    }
    let n = rows.len() as f64;
    let lx: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let stderr = if rows.len() > 2 { (ssr / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(ExponentFit {
        slope,
        stderr,
        intercept,
    })
}

/// One noise level of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma: f64,
    pub eps_u: f64,
    pub eps_l: f64,
    pub k_u: usize,
    pub k_l: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepKind {
    /// `eps_u`, `eps_l` from the critical-radius solvers.
    Critical,
    /// `t*_u`, `t*_l` on axis `s`; `k` columns hold `m_u`, `m_l`.
    Extremal { s: usize },
}

/// Radii over a grid of noise levels with fitted `sigma^2` exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub kind: SweepKind,
    /// Sorted by `sigma`.
    pub rows: Vec<SweepRow>,
    /// Slope of `ln eps_u^2` against `ln sigma^2`.
    pub fitted_exponent: f64,
    pub fit_stderr: f64,
    /// Same fit for `eps_l^2`.
    pub lower_exponent: f64,
    pub lower_stderr: f64,
    /// Grid points whose solve failed, with the reason.
    pub failures: Vec<(f64, String)>,
    #[serde(skip)]
    pub upper_fit: Option<ExponentFit>,
    pub ellipse: EllipseSpec,
}

fn check_grid(grid: &[f64]) -> Result<Vec<f64>> {
    if grid.len() < 8 {
        return Err(invalid("sigma_grid", grid.len() as f64, "need at least 8 points"));
    }
    if let Some(&s) = grid.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        return Err(invalid("sigma", s, "must be positive"));
    }
    let mut g = grid.to_vec();
    g.sort_by(f64::total_cmp);
    Ok(g)
}

fn finish(kind: SweepKind, rows: Vec<SweepRow>, failures: Vec<(f64, String)>, e: &EllipseSpec) -> Result<SweepResult> {
    let up: Vec<(f64, f64)> = rows.iter().map(|r| (r.sigma * r.sigma, r.eps_u * r.eps_u)).collect();
    let lo: Vec<(f64, f64)> = rows.iter().map(|r| (r.sigma * r.sigma, r.eps_l * r.eps_l)).collect();
    let fu = fit_exponent(&up)?;
    let fl = fit_exponent(&lo)?;
    Ok(SweepResult {
        kind,
        rows,
        fitted_exponent: fu.slope,
        fit_stderr: fu.stderr,
        lower_exponent: fl.slope,
        lower_stderr: fl.stderr,
        failures,
        upper_fit: Some(fu),
        ellipse: e.clone(),
    })
}

/// Solves `eps_u` and `eps_l` at every noise level and fits the slopes of
/// their squares against `sigma^2`. Failed rows are skipped and recorded.
pub fn sigma_sweep(
    e: &EllipseSpec,
    theta_star: &[f64],
    sigma_grid: &[f64],
    rho: f64,
    consts: &LowerBoundConstants,
) -> Result<SweepResult> {
    let grid = check_grid(sigma_grid)?;
    let solved: Vec<std::result::Result<SweepRow, (f64, String)>> = grid
        .par_iter()
        .map(|&sigma| {
            let row = || -> Result<SweepRow> {
                let p = TestProblem::new(e.clone(), theta_star.to_vec(), sigma, rho)?;
                let u = solve_eps_upper(&p)?;
                let l = solve_eps_lower(&p, consts)?;
                Ok(SweepRow {
                    sigma,
                    eps_u: u.eps,
                    eps_l: l.eps,
                    k_u: u.k,
                    k_l: l.k,
                })
            };
            row().map_err(|err| (sigma, err.to_string()))
        })
        .collect();
    let (rows, failures) = split(solved);
    finish(SweepKind::Critical, rows, failures, e)
}

/// `t*_u`, `t*_l` over a noise grid for `theta*` on axis `s`.
pub fn t_star_sweep(e: &EllipseSpec, s: usize, sigma_grid: &[f64], rho: f64) -> Result<SweepResult> {
    let grid = check_grid(sigma_grid)?;
    let solved: Vec<_> = grid
        .par_iter()
        .map(|&sigma| {
            t_star(e, s, sigma, rho)
                .map(|t| SweepRow {
                    sigma,
                    eps_u: t.t_u,
                    eps_l: t.t_l,
                    k_u: t.m_u,
                    k_l: t.m_l,
                })
                .map_err(|err| (sigma, err.to_string()))
        })
        .collect();
    let (rows, failures) = split(solved);
    finish(SweepKind::Extremal { s }, rows, failures, e)
}

fn split(solved: Vec<std::result::Result<SweepRow, (f64, String)>>) -> (Vec<SweepRow>, Vec<(f64, String)>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in solved {
        match r {
            Ok(row) => rows.push(row),
            Err(f) => failures.push(f),
        }
    }
    (rows, failures)
}

/// Log-spaced grid of `n` points from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl SweepResult {
    /// CSV with columns `sigma,sigma_sq,eps_u,eps_u_sq,eps_l,k_u,k_l,residual`,
    /// where `residual` is the row's deviation from the fitted upper line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["sigma", "sigma_sq", "eps_u", "eps_u_sq", "eps_l", "k_u", "k_l", "residual"])?;
        for r in &self.rows {
            let s2 = r.sigma * r.sigma;
            let e2 = r.eps_u * r.eps_u;
            let res = self.upper_fit.map_or(f64::NAN, |f| f.residual(s2, e2));
            wtr.write_record([
                format!("{:.16e}", r.sigma),
                format!("{s2:.16e}"),
                format!("{:.16e}", r.eps_u),
                format!("{e2:.16e}"),
                format!("{:.16e}", r.eps_l),
                r.k_u.to_string(),
                r.k_l.to_string(),
                format!("{res:.16e}"),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}
