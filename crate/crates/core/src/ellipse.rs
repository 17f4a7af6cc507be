//! Ellipse definitions, the ellipse norm, and parameter families.
//!
//! An ellipse is described by a non-increasing positive sequence
//! `mu[0] >= mu[1] >= ... > 0` and is the set of vectors `theta` with
//! `sum_i theta_i^2 / mu_i <= 1`. Public coordinate indices (`s`, `m`, and
//! projection supports) are 1-based to line up with the axis numbering
//! `mu_1, mu_2, ...`; vectors themselves are ordinary 0-based slices.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default slack on the squared ellipse norm used by membership checks.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Relative eigenvalue floor for kernel ingestion.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// How an ellipse's parameters were produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Explicit,
    /// `mu_j = c1 * j^(-2 alpha)`.
    Poly { alpha: f64, c1: f64 },
    /// `mu_j = c1 * exp(-c2 * j^gamma)`.
    Exp { gamma: f64, c1: f64, c2: f64 },
    Kernel,
}

/// A validated ellipse: positive, non-increasing aspect parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseSpec {
    mu: Vec<f64>,
    family: Family,
}

impl EllipseSpec {
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `mu_j` for a 1-based index, with the convention `mu_{d+1} = 0`.
    pub fn mu_at(&self, j: usize) -> f64 {
        assert!(j >= 1, "axis indices are 1-based");
        self.mu.get(j - 1).copied().unwrap_or(0.0)
    }

    /// Largest Euclidean norm attained on the ellipse, `sqrt(mu_1)`.
    pub fn radius(&self) -> f64 {
        self.mu[0].sqrt()
    }

    pub fn norm(&self, theta: &[f64]) -> Result<f64> {
        ellipse_norm(self, theta)
    }

    pub fn contains(&self, theta: &[f64], tol: f64) -> Result<bool> {
        contains(self, theta, tol)
    }

    pub(crate) fn norm_sq_unchecked(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.mu)
            .map(|(t, m)| t * t / m)
            .sum()
    }
}

fn validate(mu: &[f64]) -> Result<()> {
    if mu.is_empty() {
        return Err(Error::InvalidSequence {
            index: 0,
            reason: "sequence is empty".into(),
        });
    }
    for (i, &m) in mu.iter().enumerate() {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::InvalidSequence {
                index: i,
                reason: format!("entry {m} is not a finite positive number"),
            });
        }
        if i > 0 && m > mu[i - 1] {
            return Err(Error::InvalidSequence {
                index: i,
                reason: format!("entry {m} exceeds its predecessor {}", mu[i - 1]),
            });
        }
    }
    Ok(())
}

/// Wraps an explicit parameter sequence.
pub fn make_ellipse(mu: Vec<f64>) -> Result<EllipseSpec> {
    validate(&mu)?;
    Ok(EllipseSpec {
        mu,
        family: Family::Explicit,
    })
}

/// Polynomial decay `mu_j = c1 j^(-2 alpha)`, the Sobolev-type family.
pub fn generate_poly(d: usize, alpha: f64, c1: f64) -> Result<EllipseSpec> {
    if d == 0 {
        return Err(invalid("d", 0.0, "dimension must be positive"));
    }
    if !(alpha > 0.5) || !alpha.is_finite() {
        return Err(invalid("alpha", alpha, "polynomial decay needs alpha > 1/2"));
    }
    if !(c1 > 0.0) || !c1.is_finite() {
        return Err(invalid("c1", c1, "must be positive"));
    }
    let mu = (1..=d)
        .map(|j| c1 * (j as f64).powf(-2.0 * alpha))
        .collect::<Vec<_>>();
    validate(&mu)?;
    Ok(EllipseSpec {
        mu,
        family: Family::Poly { alpha, c1 },
    })
}

/// Exponential decay `mu_j = c1 exp(-c2 j^gamma)`.
pub fn generate_exp(d: usize, gamma: f64, c1: f64, c2: f64) -> Result<EllipseSpec> {
    if d == 0 {
        return Err(invalid("d", 0.0, "dimension must be positive"));
    }
    for (name, v) in [("gamma", gamma), ("c1", c1), ("c2", c2)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid(name, v, "must be positive"));
        }
    }
    let mu = (1..=d)
        .map(|j| c1 * (-c2 * (j as f64).powf(gamma)).exp())
        .collect::<Vec<_>>();
    validate(&mu)?;
    Ok(EllipseSpec {
        mu,
        family: Family::Exp { gamma, c1, c2 },
    })
}

fn check_dim(e: &EllipseSpec, theta: &[f64]) -> Result<()> {
    if theta.len() != e.dim() {
        return Err(Error::DimensionMismatch {
            expected: e.dim(),
            got: theta.len(),
        });
    }
    Ok(())
}

/// `sqrt(sum_i theta_i^2 / mu_i)`.
pub fn ellipse_norm(e: &EllipseSpec, theta: &[f64]) -> Result<f64> {
    check_dim(e, theta)?;
    Ok(e.norm_sq_unchecked(theta).sqrt())
}

/// Membership with slack `tol` on the squared norm.
pub fn contains(e: &EllipseSpec, theta: &[f64], tol: f64) -> Result<bool> {
    check_dim(e, theta)?;
    Ok(e.norm_sq_unchecked(theta) <= 1.0 + tol)
}

/// Result of converting a kernel Gram matrix to sequence-model form.
#[derive(Debug, Clone, Serialize)]
pub struct KernelEllipse {
    pub ellipse: EllipseSpec,
    /// Noise level in the sequence model, `sigma / sqrt(n)`.
    pub effective_sigma: f64,
    /// Number of eigenvalues that fell below the floor and were dropped.
    pub clamped: usize,
}

/// Eigen-decomposes `gram / n` into ellipse parameters.
///
/// Eigenvalues below `1e-12 * lambda_max` are dropped from the tail so the
/// resulting sequence stays strictly positive.
pub fn kernel_to_ellipse(gram: &DMatrix<f64>, sigma: f64) -> Result<KernelEllipse> {
    let n = gram.nrows();
    if n == 0 || gram.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: gram.ncols(),
        });
    }
    if !(sigma > 0.0) {
        return Err(invalid("sigma", sigma, "must be positive"));
    }
    if gram.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("gram matrix has non-finite entries".into()));
    }
    let scale = gram.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        for j in (i + 1)..n {
            if (gram[(i, j)] - gram[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Precondition(format!(
                    "gram matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let scaled = gram / n as f64;
    let sym = (&scaled + scaled.transpose()) * 0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let top = eig[0];
    if !(top > 0.0) {
        return Err(Error::Infeasible(
            "all kernel eigenvalues are below the positivity floor".into(),
        ));
    }
    let floor = EIGEN_FLOOR * top;
    let kept: Vec<f64> = eig.iter().copied().take_while(|&v| v >= floor).collect();
    let clamped = n - kept.len();
    let mut ellipse = make_ellipse(kept)?;
    ellipse.family = Family::Kernel;
    Ok(KernelEllipse {
        ellipse,
        effective_sigma: sigma / (n as f64).sqrt(),
        clamped,
    })
}

/// Gram matrix of `K(x, x') = 1 + min(x, x')` (first-order Sobolev kernel).
pub fn min_kernel_gram(x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.len(), |i, j| 1.0 + x[i].min(x[j]))
}

/// Gram matrix of the Gaussian kernel `exp(-(x - x')^2 / (2 t))`.
pub fn gaussian_kernel_gram(x: &[f64], bandwidth: f64) -> DMatrix<f64> {
    DMatrix::from_fn(x.len(), x.len(), |i, j| {
        let r = x[i] - x[j];
        (-r * r / (2.0 * bandwidth)).exp()
    })
}

/// Equispaced design `x_i = i / n`, `i = 1..n`.
pub fn uniform_design(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / n as f64).collect()
}

/// Reads an `n x n` matrix from a header-less CSV file.
pub fn read_gram_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Config(format!("bad gram entry `{f}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(Error::Config("gram CSV is empty".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// Where `theta_star` sits, as far as the closed-form width routes care.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaShape {
    Zero,
    /// Supported on the single 1-based coordinate `s`.
    Axis { s: usize, value: f64 },
    General,
}

pub fn theta_shape(theta: &[f64]) -> ThetaShape {
    let mut nz = theta.iter().enumerate().filter(|(_, v)| **v != 0.0);
    match (nz.next(), nz.next()) {
        (None, _) => ThetaShape::Zero,
        (Some((i, &v)), None) => ThetaShape::Axis { s: i + 1, value: v },
        _ => ThetaShape::General,
    }
}

/// A fully specified local testing problem.
#[derive(Debug, Clone, Serialize)]
pub struct TestProblem {
    pub ellipse: EllipseSpec,
    pub theta_star: Vec<f64>,
    pub sigma: f64,
    pub rho: f64,
}

impl TestProblem {
    pub fn new(ellipse: EllipseSpec, theta_star: Vec<f64>, sigma: f64, rho: f64) -> Result<Self> {
        check_dim(&ellipse, &theta_star)?;
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(invalid("sigma", sigma, "must be positive"));
        }
        if !(rho > 0.0 && rho <= 0.5) {
            return Err(invalid("rho", rho, "must lie in (0, 1/2]"));
        }
        if !contains(&ellipse, &theta_star, MEMBERSHIP_TOL)? {
            return Err(Error::Precondition(format!(
                "theta_star has ellipse norm {} > 1",
                ellipse_norm(&ellipse, &theta_star)?
            )));
        }
        Ok(Self {
            ellipse,
            theta_star,
            sigma,
            rho,
        })
    }

    /// Testing at the origin.
    pub fn at_zero(ellipse: EllipseSpec, sigma: f64, rho: f64) -> Result<Self> {
        let d = ellipse.dim();
        Self::new(ellipse, vec![0.0; d], sigma, rho)
    }

    pub fn dim(&self) -> usize {
        self.ellipse.dim()
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
