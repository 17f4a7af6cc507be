//! TOML run configuration for the command-line tool.
//!
//! ```toml
//! rho = 0.25
//! sigma = 0.05            # or sigma_grid = [...]
//! seed = 7
//! trials = 20000
//!
//! [ellipse]               # or: ellipse = "other.toml"
//! family = "poly"         # poly | exp | explicit | kernel
//! d = 200
//! alpha = 1.0
//!
//! [theta_star]
//! kind = "zero"           # zero | axis | explicit | boundary_offset
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::ellipse::{
    gaussian_kernel_gram, generate_exp, generate_poly, kernel_to_ellipse, make_ellipse, min_kernel_gram,
    read_gram_csv, uniform_design, EllipseSpec,
};
use crate::error::{Error, Result};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn one() -> f64 {
    1.0
}

/// Ellipse block. Kernel ellipses are built from `gram / n`; their noise level
/// is rescaled by `1 / sqrt(n)` when a problem is assembled.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum EllipseConfig {
    Poly {
        d: usize,
        alpha: f64,
        #[serde(default = "one")]
        c1: f64,
    },
    Exp {
        d: usize,
        gamma: f64,
        #[serde(default = "one")]
        c1: f64,
        #[serde(default = "one")]
        c2: f64,
    },
    Explicit {
        mu: Vec<f64>,
    },
    Kernel {
        /// CSV file with `n` rows of `n` floats, no header.
        gram: Option<PathBuf>,
        /// `min` (`1 + min(x, x')`) or `gaussian`, on a uniform design.
        builtin: Option<String>,
        n: Option<usize>,
        bandwidth: Option<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum EllipseRef {
    File(PathBuf),
    Inline(EllipseConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    Zero,
    /// `value` on axis `s` (1-based).
    Axis { s: usize, value: f64 },
    Explicit { values: Vec<f64> },
    /// `theta*_s = sqrt(mu_s) - w`.
    BoundaryOffset { s: usize, w: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Json,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Smallest sigma.
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub points: Option<usize>,
    /// Extremal sweep via `t*` on this axis instead of the critical radii.
    pub extremal_s: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WidthsConfig {
    pub eps: Option<f64>,
    pub k_lo: Option<usize>,
    pub k_hi: Option<usize>,
    /// Add the brute-force oracle column (small `d` only).
    #[serde(default)]
    pub brute: bool,
}

/// Parsed configuration file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub ellipse: EllipseRef,
    #[serde(default)]
    pub theta_star: Option<ThetaSpec>,
    pub sigma: Option<f64>,
    pub sigma_grid: Option<Vec<f64>>,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default)]
    pub seed: u64,
    pub trials: Option<usize>,
    pub eps: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub widths: WidthsConfig,
    /// Directory of the config file, for relative paths.
    #[serde(skip)]
    pub base: PathBuf,
}

fn default_rho() -> f64 {
    0.25
}

/// An ellipse plus the factor that maps the configured noise level to the
/// sequence-model one (`1 / sqrt(n)` for kernels, 1 otherwise).
#[derive(Debug, Clone)]
pub struct LoadedEllipse {
    pub ellipse: EllipseSpec,
    pub sigma_scale: f64,
}

impl RunConfig {
    pub fn from_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.base = base.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_str(&text, path.parent().unwrap_or(Path::new(".")))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 0.5) {
            return Err(config_err(format!("rho = {} must lie in (0, 1/2]", self.rho)));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(config_err(format!("sigma = {s} must be positive")));
            }
        }
        if let Some(g) = &self.sigma_grid {
            if g.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
                return Err(config_err("sigma_grid entries must be positive"));
            }
        }
        if self.trials == Some(0) {
            return Err(config_err("trials must be at least 1"));
        }
        if let EllipseRef::File(p) = &self.ellipse {
            let p = self.resolve(p);
            if !p.is_file() {
                return Err(config_err(format!("ellipse file {} does not exist", p.display())));
            }
        }
        if let EllipseRef::Inline(EllipseConfig::Kernel { gram: Some(p), .. }) = &self.ellipse {
            let p = self.resolve(p);
            if !p.is_file() {
                return Err(config_err(format!("gram file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// Builds the ellipse.
    pub fn ellipse(&self) -> Result<LoadedEllipse> {
        let (cfg, base) = match &self.ellipse {
            EllipseRef::Inline(c) => (c.clone(), self.base.clone()),
            EllipseRef::File(p) => {
                let p = self.resolve(p);
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| config_err(format!("cannot read {}: {e}", p.display())))?;
                let c: EllipseConfig = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", p.display())))?;
                (c, p.parent().unwrap_or(Path::new(".")).to_path_buf())
            }
        };
        build_ellipse(&cfg, &base)
    }

    pub fn theta_spec(&self) -> ThetaSpec {
        self.theta_star.clone().unwrap_or(ThetaSpec::Zero)
    }

    /// `theta*` as a full vector.
    pub fn theta(&self, e: &EllipseSpec) -> Result<Vec<f64>> {
        theta_vector(&self.theta_spec(), e)
    }

    pub fn sigma(&self) -> Result<f64> {
        self.sigma.ok_or_else(|| config_err("missing field `sigma`"))
    }
}

fn build_ellipse(cfg: &EllipseConfig, base: &Path) -> Result<LoadedEllipse> {
    let plain = |r: Result<EllipseSpec>| {
        r.map(|ellipse| LoadedEllipse {
            ellipse,
            sigma_scale: 1.0,
        })
        .map_err(|e| config_err(format!("ellipse: {e}")))
    };
    match cfg {
        EllipseConfig::Poly { d, alpha, c1 } => plain(generate_poly(*d, *alpha, *c1)),
        EllipseConfig::Exp { d, gamma, c1, c2 } => plain(generate_exp(*d, *gamma, *c1, *c2)),
        EllipseConfig::Explicit { mu } => plain(make_ellipse(mu.clone())),
        EllipseConfig::Kernel {
            gram,
            builtin,
            n,
            bandwidth,
        } => {
            let g = match (gram, builtin.as_deref()) {
                (Some(p), None) => {
                    let p = if p.is_absolute() { p.clone() } else { base.join(p) };
                    read_gram_csv(&p).map_err(|e| config_err(format!("gram {}: {e}", p.display())))?
                }
                (None, Some(kind)) => {
                    let n = n.ok_or_else(|| config_err("kernel builtin needs `n`"))?;
                    let x = uniform_design(n);
                    match kind {
                        "min" => min_kernel_gram(&x),
                        "gaussian" => gaussian_kernel_gram(&x, bandwidth.unwrap_or(0.1)),
                        other => return Err(config_err(format!("unknown kernel builtin `{other}`"))),
                    }
                }
                _ => return Err(config_err("kernel ellipse needs exactly one of `gram` or `builtin`")),
            };
            let k = kernel_to_ellipse(&g, 1.0).map_err(|e| config_err(format!("kernel: {e}")))?;
            Ok(LoadedEllipse {
                ellipse: k.ellipse,
                sigma_scale: k.effective_sigma,
            })
        }
    }
}

/// Expands a `theta*` spec against an ellipse.
pub fn theta_vector(spec: &ThetaSpec, e: &EllipseSpec) -> Result<Vec<f64>> {
    let d = e.dim();
    let axis = |s: usize, v: f64| -> Result<Vec<f64>> {
        if s < 1 || s > d {
            return Err(config_err(format!("theta_star.s = {s} outside 1..={d}")));
        }
        let mut t = vec![0.0; d];
        t[s - 1] = v;
        Ok(t)
    };
    match spec {
        ThetaSpec::Zero => Ok(vec![0.0; d]),
        ThetaSpec::Axis { s, value } => axis(*s, *value),
        ThetaSpec::Explicit { values } => {
            if values.len() != d {
                return Err(config_err(format!(
                    "theta_star.values has {} entries, ellipse has d = {d}",
                    values.len()
                )));
            }
            Ok(values.clone())
        }
        ThetaSpec::BoundaryOffset { s, w } => {
            if !(*w >= 0.0) {
                return Err(config_err(format!("theta_star.w = {w} must be nonnegative")));
            }
            axis(*s, e.mu_at((*s).max(1)).sqrt() - w)
        }
    }
}
