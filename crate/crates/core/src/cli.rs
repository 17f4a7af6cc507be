//! Subcommands `solve`, `mc`, `sweep` and `widths`.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, LoadedEllipse, RunConfig, ThetaSpec};
use crate::critical::{
    k_bernstein, k_lower, solve_eps_bernstein, solve_eps_lower, solve_eps_upper, theorem2_radius, LowerBoundConstants,
};
use crate::ellipse::{theta_shape, EllipseSpec, Family, TestProblem, ThetaShape};
use crate::error::{Error, Result};
use crate::lower_bounds::{chi2_bound_hypercube, hypercube_prior};
use crate::lpt::build_test_at;
use crate::rates::t_star;
use crate::sim::{estimate_errors, log_grid, noncentrality, sigma_sweep, t_star_sweep, worst_case_alternative, SweepResult, DEFAULT_TRIALS};
use crate::widths::{brute_force_width, width_generic_bounds, BernsteinNorm, SearchOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ellipse-minimax", version, about = "Minimax testing radii over ellipses")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical radii and dimensions for one instance.
    Solve(CommonArgs),
    /// Monte Carlo errors of the projection test at the worst alternative.
    Mc {
        #[command(flatten)]
        common: CommonArgs,
        /// Also report the hypercube chi-square lower-bound certificate.
        #[arg(long)]
        certificate: bool,
    },
    /// Radii over a log-spaced noise grid with fitted exponents.
    Sweep(CommonArgs),
    /// Width brackets over a range of projection dimensions.
    Widths {
        #[command(flatten)]
        common: CommonArgs,
        /// Add the brute-force oracle column (small d only).
        #[arg(long)]
        brute: bool,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    /// Radius override.
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub sweep_lo: Option<f64>,
    #[arg(long)]
    pub sweep_hi: Option<f64>,
    #[arg(long)]
    pub sweep_points: Option<usize>,
}

/// Config merged with command-line overrides.
pub struct Run {
    cfg: RunConfig,
    loaded: LoadedEllipse,
    theta: Vec<f64>,
    out: Option<PathBuf>,
    format: Option<Format>,
    seed: u64,
    trials: usize,
    eps: Option<f64>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Run {
    pub fn new(a: &CommonArgs) -> Result<Self> {
        let mut cfg = RunConfig::load(&a.config)?;
        if let Some(v) = a.sweep_lo {
            cfg.sweep.lo = Some(v);
        }
        if let Some(v) = a.sweep_hi {
            cfg.sweep.hi = Some(v);
        }
        if let Some(v) = a.sweep_points {
            cfg.sweep.points = Some(v);
        }
        let trials = a.trials.or(cfg.trials).unwrap_or(DEFAULT_TRIALS);
        if trials == 0 {
            return Err(config_err("trials must be at least 1"));
        }
        let eps = a.eps.or(cfg.eps);
        if let Some(e) = eps {
            if !(e > 0.0 && e.is_finite()) {
                return Err(config_err(format!("eps = {e} must be positive")));
            }
        }
        let loaded = cfg.ellipse()?;
        let theta = cfg.theta(&loaded.ellipse)?;
        Ok(Self {
            out: a.out.clone().or_else(|| cfg.out.as_ref().map(|p| cfg.base.join(p))),
            format: a.format.or(cfg.format),
            seed: a.seed.unwrap_or(cfg.seed),
            trials,
            eps,
            loaded,
            theta,
            cfg,
        })
    }

    fn e(&self) -> &EllipseSpec {
        &self.loaded.ellipse
    }

    /// Sequence-model noise level.
    fn sigma(&self) -> Result<f64> {
        Ok(self.cfg.sigma()? * self.loaded.sigma_scale)
    }

    fn problem(&self) -> Result<TestProblem> {
        TestProblem::new(self.e().clone(), self.theta.clone(), self.sigma()?, self.cfg.rho)
            .map_err(|e| config_err(format!("problem: {e}")))
    }

    fn sink(&self) -> Result<Box<dyn Write>> {
        Ok(match &self.out {
            Some(p) => Box::new(BufWriter::new(File::create(p)?)),
            None => Box::new(std::io::stdout().lock()),
        })
    }
}

fn write_json<T: Serialize>(mut w: impl Write, v: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_kv_csv(w: impl Write, v: &Value) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["key", "value"])?;
    if let Value::Object(m) = v {
        for (k, val) in m {
            let s = match val {
                Value::Number(n) => n.as_f64().map_or(n.to_string(), |f| {
                    if n.is_f64() { format!("{f:.16e}") } else { n.to_string() }
                }),
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            wtr.write_record([k.as_str(), s.as_str()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

fn emit(run: &Run, default: Format, v: &Value) -> Result<()> {
    let w = run.sink()?;
    match run.format.unwrap_or(default) {
        Format::Json => write_json(w, v),
        Format::Csv => write_kv_csv(w, v),
    }
}

/// `solve`: `eps_u, k_u, eps_l, k_l`, the Theorem-2 radius, `eps_B`, and the
/// boundary pair `t*` when `theta*` sits on a single axis.
pub fn cmd_solve(run: &Run) -> Result<()> {
    let p = run.problem()?;
    let consts = LowerBoundConstants::default();
    let u = solve_eps_upper(&p)?;
    let l = solve_eps_lower(&p, &consts)?;
    let mut out = json!({
        "d": p.dim(),
        "sigma": p.sigma,
        "rho": p.rho,
        "eps_u": u.eps,
        "eps_u_sq": u.eps * u.eps,
        "k_u": u.k,
        "eps_l": l.eps,
        "eps_l_sq": l.eps * l.eps,
        "k_l": l.k,
    });
    let mut notes = Vec::new();
    match theorem2_radius(&p, &consts) {
        Ok(r) => out["theorem2_radius"] = json!(r),
        Err(e) => notes.push(format!("theorem2_radius: {e}")),
    }
    match solve_eps_bernstein(&p) {
        Ok(b) => {
            out["eps_b"] = json!(b.eps);
            out["k_b"] = json!(b.k);
        }
        Err(e) => notes.push(format!("eps_b: {e}")),
    }
    let axis = match (theta_shape(&p.theta_star), run.cfg.theta_spec()) {
        (_, ThetaSpec::BoundaryOffset { s, .. }) => Some(s),
        (ThetaShape::Axis { s, .. }, _) => Some(s),
        _ => None,
    };
    if let Some(s) = axis {
        match t_star(&p.ellipse, s, p.sigma, p.rho) {
            Ok(t) => out["t_star"] = serde_json::to_value(t)?,
            Err(e) => notes.push(format!("t_star: {e}")),
        }
    }
    if !notes.is_empty() {
        out["notes"] = json!(notes);
    }
    emit(run, Format::Json, &out)
}

/// `mc`: builds the test at `eps` (default `eps_u`), places the constructed
/// worst-case alternative, and reports Monte Carlo error rates.
pub fn cmd_mc(run: &Run, certificate: bool) -> Result<()> {
    let p = run.problem()?;
    let eps = match run.eps {
        Some(e) => e,
        None => solve_eps_upper(&p)?.eps,
    };
    let test = build_test_at(&p, eps)?;
    let alt = worst_case_alternative(&p.ellipse, &p.theta_star, eps, &test.coords)?;
    let est = estimate_errors(&test, &alt, run.trials, run.seed)?;
    let mut out = json!({
        "eps": eps,
        "k": test.k,
        "threshold": test.threshold,
        "c0": noncentrality(&test, &alt),
        "c0_floor": 0.5 * eps * eps,
        "total": est.total(),
        "estimate": est,
    });
    if certificate {
        let k = k_bernstein(&p.ellipse, &p.theta_star, eps, BernsteinNorm::Linf)
            .ok()
            .filter(|&k| k > 0)
            .map_or_else(|| k_lower(&p.ellipse, &p.theta_star, eps, &LowerBoundConstants::default()), Ok)?;
        let bound = chi2_bound_hypercube(eps, p.sigma, k)?;
        let membership = hypercube_prior(&p.ellipse, &p.theta_star, eps, k)
            .map(|s| s.membership_ok)
            .unwrap_or(false);
        out["certificate"] = json!({
            "k": k,
            "bound": bound.bound,
            "log_value": bound.log_value,
            "prior_in_ellipse": membership,
            "diagnostic": bound.diagnostic,
        });
    }
    emit(run, Format::Json, &out)
}

fn predicted_exponent(e: &EllipseSpec, extremal: bool) -> Option<f64> {
    match e.family() {
        Family::Poly { alpha, .. } if extremal => Some(8.0 * alpha / (8.0 * alpha + 1.0)),
        Family::Poly { alpha, .. } => Some(4.0 * alpha / (4.0 * alpha + 1.0)),
        Family::Exp { .. } if !extremal => Some(1.0),
        _ => None,
    }
}

fn sweep_grid(run: &Run) -> Result<Vec<f64>> {
    let scale = run.loaded.sigma_scale;
    let grid = match (&run.cfg.sigma_grid, run.cfg.sweep.lo, run.cfg.sweep.hi) {
        (_, Some(lo), Some(hi)) => {
            let n = run.cfg.sweep.points.unwrap_or(10);
            if !(lo > 0.0 && hi > lo) {
                return Err(config_err(format!("sweep range [{lo}, {hi}] is not increasing and positive")));
            }
            log_grid(lo, hi, n)
        }
        (Some(g), _, _) => g.clone(),
        _ => return Err(config_err("sweep needs `sigma_grid` or a sweep range")),
    };
    if grid.len() < 8 {
        return Err(config_err(format!("sigma grid has {} points, need at least 8", grid.len())));
    }
    let (lo, hi) = grid
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    // the fit runs on sigma^2
    if (hi / lo).powi(2) < 10.0 {
        return Err(config_err("sigma^2 grid spans less than one decade"));
    }
    Ok(grid.into_iter().map(|s| s * scale).collect())
}

/// `sweep`: CSV of radii per noise level plus a JSON summary with the fitted
/// and predicted exponents. With `--format csv` and `--out`, the summary goes
/// to `<out>.json`.
pub fn cmd_sweep(run: &Run) -> Result<()> {
    let grid = sweep_grid(run)?;
    let extremal = run.cfg.sweep.extremal_s;
    let r: SweepResult = match extremal {
        Some(s) => t_star_sweep(run.e(), s, &grid, run.cfg.rho)?,
        None => sigma_sweep(run.e(), &run.theta, &grid, run.cfg.rho, &LowerBoundConstants::default())?,
    };
    let summary = json!({
        "kind": r.kind,
        "points": r.rows.len(),
        "fitted_exponent": r.fitted_exponent,
        "fit_stderr": r.fit_stderr,
        "lower_exponent": r.lower_exponent,
        "lower_stderr": r.lower_stderr,
        "predicted_exponent": predicted_exponent(run.e(), extremal.is_some()),
        "failures": r.failures,
    });
    match run.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            r.write_csv(run.sink()?)?;
            if let Some(out) = &run.out {
                write_json(BufWriter::new(File::create(summary_path(out))?), &summary)?;
            }
            Ok(())
        }
        Format::Json => {
            let mut full = summary;
            full["rows"] = serde_json::to_value(&r.rows)?;
            write_json(run.sink()?, &full)
        }
    }
}

pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// `widths`: `(k, lower, upper, method)` rows at one radius.
pub fn cmd_widths(run: &Run, brute: bool) -> Result<()> {
    let e = run.e();
    let d = e.dim();
    let eps = run
        .eps
        .or(run.cfg.widths.eps)
        .ok_or_else(|| config_err("widths needs `eps` (config [widths] or --eps)"))?;
    let k_lo = run.cfg.widths.k_lo.unwrap_or(0);
    let k_hi = run.cfg.widths.k_hi.unwrap_or(d).min(d);
    if k_lo > k_hi {
        return Err(config_err(format!("empty k range {k_lo}..={k_hi}")));
    }
    let brute = brute || run.cfg.widths.brute;
    let opts = SearchOptions {
        seed: run.seed,
        ..SearchOptions::default()
    };
    let mut rows = Vec::new();
    for k in k_lo..=k_hi {
        let b = width_generic_bounds(e, &run.theta, eps, k, &opts)?;
        let oracle = if brute {
            Some(brute_force_width(e, &run.theta, eps, k, &opts)?)
        } else {
            None
        };
        rows.push((b, oracle));
    }
    let w = run.sink()?;
    match run.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(w);
            let mut header = vec!["k", "eps", "lower", "upper", "method"];
            if brute {
                header.push("brute");
            }
            wtr.write_record(&header)?;
            for (b, oracle) in &rows {
                let mut rec = vec![
                    b.k.to_string(),
                    format!("{eps:.16e}"),
                    format!("{:.16e}", b.lower),
                    format!("{:.16e}", b.upper),
                    b.method.as_str().to_string(),
                ];
                if let Some(o) = oracle {
                    rec.push(format!("{o:.16e}"));
                }
                wtr.write_record(&rec)?;
            }
            wtr.flush()?;
            Ok(())
        }
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|(b, o)| {
                    let mut r = json!({"k": b.k, "eps": eps, "lower": b.lower, "upper": b.upper, "method": b.method.as_str()});
                    if let Some(o) = o {
                        r["brute"] = json!(o);
                    }
                    r
                })
                .collect();
            write_json(w, &v)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_NUMERIC,
    }
}

fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Solve(a) => cmd_solve(&Run::new(a)?),
        Command::Mc { common, certificate } => cmd_mc(&Run::new(common)?, *certificate),
        Command::Sweep(a) => cmd_sweep(&Run::new(a)?),
        Command::Widths { common, brute } => cmd_widths(&Run::new(common)?, *brute),
    }
}

/// Parses arguments, runs the command, prints errors to stderr, and returns
/// the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
