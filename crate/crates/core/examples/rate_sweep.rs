//! Fitted sigma^2 exponents of the critical radii against the closed-form
//! rates.
//!
//! cargo run --release --example rate_sweep

use ellipse_minimax::ellipse::{generate_exp, generate_poly};
use ellipse_minimax::rates::{closed_form_rates, RateFamily};
use ellipse_minimax::sim::{log_grid, sigma_sweep, t_star_sweep};
use ellipse_minimax::{LowerBoundConstants, Result};

fn main() -> Result<()> {
    let consts = LowerBoundConstants::default();
    let sigmas: Vec<f64> = log_grid(1e-6, 1e-3, 10).iter().map(|v| v.sqrt()).collect();

    for alpha in [0.75, 1.0, 2.0] {
        let e = generate_poly(100_000, alpha, 1.0)?;
        let r = sigma_sweep(&e, &vec![0.0; 100_000], &sigmas, 0.25, &consts)?;
        let pred = closed_form_rates(RateFamily::PolyZero { alpha }, sigmas[0])?.exponent;
        println!(
            "poly alpha = {alpha}: upper slope {:.4} +- {:.4}, lower slope {:.4}, predicted {pred:.4}",
            r.fitted_exponent, r.fit_stderr, r.lower_exponent
        );
        let t = t_star_sweep(&e, 1, &sigmas, 0.25)?;
        let pred = closed_form_rates(RateFamily::PolyExtremal { alpha, s: 1.0 }, sigmas[0])?.exponent;
        println!("  near the boundary: slope {:.4} +- {:.4}, predicted {pred:.4}", t.fitted_exponent, t.fit_stderr);
    }

    let e = generate_exp(200, 1.0, 1.0, 1.0)?;
    let wide: Vec<f64> = log_grid(1e-6, 1e-2, 9).iter().map(|v| v.sqrt()).collect();
    let r = sigma_sweep(&e, &vec![0.0; 200], &wide, 0.25, &consts)?;
    println!("exp gamma = 1: eps_u^2 / (sigma^2 sqrt(log 1/sigma^2))");
    for row in &r.rows {
        let v = row.sigma * row.sigma;
        println!("  sigma^2 = {v:.1e}: {:.3}", row.eps_u * row.eps_u / (v * (1.0 / v).ln().sqrt()));
    }
    r.write_csv(std::io::stdout().lock())?;
    Ok(())
}
