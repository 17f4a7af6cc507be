//! Chi-square certificates that no test can separate below a radius.
//!
//! cargo run --release --example lower_bound_certificate

use ellipse_minimax::critical::{k_bernstein, solve_eps_lower};
use ellipse_minimax::ellipse::generate_poly;
use ellipse_minimax::lower_bounds::{chi2_bound_empirical, chi2_bound_hypercube, hypercube_prior, theta_dagger, Certificate};
use ellipse_minimax::widths::BernsteinNorm;
use ellipse_minimax::{LowerBoundConstants, Result, TestProblem};

fn main() -> Result<()> {
    let e = generate_poly(400, 1.0, 1.0)?;
    let sigma = 0.02;
    let p = TestProblem::at_zero(e.clone(), sigma, 0.25)?;
    let consts = LowerBoundConstants::default();
    let eps = solve_eps_lower(&p, &consts)?.eps;
    let k = k_bernstein(&e, &p.theta_star, eps, BernsteinNorm::Linf)?;
    println!("eps_l = {eps:.5}, hypercube on {k} coordinates");

    let prior = hypercube_prior(&e, &p.theta_star, eps, k)?;
    println!("2^{k} vertices, separation {:.5}, inside the ellipse: {}", prior.separation, prior.membership_ok);
    let closed = chi2_bound_hypercube(eps, sigma, k)?;
    println!("closed form: error >= {:.4} (ln E[...] = {:.3e})", closed.bound, closed.log_value);
    let emp = chi2_bound_empirical(&prior, sigma, 20_000, 11)?;
    println!("from {} prior pairs: error >= {:.4} +- {:.1e}", emp.pairs, emp.bound, emp.stderr);

    // moving theta* toward the center keeps a ball of radius a*eps inside the ellipse
    let mut theta = vec![0.0; 400];
    theta[0] = 0.98;
    let dagger = theta_dagger(&e, &theta, consts.a(), 0.05)?;
    println!("theta-dagger: shrink factor {:.4}, distance {:.4}", dagger.r, dagger.distance);

    Certificate::hypercube(eps, sigma, k)?.write_json(std::io::stdout().lock())?;
    println!();
    Ok(())
}
