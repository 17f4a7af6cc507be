//! Upper and lower critical radii for a few ellipses.
//!
//! cargo run --example solve_radii

use ellipse_minimax::critical::{matching_ratio, solve_eps_bernstein, solve_eps_lower, solve_eps_upper, theorem2_terms};
use ellipse_minimax::ellipse::{generate_exp, generate_poly, make_ellipse};
use ellipse_minimax::{LowerBoundConstants, Result, TestProblem};

fn main() -> Result<()> {
    let consts = LowerBoundConstants::default();
    let d = 100;
    let cases = [
        ("circle mu_j = d", TestProblem::at_zero(make_ellipse(vec![d as f64; d])?, 0.1, 0.25)?),
        ("poly alpha = 1", TestProblem::at_zero(generate_poly(10_000, 1.0, 1.0)?, 0.01, 0.25)?),
        ("exp gamma = 1", TestProblem::at_zero(generate_exp(200, 1.0, 1.0, 1.0)?, 0.01, 0.25)?),
    ];
    println!("{:<18} {:>12} {:>6} {:>12} {:>6} {:>12} {:>8}", "ellipse", "eps_u^2", "k_u", "eps_l^2", "k_l", "eps_B^2", "ratio");
    for (name, p) in &cases {
        let u = solve_eps_upper(p)?;
        let l = solve_eps_lower(p, &consts)?;
        let b = solve_eps_bernstein(p)?;
        println!(
            "{name:<18} {:>12.5e} {:>6} {:>12.5e} {:>6} {:>12.5e} {:>8.3}",
            u.eps * u.eps,
            u.k,
            l.eps * l.eps,
            l.k,
            b.eps * b.eps,
            matching_ratio(p, &consts)?
        );
    }

    // away from the origin the lower bound also depends on how close theta* is to the boundary
    let e = generate_poly(2000, 1.0, 1.0)?;
    for value in [0.2, 0.6, 0.95] {
        let mut theta = vec![0.0; 2000];
        theta[0] = value;
        let p = TestProblem::new(e.clone(), theta, 0.01, 0.25)?;
        let t = theorem2_terms(&p, &consts)?;
        println!(
            "theta*_1 = {value:<5} eps_u = {:.4e}  eps_l = {:.4e}  phi term = {:.4e}  lower radius = {:.4e}",
            solve_eps_upper(&p)?.eps,
            t.eps_l,
            t.phi_term,
            t.radius
        );
    }
    Ok(())
}
