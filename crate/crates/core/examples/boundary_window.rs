//! Testing near the boundary: the extremal radii t*_u, t*_l and the
//! widths that drive them.
//!
//! cargo run --release --example boundary_window

use ellipse_minimax::critical::solve_eps_upper;
use ellipse_minimax::ellipse::generate_poly;
use ellipse_minimax::rates::{m_extremal, t_star};
use ellipse_minimax::widths::width_upper_extremal;
use ellipse_minimax::{Result, TestProblem};

fn main() -> Result<()> {
    let d = 50_000;
    let e = generate_poly(d, 1.0, 1.0)?;
    let (sigma, rho) = (0.003, 0.25);
    for s in [1, 2, 4] {
        let t = t_star(&e, s, sigma, rho)?;
        let top = e.mu_at(s).sqrt();
        println!(
            "s = {s}: t*_u = {:.5e} (m_u = {}), t*_l = {:.5e} (m_l = {}); window [{:.5}, {:.5}]",
            t.t_u,
            t.m_u,
            t.t_l,
            t.m_l,
            top - t.t_u,
            top - t.t_l
        );
        if let Some(pc) = t.poly {
            println!("       closed forms {:.5e} / {:.5e}", pc.closed_u, pc.closed_l);
        }
        // inside the window the two-coordinate width stays below delta / sqrt 2
        for delta_mult in [1.0, 2.0] {
            let delta = delta_mult * t.t_u;
            let (m, _) = m_extremal(&e, delta, s)?;
            let w = width_upper_extremal(&e, top - t.t_u, s, delta, m)?;
            println!("       delta = {delta:.4e}, m = {m}: width^2 / delta^2 = {:.4}", (w.width / delta).powi(2));
        }
        let mut theta = vec![0.0; d];
        theta[s - 1] = top - 0.5 * t.t_u;
        let p = TestProblem::new(e.clone(), theta, sigma, rho)?;
        println!("       eps_u at the window midpoint = {:.5e}", solve_eps_upper(&p)?.eps);
    }
    Ok(())
}
