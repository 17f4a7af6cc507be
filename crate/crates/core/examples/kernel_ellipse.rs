//! Regression in a kernel class: the Gram spectrum becomes the ellipse.
//!
//! cargo run --release --example kernel_ellipse

use ellipse_minimax::critical::{solve_eps_lower, solve_eps_upper};
use ellipse_minimax::ellipse::{gaussian_kernel_gram, kernel_to_ellipse, min_kernel_gram, uniform_design};
use ellipse_minimax::{LowerBoundConstants, Result, TestProblem};

fn main() -> Result<()> {
    let noise = 0.5;
    for n in [50, 200, 800] {
        let x = uniform_design(n);
        for (name, gram) in [("sobolev", min_kernel_gram(&x)), ("gaussian", gaussian_kernel_gram(&x, 0.05))] {
            let k = kernel_to_ellipse(&gram, noise)?;
            let p = TestProblem::at_zero(k.ellipse.clone(), k.effective_sigma, 0.25)?;
            let u = solve_eps_upper(&p)?;
            let l = solve_eps_lower(&p, &LowerBoundConstants::default())?;
            println!(
                "n = {n:>4} {name:<8} kept {:>4} eigenvalues ({} dropped), mu_1 = {:.3}, eps_u^2 = {:.4e} (k = {}), eps_l^2 = {:.4e}",
                k.ellipse.dim(),
                k.clamped,
                k.ellipse.mu()[0],
                u.eps * u.eps,
                u.k,
                l.eps * l.eps
            );
        }
    }
    Ok(())
}
