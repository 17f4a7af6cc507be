//! Kolmogorov widths of a shifted ellipse intersected with a ball: analytic
//! brackets against the brute-force oracle.
//!
//! cargo run --release --example widths

use ellipse_minimax::ellipse::generate_poly;
use ellipse_minimax::widths::{brute_force_width, width_generic_bounds, width_lower, width_upper, SearchOptions};
use ellipse_minimax::Result;

fn main() -> Result<()> {
    let e = generate_poly(8, 1.0, 1.0)?;
    let opts = SearchOptions::default();
    let eps = 0.3;
    for (label, theta) in [
        ("origin", vec![0.0; 8]),
        ("axis 1", vec![0.4, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]),
        ("general", vec![0.2, -0.1, 0.05, 0.0, 0.02, 0.0, 0.0, 0.0]),
    ] {
        println!("theta* at {label}, eps = {eps}");
        println!("{:>3} {:>10} {:>10} {:>10} {:>10}  method", "k", "lower", "upper", "brute", "gap");
        for k in 0..=8 {
            let b = width_generic_bounds(&e, &theta, eps, k, &opts)?;
            let brute = brute_force_width(&e, &theta, eps, k, &opts)?;
            println!(
                "{k:>3} {:>10.6} {:>10.6} {:>10.6} {:>10.2e}  {}",
                b.lower,
                b.upper,
                brute,
                b.gap,
                b.method.as_str()
            );
        }
        println!(
            "sandwich at k = 2: {:.4} <= omega <= {:.4}\n",
            width_lower(&e, &theta, eps, 2)?,
            width_upper(&e, &theta, eps, 2)?
        );
    }
    Ok(())
}
