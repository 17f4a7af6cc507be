//! Minimax testing radii for Gaussian sequence models over ellipses.

pub mod bisect;
pub mod cli;
pub mod config;
pub mod critical;
pub mod ellipse;
pub mod error;
pub mod lower_bounds;
pub mod lpt;
pub mod rates;
pub mod rng;
pub mod sim;
pub mod widths;

pub use critical::{CriticalSolution, LowerBoundConstants, Side};
pub use ellipse::{EllipseSpec, Family, TestProblem};
pub use error::{Error, Result};
