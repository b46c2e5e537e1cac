//! Quadrature, reproducible random streams and interval statistics.

mod quadrature;
mod rng;
mod stats;

pub use quadrature::{
    adaptive_simpson, exp_sinh, gauss_legendre_panels, integrate, sinh_sinh, tanh_sinh,
    DEFAULT_TOL, MAX_DEPTH,
};
pub use rng::{derive_stream, RngStream};
pub use stats::{
    bonferroni_threshold, chi_square_sf, normal_quantile, two_sided_p, wilson_interval,
    ConfidenceInterval, FAMILYWISE_SIGMA,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("quadrature did not converge on ({a}, {b}) within depth {depth}")]
    NonConvergence { a: f64, b: f64, depth: u32 },
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("invalid integration request on ({a}, {b})")]
    InvalidBounds { a: f64, b: f64 },
    #[error("binomial interval needs n >= 1 and hits <= n (got {hits} of {n})")]
    InvalidCount { hits: u64, n: u64 },
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidConfidence(f64),
}
