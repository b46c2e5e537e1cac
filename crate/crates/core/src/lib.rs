pub mod analytics;
pub mod conformal;
pub mod drivers;
pub mod experiments;
pub mod loewner;
pub mod numerics;

pub use num_complex::Complex64;

/// A point of the upper half-plane or of the strip `0 < Im z < π`.
pub type ComplexPoint = Complex64;

/// The book chapters, compiled as doctests.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/loewner.md")]
    pub struct Loewner;
    #[doc = include_str!("../../../book/src/drivers.md")]
    pub struct Drivers;
    #[doc = include_str!("../../../book/src/analytics.md")]
    pub struct Analytics;
    #[doc = include_str!("../../../book/src/experiments.md")]
    pub struct Experiments;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct Cli;
    #[doc = include_str!("../../../book/src/limits.md")]
    pub struct Limits;
}
