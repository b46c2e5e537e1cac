use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::NumericsError;

/// Familywise significance level, in standard deviations, used by the
/// experiment verdicts.
pub const FAMILYWISE_SIGMA: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_samples: u64,
    pub confidence_level: f64,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Quantile of the standard normal distribution.
pub fn normal_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// Two-sided tail probability of a standard normal score.
pub fn two_sided_p(z: f64) -> f64 {
    2.0 * std_normal().sf(z.abs())
}

/// Upper tail of the χ² distribution with `dof` degrees of freedom.
pub fn chi_square_sf(x: f64, dof: f64) -> f64 {
    ChiSquared::new(dof).expect("positive dof").sf(x)
}

/// Per-test |z| threshold holding the familywise error of a `sigma`-sigma
/// two-sided test across `m` tests.
///
/// ```
/// use sle_lab::numerics::bonferroni_threshold;
/// assert!((bonferroni_threshold(4.0, 1) - 4.0).abs() < 1e-9);
/// assert!(bonferroni_threshold(4.0, 16) > 4.0);
/// ```
pub fn bonferroni_threshold(sigma: f64, m: usize) -> f64 {
    let p = two_sided_p(sigma);
    -normal_quantile(p / (2.0 * m.max(1) as f64))
}

/// Wilson score interval for `hits` successes out of `n` trials.
///
/// ```
/// use sle_lab::numerics::wilson_interval;
/// let ci = wilson_interval(50, 100, 0.95).unwrap();
/// assert!((ci.lower - 0.404).abs() < 1e-3 && (ci.upper - 0.596).abs() < 1e-3);
/// ```
pub fn wilson_interval(hits: u64, n: u64, confidence: f64) -> Result<ConfidenceInterval, NumericsError> {
    if n == 0 || hits > n {
        return Err(NumericsError::InvalidCount { hits, n });
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(NumericsError::InvalidConfidence(confidence));
    }
    let z = normal_quantile(0.5 + 0.5 * confidence);
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2n = z * z / nf;
    let centre = (p + 0.5 * z2n) / (1.0 + z2n);
    let half = z * (p * (1.0 - p) / nf + 0.25 * z2n / nf).sqrt() / (1.0 + z2n);
    let lower = if hits == 0 { 0.0 } else { (centre - half).clamp(0.0, p) };
    let upper = if hits == n { 1.0 } else { (centre + half).clamp(p, 1.0) };
    Ok(ConfidenceInterval {
        estimate: p,
        lower,
        upper,
        n_samples: n,
        confidence_level: confidence,
    })
}
