use statrs::function::beta::{beta_reg, ln_beta};

use crate::conformal::log_cosh;
use crate::numerics::{gauss_legendre_panels, integrate};

use super::{check_kappa, AnalyticsError};

const TOL: f64 = 1e-12;
/// Panel width for the Gauss-Legendre rule; the integrand's nearest
/// complex singularities sit at distance π from the real axis.
const PANEL: f64 = 4.0;

/// `cosh^{−4/κ}(x/2)`, the dipolar hitting density on the upper strip
/// boundary up to normalization.
pub fn hit_density_unnormalized(x: f64, kappa: f64) -> f64 {
    (-(4.0 / kappa) * log_cosh(0.5 * x)).exp()
}

/// `∫_ℝ cosh^{−4/κ}(x/2) dx`.
pub fn total_hit_mass(kappa: f64) -> Result<f64, AnalyticsError> {
    check_kappa(kappa)?;
    let half = integrate(|x| hit_density_unnormalized(x, kappa), 0.0, f64::INFINITY, TOL)?;
    Ok(2.0 * half)
}

/// Probability that dipolar SLE_κ in the strip, started at 0, hits the
/// upper boundary to the right of `iπ + a`.
///
/// ```
/// use sle_lab::analytics::hit_right_prob;
/// let f = hit_right_prob(1.0, 2.0).unwrap();
/// assert!((f - (1.0 - 0.5f64.tanh()) / 2.0).abs() < 1e-10);
/// ```
pub fn hit_right_prob(a: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    check_kappa(kappa)?;
    if a.is_nan() {
        return Err(AnalyticsError::Domain("a is NaN".into()));
    }
    if a == f64::INFINITY {
        return Ok(0.0);
    }
    if a == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    let tail = integrate(|x| hit_density_unnormalized(x, kappa), a, f64::INFINITY, TOL)?;
    Ok(tail / total_hit_mass(kappa)?)
}

/// Probability of hitting `]iπ + a, iπ + b[`, as `f(a) − f(b)`.
pub fn hit_interval_prob(a: f64, b: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    if !(a < b) {
        return Err(AnalyticsError::Domain(format!("need a < b, got ({a}, {b})")));
    }
    Ok(hit_right_prob(a, kappa)? - hit_right_prob(b, kappa)?)
}

/// `ln cosh y − ln cosh x`, free of cancellation when `y ≈ x`.
fn log_cosh_diff(x: f64, y: f64) -> f64 {
    if x.abs() == y.abs() {
        return 0.0;
    }
    let d = y - x;
    // for large steps tanh(x)·sinh(d) cancels against cosh(d) − 1
    if d.abs() >= 1.0 {
        return log_cosh(y) - log_cosh(x);
    }
    let sh = (0.5 * d).sinh();
    (2.0 * sh * sh + x.tanh() * d.sinh()).ln_1p()
}

/// `ln ∫_lo^hi cosh^{−p}(x/2) dx` for finite `lo < hi`, evaluated with the
/// integrand rescaled by its maximum on the interval so that nothing
/// underflows far from the origin.
pub fn log_cosh_power_integral(lo: f64, hi: f64, p: f64) -> f64 {
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let peak = 0.0f64.clamp(lo, hi);
    let scale = log_cosh(0.5 * peak);
    // beyond this distance from the peak the rescaled integrand is < e^{−45}
    let reach = 90.0 / p + 4.0;
    let a = lo.max(peak - reach);
    let b = hi.min(peak + reach);
    if b <= a {
        return f64::NEG_INFINITY;
    }
    let panels = ((b - a) / PANEL).ceil().max(1.0) as usize;
    let width = (b - a) / panels as f64;
    let mut edges: Vec<f64> = (0..panels).map(|k| a + width * k as f64).collect();
    edges.push(b);
    let v = gauss_legendre_panels(|x| (-p * (log_cosh(0.5 * x) - scale)).exp(), &edges);
    v.ln() - p * scale
}

/// `∫_lo^hi cosh^{−p}(x/2) dx`.
pub fn cosh_power_integral(lo: f64, hi: f64, p: f64) -> f64 {
    let sign = if lo <= hi { 1.0 } else { -1.0 };
    sign * log_cosh_power_integral(lo, hi, p).exp()
}

/// `F(A, B) = (cosh^{−4/κ}(B/2) − cosh^{−4/κ}(A/2)) / ∫_A^B cosh^{−4/κ}(x/2) dx`,
/// with the limit `−(2/κ) tanh(A/2)` for `|B − A| < 1e−8`.
///
/// ```
/// use sle_lab::analytics::conditioning_drift_f;
/// let f = conditioning_drift_f(0.0, 2.0, 2.0).unwrap();
/// assert!((f + 1f64.tanh() / 2.0).abs() < 1e-12);
/// ```
pub fn conditioning_drift_f(a: f64, b: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    check_kappa(kappa)?;
    if !(a <= b) || !a.is_finite() || !b.is_finite() {
        return Err(AnalyticsError::Domain(format!("need finite A <= B, got ({a}, {b})")));
    }
    if b - a < 1e-8 {
        return Ok(-(2.0 / kappa) * (0.25 * (a + b)).tanh());
    }
    let p = 4.0 / kappa;
    let peak = 0.0f64.clamp(a, b);
    let scale = log_cosh(0.5 * peak);
    // numerator h(B) − h(A) = h(A)·expm1(−p·(ln cosh(B/2) − ln cosh(A/2)))
    let log_ha = -p * (log_cosh(0.5 * a) - scale);
    let num = log_ha.exp() * (-p * log_cosh_diff(0.5 * a, 0.5 * b)).exp_m1();
    // one quadrature panel is cheap; longer intervals go through the incomplete beta
    let beta = if b - a > PANEL { log_cosh_power_integral_beta(a, b, p) } else { None };
    let log_int = beta.unwrap_or_else(|| log_cosh_power_integral(a, b, p));
    Ok(num / (log_int + p * scale).exp())
}

/// `ln ∫_lo^hi cosh^{−p}(x/2) dx` through `t = tanh(x/2)`, `u = (1 + t)/2`:
/// the integral is `2^p B(p/2, p/2) (I_{u(hi)} − I_{u(lo)})`. Tails are taken
/// on the side where `u` is small. `None` when the difference underflows.
fn log_cosh_power_integral_beta(lo: f64, hi: f64, p: f64) -> Option<f64> {
    let alpha = 0.5 * p;
    let reg = |x: f64| {
        let u = 1.0 / (1.0 + (-x).exp());
        beta_reg(alpha, alpha, u)
    };
    let diff = if hi <= 0.0 {
        reg(hi) - reg(lo)
    } else if lo >= 0.0 {
        reg(-lo) - reg(-hi)
    } else {
        1.0 - reg(-hi) - reg(lo)
    };
    (diff > 0.0 && diff.is_finite()).then(|| p * std::f64::consts::LN_2 + ln_beta(alpha, alpha) + diff.ln())
}
