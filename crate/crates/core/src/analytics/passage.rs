use std::f64::consts::PI;

use crate::conformal::theta;
use crate::numerics::integrate;
use crate::ComplexPoint;

use super::AnalyticsError;

/// Probability that chordal SLE₂ in `H` from 0 to ∞ passes to the right of
/// a point of argument `θ`: `θ/π − sin(2θ)/(2π)`.
///
/// ```
/// use sle_lab::analytics::schramm_right_passage;
/// assert_eq!(schramm_right_passage(std::f64::consts::FRAC_PI_2).unwrap(), 0.5);
/// ```
pub fn schramm_right_passage(theta: f64) -> Result<f64, AnalyticsError> {
    if !(0.0..=PI).contains(&theta) {
        return Err(AnalyticsError::Domain(format!("θ = {theta} outside [0, π]")));
    }
    if theta == PI {
        return Ok(1.0);
    }
    Ok(theta / PI - (2.0 * theta).sin() / (2.0 * PI))
}

/// Right-passage probability at `w` for chordal SLE₂ in the strip from 0
/// to `iπ + a`.
pub fn chordal_strip_right_passage(a: f64, w: ComplexPoint) -> Result<f64, AnalyticsError> {
    schramm_right_passage(theta(a, w)?)
}

fn check_strip(w: ComplexPoint) -> Result<(), AnalyticsError> {
    if w.im > 0.0 && w.im < PI && w.re.is_finite() {
        Ok(())
    } else {
        Err(AnalyticsError::Domain(format!("{w} is not in the open strip")))
    }
}

/// Probability `p₂(w)` that dipolar SLE₂ in the strip passes to the right
/// of `w = u + iv`, in closed form.
///
/// ```
/// use sle_lab::analytics::dipolar2_right_passage;
/// use sle_lab::Complex64;
/// let p = dipolar2_right_passage(Complex64::new(0.0, 1.0)).unwrap();
/// assert!((p - 0.5).abs() < 1e-12);
/// ```
pub fn dipolar2_right_passage(w: ComplexPoint) -> Result<f64, AnalyticsError> {
    check_strip(w)?;
    let (u, v) = (w.re, w.im);
    let (s, c) = v.sin_cos();
    let p = u.exp() - c;
    let q = c - (-u).exp();
    // arctan(sin v / x) with values in [0, π] is atan2(sin v, x) for sin v > 0
    let num = p * s.atan2(p) - q * s.atan2(q);
    Ok(num / (2.0 * PI * (u.cosh() - c)))
}

/// `p₂(w)` as the hitting-density average of the chordal right-passage
/// probability, integrated in `τ = tanh(a/2)`, where the weight
/// `da/(4 cosh²(a/2))` becomes `dτ/2`.
pub fn dipolar2_right_passage_integral(w: ComplexPoint) -> Result<f64, AnalyticsError> {
    check_strip(w)?;
    let (u, v) = (w.re, w.im);
    let (sh, ch) = (u.sinh(), u.cosh());
    let (s, c) = v.sin_cos();
    let integrand = |tau: f64| {
        let th = s.atan2(sh - (ch - c) * tau);
        0.5 * (th / PI - (2.0 * th).sin() / (2.0 * PI))
    };
    Ok(integrate(integrand, -1.0, 1.0, 1e-13)?)
}
