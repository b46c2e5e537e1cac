//! Explicit conformal maps between the upper half-plane `H` and the strip
//! `S = {0 < Im z < π}`, the strip automorphisms used to change the marked
//! points of a dipolar configuration, and the conformal weights `h_{r,s}`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ComplexPoint;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConformalError {
    #[error("point {0} is the preimage of the strip end iπ + a")]
    Pole(ComplexPoint),
    #[error("degenerate automorphism: A = B = {0}")]
    Degenerate(f64),
    #[error("point {0} lies outside the domain of the map")]
    Domain(ComplexPoint),
    #[error("kappa must be nonzero")]
    ZeroKappa,
}

/// Principal `artanh(ζ) = ½[ln(1+ζ) − ln(1−ζ)]`.
///
/// `1 − ζ` is formed component-wise so that a real `ζ > 1` approached from
/// the upper half-plane keeps its `−0` imaginary part and lands on `+iπ/2`.
pub fn artanh(z: Complex64) -> Complex64 {
    let one_plus = Complex64::new(1.0 + z.re, z.im);
    let one_minus = Complex64::new(1.0 - z.re, -z.im);
    0.5 * (one_plus.ln() - one_minus.ln())
}

/// `ln cosh x`, accurate for all real `x`.
pub fn log_cosh(x: f64) -> f64 {
    let ax = x.abs();
    ax + (-2.0 * ax).exp().ln_1p() - std::f64::consts::LN_2
}

/// Map `F` from `H` onto `S` with `tanh((F(w) − a)/2) + tanh(a/2) = l·w`.
/// It sends `0 ↦ 0`, `∞ ↦ iπ + a`, the interval around `0` to the lower
/// boundary and the rest of the real axis to the upper one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlaneToStripMap {
    pub a: f64,
    pub l: f64,
}

impl HalfPlaneToStripMap {
    /// The map with the free scale `l` fixed to 1.
    pub fn new(a: f64) -> Self {
        Self { a, l: 1.0 }
    }

    pub fn inverse(&self, z: ComplexPoint) -> ComplexPoint {
        (((z - self.a) * 0.5).tanh() + (0.5 * self.a).tanh()) / self.l
    }
}

/// Evaluates `F(w)`.
///
/// ```
/// use sle_lab::conformal::{half_plane_to_strip, HalfPlaneToStripMap};
/// use sle_lab::Complex64;
/// let z = half_plane_to_strip(Complex64::i(), &HalfPlaneToStripMap::new(0.0)).unwrap();
/// assert!((z - Complex64::new(0.0, std::f64::consts::FRAC_PI_2)).norm() < 1e-15);
/// ```
pub fn half_plane_to_strip(
    w: ComplexPoint,
    map: &HalfPlaneToStripMap,
) -> Result<ComplexPoint, ConformalError> {
    if w.im < 0.0 || !w.re.is_finite() || !w.im.is_finite() {
        return Err(ConformalError::Domain(w));
    }
    let zeta = map.l * w - (0.5 * map.a).tanh();
    if zeta.im == 0.0 && zeta.re.abs() == 1.0 {
        return Err(ConformalError::Pole(w));
    }
    Ok(map.a + 2.0 * artanh(zeta))
}

/// `w = tanh(z/2)`: the strip onto `H` with `0 ↦ 0`, `±∞ ↦ ±1`, and the upper
/// boundary point `iπ + x` sent to `coth(x/2)` outside `[−1, 1]`.
pub fn strip_to_dipolar_half_plane(z: ComplexPoint) -> ComplexPoint {
    (0.5 * z).tanh()
}

/// `coth(w/2)` without overflow for large `|Re w|`.
pub fn coth_half(w: Complex64) -> Complex64 {
    let (x, y) = (w.re, w.im);
    if x.abs() > 20.0 {
        // coth(w/2) = ±(1 + 2q + 2q² + …) with q = e^{∓w}
        let q = if x > 0.0 { (-w).exp() } else { w.exp() };
        let s = 1.0 + 2.0 * q / (1.0 - q);
        return if x > 0.0 { s } else { -s };
    }
    let sh = (0.5 * x).sinh();
    let sn = (0.5 * y).sin();
    let denom = 2.0 * (sh * sh + sn * sn);
    Complex64::new(x.sinh() / denom, -y.sin() / denom)
}

/// The strip automorphism `Φ` with
/// `coth((Φ(z) − ξ)/2) = ν + μ coth((z − V)/2)`, sending the upper boundary
/// points `iπ + A` and `iπ + B` to the strip ends `−∞` and `+∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripAutomorphism {
    pub nu: f64,
    pub mu: f64,
    pub xi: f64,
    pub v: f64,
    pub a: f64,
    pub b: f64,
}

/// Builds the automorphism for tip `V` and upper boundary points `A < B`,
/// with the tip image `ξ = V`.
///
/// ```
/// use sle_lab::conformal::strip_automorphism;
/// let phi = strip_automorphism(0.0, -1.5, 1.5).unwrap();
/// assert_eq!(phi.nu, 0.0);
/// ```
pub fn strip_automorphism(v: f64, a: f64, b: f64) -> Result<StripAutomorphism, ConformalError> {
    if a == b || !(a.is_finite() && b.is_finite() && v.is_finite()) {
        return Err(ConformalError::Degenerate(a));
    }
    let ta = (0.5 * (a - v)).tanh();
    let tb = (0.5 * (b - v)).tanh();
    let mu = 2.0 / (tb - ta);
    if !mu.is_finite() {
        return Err(ConformalError::Degenerate(a));
    }
    // ν + μ·tA = −1 and ν + μ·tB = 1; the symmetric combination keeps ν = 0
    // exactly when tA = −tB.
    let nu = -0.5 * mu * (ta + tb);
    Ok(StripAutomorphism {
        nu,
        mu,
        xi: v,
        v,
        a,
        b,
    })
}

impl StripAutomorphism {
    /// `Φ(z)` for `z` in the strip.
    pub fn apply(&self, z: ComplexPoint) -> ComplexPoint {
        let y = self.nu + self.mu * coth_half(z - self.v);
        // 2·arcoth(y) = ln((y + 1)/(y − 1)), taken with imaginary part in (0, 2π)
        let mut l = ((y + 1.0) / (y - 1.0)).ln();
        if l.im < 0.0 {
            l.im += 2.0 * PI;
        }
        self.xi + l
    }

    /// `Φ′(z)`.
    pub fn derivative(&self, z: ComplexPoint) -> ComplexPoint {
        let h = 0.5 * (z - self.v);
        let sh = h.sinh();
        let y = self.nu + self.mu * coth_half(z - self.v);
        -self.mu / (sh * sh * (1.0 - y * y))
    }

    /// `(log Φ′)′` at the tip `z = V`, equal to `−ν/μ`.
    pub fn tip_log_derivative(&self) -> f64 {
        -self.nu / self.mu
    }
}

/// Angle `θ(a, w) ∈ (0, π)` of the image of `w = u + iv` in the half-plane
/// picture where the chord runs from `0` to `∞` and `iπ + a` sits at `∞`.
///
/// ```
/// use sle_lab::conformal::theta;
/// use sle_lab::Complex64;
/// let t = theta(0.0, Complex64::new(0.0, 1.0)).unwrap();
/// assert!((t - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
/// ```
pub fn theta(a: f64, w: ComplexPoint) -> Result<f64, ConformalError> {
    let (u, v) = (w.re, w.im);
    if !(v > 0.0 && v < PI) || !u.is_finite() {
        return Err(ConformalError::Domain(w));
    }
    let den = u.sinh() - (u.cosh() - v.cos()) * (0.5 * a).tanh();
    if den == 0.0 {
        return Ok(FRAC_PI_2);
    }
    Ok(v.sin().atan2(den))
}

/// Conformal weight `h_{r,s} = ((κr − 4s)² − (κ − 4)²)/(16κ)`.
///
/// ```
/// use sle_lab::conformal::weight_h;
/// assert_eq!(weight_h(1.0, 2.0, 2.0).unwrap(), 1.0);
/// ```
pub fn weight_h(r: f64, s: f64, kappa: f64) -> Result<f64, ConformalError> {
    if kappa == 0.0 {
        return Err(ConformalError::ZeroKappa);
    }
    let d = kappa * r - 4.0 * s;
    let e = kappa - 4.0;
    Ok((d * d - e * e) / (16.0 * kappa))
}
