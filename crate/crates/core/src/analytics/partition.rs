use crate::numerics::integrate;

use super::hitting::{log_cosh_power_integral, total_hit_mass};
use super::{check_kappa, AnalyticsError};

const TOL: f64 = 1e-13;

/// `κ ∂_x ln Z^dip_H(x, a, b) = (κ/2 − 3)(1/(x − a) + 1/(x − b))`.
pub fn log_partition_drift(x: f64, a: f64, b: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    if x == a || x == b {
        return Err(AnalyticsError::Singular(format!("x = {x} sits on a marked point")));
    }
    Ok((0.5 * kappa - 3.0) * (1.0 / (x - a) + 1.0 / (x - b)))
}

/// `ln Z^dip_H(x, a, b)` with
/// `Z = |b−a|^{(κ−6)²/(8κ)} |x−a|^{(κ−6)/(2κ)} |x−b|^{(κ−6)/(2κ)}`.
pub fn log_partition_dipolar_unnormalized(x: f64, a: f64, b: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    check_kappa(kappa)?;
    if x == a || x == b || a == b {
        return Err(AnalyticsError::Singular(format!("coincident points ({x}, {a}, {b})")));
    }
    let e = (kappa - 6.0) / (2.0 * kappa);
    Ok((kappa - 6.0).powi(2) / (8.0 * kappa) * (b - a).abs().ln()
        + e * ((x - a).abs().ln() + (x - b).abs().ln()))
}

/// `Φ′(x)` for `Φ(z) = ln((z − a)/(b − z))`, which sends `a` to `−∞` and `b` to `+∞`.
pub fn interval_strip_map_derivative(x: f64, a: f64, b: f64) -> f64 {
    (b - a) / ((x - a) * (b - x))
}

/// `ln Z(V, A, B)` for `Z = ∫_{A−V}^{B−V} cosh^{−4/κ}(x/2) dx`.
pub fn log_conditioning_partition(v: f64, a: f64, b: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    check_kappa(kappa)?;
    if !(a < b) {
        return Err(AnalyticsError::Domain(format!("need A < B, got ({a}, {b})")));
    }
    Ok(log_cosh_power_integral(a - v, b - v, 4.0 / kappa))
}

/// `Z(V, A, B) = ∫_{A−V}^{B−V} cosh^{−4/κ}(x/2) dx`.
///
/// ```
/// use sle_lab::analytics::conditioning_partition;
/// let z = conditioning_partition(0.0, -1.0, 1.0, 2.0).unwrap();
/// assert!((z - 4.0 * 0.5f64.tanh()).abs() < 1e-12);
/// ```
pub fn conditioning_partition(v: f64, a: f64, b: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    Ok(log_conditioning_partition(v, a, b, kappa)?.exp())
}

/// `|x|^{−4/κ}(x² − 1)^{−1+2/κ}`, the dipolar hitting density on `[−1,1]^c`
/// up to normalization.
pub fn halfplane_hitting_density_unnormalized(x: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    check_kappa(kappa)?;
    if !(x.abs() > 1.0) {
        return Err(AnalyticsError::Domain(format!("|x| = {} must exceed 1", x.abs())));
    }
    let p = 2.0 / kappa;
    Ok((-2.0 * p * x.abs().ln() + (p - 1.0) * ((x - 1.0) * (x + 1.0)).ln()).exp())
}

/// The hitting density on `[−1,1]^c`, normalized to total mass 1.
/// Its mass equals half the strip mass `∫_ℝ cosh^{−4/κ}(a/2) da`.
pub fn halfplane_hitting_density(x: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    let p = halfplane_hitting_density_unnormalized(x, kappa)?;
    Ok(2.0 * p / total_hit_mass(kappa)?)
}

/// `X = PQ(z + 1)/(Pz + Q)`, sending `z = 0` to `P` and `z → ∞` to `Q`.
pub fn substitution_x(z: f64, p: f64, q: f64) -> f64 {
    if z.is_infinite() {
        return q;
    }
    p * q * (z + 1.0) / (p * z + q)
}

fn check_identity_args(p: f64, q: f64, kappa: f64) -> Result<(), AnalyticsError> {
    if !(p < 0.0 && q > 0.0) {
        return Err(AnalyticsError::Domain(format!("need P < 0 < Q, got ({p}, {q})")));
    }
    if !(kappa > 4.0 / 3.0 && kappa < 8.0) {
        return Err(AnalyticsError::Domain(format!("kappa = {kappa} outside (4/3, 8)")));
    }
    Ok(())
}

/// Ratio of `∫_{[P,Q]^c} |X|^{−4/κ} [|X−P||Q−X|]^{(2−κ)/κ} dX` to
/// `|P|^{−2/κ} Q^{−2/κ} (Q−P)^{−1+4/κ}`.
///
/// Each half line is mapped to `(0, ∞)` by its distance `y` to the
/// endpoint, and `y = t^{κ/2}` removes the algebraic endpoint singularity.
pub fn check_integral_identity(p: f64, q: f64, kappa: f64) -> Result<f64, AnalyticsError> {
    check_identity_args(p, q, kappa)?;
    let e = (2.0 - kappa) / kappa;
    let m = 0.5 * kappa;
    let width = q - p;
    // with y = t^m, y^e dy = m t^{m−1+e m} dt = m dt
    let half = |near: f64| {
        move |t: f64| {
            let y = t.powf(m);
            m * (near + y).powf(-4.0 / kappa) * (width + y).powf(e)
        }
    };
    let right = integrate(half(q), 0.0, f64::INFINITY, TOL)?;
    let left = integrate(half(-p), 0.0, f64::INFINITY, TOL)?;
    let shape = (-p).powf(-2.0 / kappa) * q.powf(-2.0 / kappa) * width.powf(-1.0 + 4.0 / kappa);
    Ok((left + right) / shape)
}

/// The constant of the identity, `∫_0^∞ z^{(2−κ)/κ}(1 + z)^{−4/κ} dz`,
/// obtained by quadrature after the substitution.
pub fn integral_identity_constant(kappa: f64) -> Result<f64, AnalyticsError> {
    check_identity_args(-1.0, 1.0, kappa)?;
    let e = (2.0 - kappa) / kappa;
    let lower = integrate(|z: f64| z.powf(e) * (1.0 + z).powf(-4.0 / kappa), 0.0, 1.0, TOL)?;
    // z = 1/w on (1, ∞)
    let upper = integrate(|w: f64| w.powf(-e - 2.0 + 4.0 / kappa) * (1.0 + w).powf(-4.0 / kappa), 0.0, 1.0, TOL)?;
    Ok(lower + upper)
}
