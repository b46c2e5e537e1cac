//! One-dimensional quadrature.
//!
//! Finite ranges with finite endpoint values go through adaptive Simpson.
//! Infinite ranges and endpoint singularities go through double-exponential
//! rules (tanh-sinh, exp-sinh, sinh-sinh), whose node distributions absorb
//! both exponential tails and integrable algebraic endpoint blow-ups.

use std::f64::consts::FRAC_PI_2;
use std::sync::OnceLock;

use super::NumericsError;

/// Default absolute tolerance used across the crate.
pub const DEFAULT_TOL: f64 = 1e-10;

/// Maximum recursion depth for adaptive Simpson.
pub const MAX_DEPTH: u32 = 50;

const MAX_EVALUATIONS: usize = 20_000_000;
const DE_MIN_LEVEL: u32 = 3;
const DE_MAX_LEVEL: u32 = 12;

/// Integrates `f` over `(a, b)` to absolute tolerance `tol`.
///
/// Either endpoint may be infinite. Reversed bounds flip the sign.
///
/// ```
/// use sle_lab::numerics::integrate;
/// let v = integrate(|x: f64| (x / 2.0).cosh().powi(-2), f64::NEG_INFINITY, f64::INFINITY, 1e-10).unwrap();
/// assert!((v - 4.0).abs() < 1e-10);
/// ```
pub fn integrate<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    if a.is_nan() || b.is_nan() || !(tol > 0.0) {
        return Err(NumericsError::InvalidBounds { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    if a > b {
        return integrate(f, b, a, tol).map(|v| -v);
    }
    match (a.is_finite(), b.is_finite()) {
        (true, true) => {
            let (fa, fb) = (f(a), f(b));
            if fa.is_finite() && fb.is_finite() {
                adaptive_simpson(&f, a, b, tol, MAX_DEPTH)
            } else {
                tanh_sinh(&f, a, b, tol)
            }
        }
        (true, false) => exp_sinh(|t| f(a + t), tol),
        (false, true) => exp_sinh(|t| f(b - t), tol),
        (false, false) => sinh_sinh(&f, tol),
    }
}

/// Adaptive Simpson with Richardson correction. Fails with
/// [`NumericsError::NonConvergence`] when a branch exhausts `max_depth`.
pub fn adaptive_simpson<F>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: u32,
) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let fa = checked(f, a)?;
    let fb = checked(f, b)?;
    let m = 0.5 * (a + b);
    let fm = checked(f, m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut evals = 3usize;
    simpson_step(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut evals)
        .ok_or(NumericsError::NonConvergence { a, b, depth: max_depth })?
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    evals: &mut usize,
) -> Option<Result<f64, NumericsError>>
where
    F: Fn(f64) -> f64,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = match checked(f, lm) {
        Ok(v) => v,
        Err(e) => return Some(Err(e)),
    };
    let frm = match checked(f, rm) {
        Ok(v) => v,
        Err(e) => return Some(Err(e)),
    };
    *evals += 2;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Some(Ok(left + right + delta / 15.0));
    }
    // no room left to bisect
    if depth == 0 || *evals > MAX_EVALUATIONS || m <= a || m >= b {
        return None;
    }
    let l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, evals)?;
    let r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, evals)?;
    Some(match (l, r) {
        (Ok(l), Ok(r)) => Ok(l + r),
        (Err(e), _) | (_, Err(e)) => Err(e),
    })
}

fn checked<F: Fn(f64) -> f64>(f: &F, x: f64) -> Result<f64, NumericsError> {
    let v = f(x);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(NumericsError::NonFinite { x })
    }
}

/// Node of a double-exponential rule: abscissa, weight, and whether the
/// abscissa collapsed onto an endpoint in floating point.
struct Node {
    x: f64,
    w: f64,
    degenerate: bool,
}

/// Level-doubling driver shared by the three double-exponential rules.
/// `node(t)` maps the trapezoid variable to an abscissa and Jacobian.
fn de_sum<F, N>(f: &F, node: N, t_lo: f64, t_hi: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
    N: Fn(f64) -> Node,
{
    let eval = |t: f64| -> Result<f64, NumericsError> {
        let n = node(t);
        if n.degenerate || n.w == 0.0 || !n.x.is_finite() {
            return Ok(0.0);
        }
        let v = f(n.x);
        if v.is_finite() {
            Ok(v * n.w)
        } else {
            Err(NumericsError::NonFinite { x: n.x })
        }
    };

    let mut h = 1.0;
    let mut sum = 0.0;
    let k_lo = t_lo.ceil() as i64;
    let k_hi = t_hi.floor() as i64;
    for k in k_lo..=k_hi {
        sum += eval(k as f64)?;
    }
    let mut estimate = h * sum;
    for level in 1..=DE_MAX_LEVEL {
        h *= 0.5;
        // new nodes: odd multiples of h
        let mut t = (t_lo / (2.0 * h)).floor() * 2.0 * h + h;
        while t <= t_hi {
            if t >= t_lo {
                sum += eval(t)?;
            }
            t += 2.0 * h;
        }
        let next = h * sum;
        let diff = (next - estimate).abs();
        estimate = next;
        if level >= DE_MIN_LEVEL && diff <= tol {
            return Ok(estimate);
        }
    }
    Err(NumericsError::NonConvergence {
        a: t_lo,
        b: t_hi,
        depth: DE_MAX_LEVEL,
    })
}

/// Tanh-sinh rule on a finite interval; tolerates integrable endpoint
/// singularities. Abscissae closer to an endpoint than the floating-point
/// spacing are dropped.
pub fn tanh_sinh<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let half = 0.5 * (b - a);
    let node = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        let ch = u.cosh();
        let w = half * FRAC_PI_2 * t.cosh() / (ch * ch);
        // distance to the nearer endpoint, computed without cancellation
        let gap = half * 2.0 / (1.0 + (2.0 * u.abs()).exp());
        let x = if t >= 0.0 { b - gap } else { a + gap };
        Node {
            x,
            w,
            degenerate: x <= a || x >= b,
        }
    };
    de_sum(f, node, -4.0, 4.0, tol)
}

/// Exp-sinh rule on `(0, ∞)`.
pub fn exp_sinh<F>(f: F, tol: f64) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let node = |t: f64| {
        let x = (FRAC_PI_2 * t.sinh()).exp();
        Node {
            x,
            w: x * FRAC_PI_2 * t.cosh(),
            degenerate: x == 0.0,
        }
    };
    // The deep left tail resolves algebraic singularities at the origin.
    de_sum(&f, node, -6.5, 4.5, tol)
}

/// Sinh-sinh rule on the whole real line.
pub fn sinh_sinh<F>(f: &F, tol: f64) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    let node = |t: f64| {
        let u = FRAC_PI_2 * t.sinh();
        Node {
            x: u.sinh(),
            w: FRAC_PI_2 * t.cosh() * u.cosh(),
            degenerate: false,
        }
    };
    de_sum(f, node, -4.5, 4.5, tol)
}

const GL_ORDER: usize = 20;

fn gauss_legendre_nodes() -> &'static [(f64, f64); GL_ORDER] {
    static NODES: OnceLock<[(f64, f64); GL_ORDER]> = OnceLock::new();
    NODES.get_or_init(|| {
        let n = GL_ORDER;
        let mut out = [(0.0, 0.0); GL_ORDER];
        for (i, slot) in out.iter_mut().enumerate() {
            // Newton iteration from the Chebyshev-like initial guess.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let k = k as f64;
                    let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let step = p1 / dp;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            *slot = (x, 2.0 / ((1.0 - x * x) * dp * dp));
        }
        out
    })
}

/// Fixed 20-point Gauss-Legendre rule applied on each panel between
/// consecutive `breakpoints`. Exact to machine precision for integrands
/// analytic in a neighbourhood of each panel that is wide relative to it.
pub fn gauss_legendre_panels<F>(f: F, breakpoints: &[f64]) -> f64
where
    F: Fn(f64) -> f64,
{
    let nodes = gauss_legendre_nodes();
    breakpoints
        .windows(2)
        .map(|w| {
            let (c, r) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
            r * nodes.iter().map(|&(x, wt)| wt * f(c + r * x)).sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| x, 0.0, 1.0, DEFAULT_TOL).unwrap();
        assert_eq!(v, 0.5);
    }

    #[test]
    fn sine_over_half_period() {
        let v = integrate(f64::sin, 0.0, PI, DEFAULT_TOL).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn sech_squared_over_the_line() {
        // antiderivative 2 tanh(x/2)
        let f = |x: f64| (x / 2.0).cosh().powi(-2);
        let v = integrate(f, f64::NEG_INFINITY, f64::INFINITY, DEFAULT_TOL).unwrap();
        assert!((v - 4.0).abs() < 1e-10);
        let half = integrate(f, 1.0, f64::INFINITY, DEFAULT_TOL).unwrap();
        assert!((half - 2.0 * (1.0 - (0.5f64).tanh())).abs() < 1e-10);
        let left = integrate(f, f64::NEG_INFINITY, -1.0, DEFAULT_TOL).unwrap();
        assert!((left - half).abs() < 1e-12);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let v = integrate(|x| x * x, 1.0, 0.0, DEFAULT_TOL).unwrap();
        assert!((v + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_goes_through_tanh_sinh() {
        let v = integrate(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-12).unwrap();
        assert!((v - 2.0).abs() < 1e-10, "{v}");
        // the mass below the float spacing at 1 is 2·sqrt(1.1e-16) ≈ 2e-8
        let v = integrate(|x: f64| (1.0 - x).powf(-0.5), 0.0, 1.0, 1e-9).unwrap();
        assert!((v - 2.0).abs() < 1e-7, "{v}");
    }

    #[test]
    fn strong_origin_singularity_on_half_line() {
        // ∫_0^∞ y^{-2/3} (1+y)^{-4/3} dy = B(1/3, 1)= 3
        let v = integrate(
            |y: f64| y.powf(-2.0 / 3.0) * (1.0 + y).powf(-4.0 / 3.0),
            0.0,
            f64::INFINITY,
            1e-12,
        )
        .unwrap();
        assert!((v - 3.0).abs() < 1e-9, "{v}");
    }

    #[test]
    fn non_integrable_interior_pole_is_reported() {
        let err = integrate(|x: f64| 1.0 / x, -1.0, 2.0, 1e-10).unwrap_err();
        assert!(matches!(
            err,
            NumericsError::NonConvergence { .. } | NumericsError::NonFinite { .. }
        ));
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let s: f64 = gauss_legendre_nodes().iter().map(|n| n.1).sum();
        assert!((s - 2.0).abs() < 1e-14);
        let v = gauss_legendre_panels(|x| x.powi(9), &[0.0, 0.5, 1.0]);
        assert!((v - 0.1).abs() < 1e-15);
    }
}
