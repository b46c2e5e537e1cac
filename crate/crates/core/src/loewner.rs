//! Forward Loewner flows in the half-plane (`dg/ds = 2/(g − V)`) and the
//! strip (`dg/ds = coth((g − V)/2)`).
//!
//! Every flow is integrated in the relative coordinate `w = g − V` with the
//! explicit midpoint rule, the driver interpolated linearly inside a grid
//! step, and substeps chosen so that one substep moves `w` by at most a tenth
//! of its distance to the singularity.
//!
//! In the strip the rate is evaluated through `E = e^{−w}`, carried along
//! multiplicatively: `coth(w/2) = (1 + E)/(1 − E)`. This keeps the inner loop
//! free of transcendental calls without changing the scheme.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conformal::coth_half;
use crate::ComplexPoint;

/// Relative move allowed per substep.
const MOVE_FRACTION: f64 = 0.1;
/// Beyond this `|Re w|` the strip rate is `±1` to within `2e^{−30}`.
const FAR_FIELD: f64 = 30.0;
/// `|Re w|` beyond which the strip midpoint rate is linearized around `w`.
const LINEARIZED_FIELD: f64 = 8.0;
/// Below this `|w|` the strip rate is evaluated directly from `w`.
const NEAR_FIELD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoewnerError {
    #[error("starting point {0} is not in the open domain")]
    Domain(ComplexPoint),
    #[error("numerical breakdown at s = {time}: {reason}")]
    NumericalBreakdown { time: f64, reason: String },
    #[error("marked point collided with the driver at s = {time}")]
    Collision { time: f64 },
    #[error("invalid driving path: {0}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kernel {
    HalfPlane,
    Strip,
}

impl Kernel {
    /// Vector field at relative position `w = g − V`.
    pub fn rate(self, w: Complex64) -> Complex64 {
        match self {
            Kernel::HalfPlane => 2.0 / w,
            Kernel::Strip => coth_half(w),
        }
    }

    /// Rate for a real marked point: the real axis of `H`, or the upper
    /// boundary `Im = π` of the strip, where `coth((x + iπ)/2) = tanh(x/2)`.
    pub fn marked_rate(self, x: f64) -> f64 {
        match self {
            Kernel::HalfPlane => 2.0 / x,
            Kernel::Strip => (0.5 * x).tanh(),
        }
    }

    pub fn contains(self, z: ComplexPoint) -> bool {
        match self {
            Kernel::HalfPlane => z.im > 0.0 && z.re.is_finite() && z.im.is_finite(),
            Kernel::Strip => z.im > 0.0 && z.im < PI && z.re.is_finite(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PointFate {
    Flowing(ComplexPoint),
    EscapedLeft(f64),
    EscapedRight(f64),
    Swallowed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
    Undecided,
}

/// Which way the curve passed a probe. A probe pushed off to the right end
/// lies in the right complementary component, so the curve passed to its
/// left, and vice versa.
///
/// ```
/// use sle_lab::loewner::{decide_side, PointFate, Side};
/// assert_eq!(decide_side(PointFate::EscapedLeft(3.0)), Side::Right);
/// ```
pub fn decide_side(fate: PointFate) -> Side {
    match fate {
        PointFate::EscapedLeft(_) => Side::Right,
        PointFate::EscapedRight(_) => Side::Left,
        PointFate::Flowing(_) | PointFate::Swallowed(_) => Side::Undecided,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub escape_threshold: f64,
    pub swallow_tol: f64,
    pub swallow_im: f64,
    /// Substeps allowed inside one grid step before reporting a breakdown.
    pub max_substeps: u64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            escape_threshold: 25.0,
            swallow_tol: 1e-6,
            swallow_im: 1e-4,
            max_substeps: 1_000_000,
        }
    }
}

/// Discretized driver on a uniform grid with optional marked-point tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrivingPath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub marked_a: Option<Vec<f64>>,
    pub marked_b: Option<Vec<f64>>,
    pub kappa: f64,
    /// Time at which a half-plane marked point met the driver; the path is
    /// truncated there.
    pub collision: Option<f64>,
}

impl DrivingPath {
    pub fn new(dt: f64, values: Vec<f64>, kappa: f64) -> Self {
        Self {
            dt,
            values,
            marked_a: None,
            marked_b: None,
            kappa,
            collision: None,
        }
    }

    /// Constant driver `V ≡ v` over `[0, horizon]`.
    pub fn constant(v: f64, dt: f64, horizon: f64) -> Self {
        let steps = (horizon / dt).round() as usize;
        Self::new(dt, vec![v; steps + 1], 0.0)
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.values.len().saturating_sub(1) as f64
    }

    fn validate(&self) -> Result<(), LoewnerError> {
        if !(self.dt > 0.0) || self.values.is_empty() {
            return Err(LoewnerError::InvalidPath("need dt > 0 and at least one value".into()));
        }
        for track in [&self.marked_a, &self.marked_b].into_iter().flatten() {
            if track.len() != self.values.len() {
                return Err(LoewnerError::InvalidPath("marked track length mismatch".into()));
            }
        }
        Ok(())
    }
}

/// One grid step of the driver, with the exponentials the strip flow needs
/// computed once and shared between all probes.
#[derive(Debug, Clone, Copy)]
pub struct DriverIncrement {
    pub v0: f64,
    pub v1: f64,
    pub ds: f64,
    exp_dv: f64,
    exp_half_dv: f64,
    exp_neg_ds: f64,
}

impl DriverIncrement {
    pub fn new(v0: f64, v1: f64, ds: f64) -> Self {
        let dv = v1 - v0;
        let exp_half_dv = (0.5 * dv).exp();
        Self {
            v0,
            v1,
            ds,
            exp_dv: exp_half_dv * exp_half_dv,
            exp_half_dv,
            exp_neg_ds: exp_small_real(-ds),
        }
    }
}

/// `|z|` without the overflow guard of `hypot`; flow states stay far from
/// the overflow range.
#[inline]
fn abs(z: Complex64) -> f64 {
    z.norm_sqr().sqrt()
}

/// `e^z` for `|z| ≲ 0.02` by its Taylor polynomial, otherwise directly.
#[inline]
fn exp_small(z: Complex64) -> Complex64 {
    let r2 = z.norm_sqr();
    if r2 < 4e-6 {
        let one = Complex64::new(1.0, 0.0);
        one + z * (one + z * (0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0))))
    } else if r2 < 4e-4 {
        let one = Complex64::new(1.0, 0.0);
        one + z
            * (one
                + z * (0.5
                    + z * (1.0 / 6.0
                        + z * (1.0 / 24.0 + z * (1.0 / 120.0 + z * (1.0 / 720.0))))))
    } else {
        z.exp()
    }
}

#[inline]
fn exp_small_real(x: f64) -> f64 {
    if x.abs() < 2e-3 {
        1.0 + x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0))))
    } else if x.abs() < 0.02 {
        1.0 + x
            * (1.0
                + x * (0.5
                    + x * (1.0 / 6.0
                        + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x * (1.0 / 720.0))))))
    } else {
        x.exp()
    }
}

/// Incremental flow of one interior point.
#[derive(Debug, Clone)]
pub struct PointFlow {
    kernel: Kernel,
    w: Complex64,
    /// `e^{−w}`; stale while in the far field.
    e: Complex64,
    e_stale: bool,
    v: f64,
    s: f64,
    fate: Option<PointFate>,
}

impl PointFlow {
    pub fn new(kernel: Kernel, z0: ComplexPoint, v0: f64) -> Result<Self, LoewnerError> {
        if !kernel.contains(z0) {
            return Err(LoewnerError::Domain(z0));
        }
        let w = z0 - v0;
        let mut flow = Self {
            kernel,
            w,
            e: Complex64::new(0.0, 0.0),
            e_stale: true,
            v: v0,
            s: 0.0,
            fate: None,
        };
        flow.refresh_e();
        Ok(flow)
    }

    fn refresh_e(&mut self) {
        if self.kernel == Kernel::Strip && self.w.re.abs() < FAR_FIELD {
            self.e = (-self.w).exp();
            self.e_stale = false;
        } else {
            self.e_stale = true;
        }
    }

    /// Current `g_s(z₀)`.
    pub fn position(&self) -> ComplexPoint {
        self.w + self.v
    }

    /// Current `g_s(z₀) − V_s`.
    pub fn relative(&self) -> Complex64 {
        self.w
    }

    pub fn time(&self) -> f64 {
        self.s
    }

    pub fn fate(&self) -> PointFate {
        self.fate.unwrap_or(PointFate::Flowing(self.position()))
    }

    pub fn is_decided(&self) -> bool {
        self.fate.is_some()
    }

    fn strip_rate(&self, w: Complex64, e: Complex64, e_valid: bool) -> Complex64 {
        if w.re >= FAR_FIELD {
            Complex64::new(1.0, 0.0)
        } else if w.re <= -FAR_FIELD {
            Complex64::new(-1.0, 0.0)
        } else if !e_valid || w.norm_sqr() < NEAR_FIELD * NEAR_FIELD {
            coth_half(w)
        } else {
            (1.0 + e) / (1.0 - e)
        }
    }

    /// Advances through one driver increment. Returns the fate once it is
    /// decided; afterwards further calls are no-ops.
    pub fn advance(&mut self, inc: &DriverIncrement, cfg: &FlowConfig) -> Result<Option<PointFate>, LoewnerError> {
        if self.fate.is_some() {
            return Ok(self.fate);
        }
        let dv = inc.v1 - inc.v0;
        let k1 = self.rate_now();
        let gap = abs(self.w);
        let speed = abs(k1) + dv.abs() / inc.ds;
        if speed * inc.ds <= MOVE_FRACTION * gap {
            self.single_step(inc, k1, dv);
            self.s += inc.ds;
        } else {
            self.substeps(inc, cfg)?;
        }
        self.v = inc.v1;
        self.check(cfg)?;
        Ok(self.fate)
    }

    fn rate_now(&self) -> Complex64 {
        match self.kernel {
            Kernel::HalfPlane => 2.0 / self.w,
            Kernel::Strip => self.strip_rate(self.w, self.e, !self.e_stale),
        }
    }

    /// A full grid step with the shared exponentials.
    fn single_step(&mut self, inc: &DriverIncrement, k1: Complex64, dv: f64) {
        let h = inc.ds;
        let w_half = self.w + 0.5 * h * k1 - 0.5 * dv;
        match self.kernel {
            Kernel::HalfPlane => {
                let k2 = 2.0 / w_half;
                self.w += h * k2 - dv;
            }
            Kernel::Strip => {
                let fast = !self.e_stale && w_half.norm_sqr() >= NEAR_FIELD * NEAR_FIELD;
                if fast {
                    let linear = self.w.re.abs() >= LINEARIZED_FIELD;
                    let k2 = if linear {
                        // coth″ ~ e^{−|Re w|} here, so the first-order
                        // expansion around w is exact to rounding level
                        k1 - 0.5 * (k1 * k1 - 1.0) * (w_half - self.w)
                    } else {
                        let e_half = self.e * exp_small(-0.5 * h * k1) * inc.exp_half_dv;
                        self.strip_rate(w_half, e_half, true)
                    };
                    let right = self.w.re > 0.0;
                    self.w += h * k2 - dv;
                    if self.w.re.abs() < FAR_FIELD && self.w.norm_sqr() >= NEAR_FIELD * NEAR_FIELD {
                        if linear {
                            // e^{−h k2} = e^{∓h} e^{d} with |d| ≲ 1e−6
                            let (sgn, shift) = if right {
                                (1.0, inc.exp_dv * inc.exp_neg_ds)
                            } else {
                                (-1.0, inc.exp_dv / inc.exp_neg_ds)
                            };
                            let d = -h * (k2 - sgn);
                            self.e *= (1.0 + d * (1.0 + 0.5 * d)) * shift;
                        } else {
                            self.e *= exp_small(-h * k2) * inc.exp_dv;
                        }
                    } else {
                        self.refresh_e();
                    }
                } else {
                    let k2 = self.strip_rate(w_half, Complex64::new(0.0, 0.0), false);
                    self.w += h * k2 - dv;
                    self.refresh_e();
                }
            }
        }
    }

    fn substeps(&mut self, inc: &DriverIncrement, cfg: &FlowConfig) -> Result<(), LoewnerError> {
        let dv_rate = (inc.v1 - inc.v0) / inc.ds;
        let mut remaining = inc.ds;
        let mut count = 0u64;
        while remaining > 0.0 {
            let k1 = self.kernel.rate(self.w);
            let gap = abs(self.w);
            let speed = abs(k1) + dv_rate.abs();
            let mut h = (MOVE_FRACTION * gap / speed).min(remaining);
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            let dv = dv_rate * h;
            let w_half = self.w + 0.5 * h * k1 - 0.5 * dv;
            let k2 = self.kernel.rate(w_half);
            self.w += h * k2 - dv;
            remaining -= h;
            self.s += h;
            count += 1;
            if !(self.w.re.is_finite() && self.w.im.is_finite()) {
                return Err(LoewnerError::NumericalBreakdown {
                    time: self.s,
                    reason: "non-finite point position".into(),
                });
            }
            if self.w.norm_sqr() < cfg.swallow_tol * cfg.swallow_tol {
                // classified by the caller's check
                break;
            }
            if count > cfg.max_substeps {
                return Err(LoewnerError::NumericalBreakdown {
                    time: self.s,
                    reason: format!("more than {} substeps in one grid step", cfg.max_substeps),
                });
            }
        }
        self.refresh_e();
        Ok(())
    }

    fn check(&mut self, cfg: &FlowConfig) -> Result<(), LoewnerError> {
        let w = self.w;
        if !(w.re.is_finite() && w.im.is_finite()) {
            return Err(LoewnerError::NumericalBreakdown {
                time: self.s,
                reason: "non-finite point position".into(),
            });
        }
        if w.norm_sqr() < cfg.swallow_tol * cfg.swallow_tol {
            if w.im.abs() < cfg.swallow_im {
                self.fate = Some(PointFate::Swallowed(self.s));
                return Ok(());
            }
            return Err(LoewnerError::NumericalBreakdown {
                time: self.s,
                reason: "step size underflow away from the boundary".into(),
            });
        }
        if self.kernel == Kernel::Strip {
            if w.re >= cfg.escape_threshold {
                self.fate = Some(PointFate::EscapedRight(self.s));
            } else if w.re <= -cfg.escape_threshold {
                self.fate = Some(PointFate::EscapedLeft(self.s));
            }
        }
        Ok(())
    }
}

/// Incremental flow of a real marked point: on the real axis for the
/// half-plane, on the upper boundary `Im = π` for the strip. The half-plane
/// variant also carries `log g′_s(x)`.
#[derive(Debug, Clone)]
pub struct MarkedFlow {
    kernel: Kernel,
    x: f64,
    /// `e^{−|x|}` for the strip while `|x| < FAR_FIELD`.
    e: f64,
    v: f64,
    s: f64,
    log_gprime: f64,
    collided: Option<f64>,
}

impl MarkedFlow {
    pub fn new(kernel: Kernel, a: f64, v0: f64) -> Result<Self, LoewnerError> {
        let x = a - v0;
        if !x.is_finite() || (kernel == Kernel::HalfPlane && x == 0.0) {
            return Err(LoewnerError::Domain(Complex64::new(a, 0.0)));
        }
        Ok(Self {
            kernel,
            x,
            e: (-x.abs()).exp(),
            v: v0,
            s: 0.0,
            log_gprime: 0.0,
            collided: None,
        })
    }

    /// `A_s` (image of the marked point, boundary coordinate).
    pub fn position(&self) -> f64 {
        self.x + self.v
    }

    /// `A_s − V_s`.
    pub fn relative(&self) -> f64 {
        self.x
    }

    /// `log |g′_s(a)|` (half-plane only; zero for the strip).
    pub fn log_gprime(&self) -> f64 {
        self.log_gprime
    }

    pub fn collision(&self) -> Option<f64> {
        self.collided
    }

    /// `tanh(x/2)` from `e = e^{−|x|}`; odd in `x` by construction.
    #[inline]
    fn strip_rate(x: f64, e: f64) -> f64 {
        if x.abs() >= FAR_FIELD {
            x.signum()
        } else {
            x.signum() * (1.0 - e) / (1.0 + e)
        }
    }

    pub fn advance(&mut self, inc: &DriverIncrement, cfg: &FlowConfig) -> Result<(), LoewnerError> {
        if self.collided.is_some() {
            return Err(LoewnerError::Collision {
                time: self.collided.unwrap_or(self.s),
            });
        }
        let dv = inc.v1 - inc.v0;
        match self.kernel {
            Kernel::Strip => {
                // tanh is 1/2-Lipschitz and bounded, so a single midpoint step
                // is always within the move budget.
                let h = inc.ds;
                let sign = self.x.signum();
                let k1 = Self::strip_rate(self.x, self.e);
                let x_half = self.x + 0.5 * h * k1 - 0.5 * dv;
                let k2 = if self.x.abs() >= LINEARIZED_FIELD {
                    k1 + 0.5 * (1.0 - k1 * k1) * (x_half - self.x)
                } else {
                    // e^{−|x|} moves by e^{−sign·Δx} while the sign is kept
                    let half_v = if sign > 0.0 { inc.exp_half_dv } else { 1.0 / inc.exp_half_dv };
                    let e_half = if x_half.signum() == sign {
                        self.e * exp_small_real(-0.5 * h * k1 * sign) * half_v
                    } else {
                        (-x_half.abs()).exp()
                    };
                    Self::strip_rate(x_half, e_half)
                };
                let x_new = self.x + h * k2 - dv;
                let full_v = if sign > 0.0 { inc.exp_dv } else { 1.0 / inc.exp_dv };
                if x_new.signum() != sign || self.x.abs() >= FAR_FIELD || x_new.abs() >= FAR_FIELD {
                    self.e = (-x_new.abs()).exp();
                } else {
                    self.e *= exp_small_real(-h * k2 * sign) * full_v;
                }
                self.x = x_new;
                self.s += h;
            }
            Kernel::HalfPlane => self.half_plane_steps(inc, cfg)?,
        }
        self.v = inc.v1;
        if !self.x.is_finite() {
            return Err(LoewnerError::NumericalBreakdown {
                time: self.s,
                reason: "non-finite marked point".into(),
            });
        }
        Ok(())
    }

    fn half_plane_steps(&mut self, inc: &DriverIncrement, cfg: &FlowConfig) -> Result<(), LoewnerError> {
        let dv_rate = (inc.v1 - inc.v0) / inc.ds;
        let mut remaining = inc.ds;
        let mut count = 0u64;
        while remaining > 0.0 {
            let k1 = 2.0 / self.x;
            let mut h = (MOVE_FRACTION * self.x.abs() / (k1.abs() + dv_rate.abs())).min(remaining);
            if remaining - h < 1e-3 * h {
                h = remaining;
            }
            let dv = dv_rate * h;
            let x_half = self.x + 0.5 * h * k1 - 0.5 * dv;
            let k2 = 2.0 / x_half;
            let before = self.x;
            self.log_gprime -= h * 2.0 / (x_half * x_half);
            self.x += h * k2 - dv;
            self.s += h;
            remaining -= h;
            count += 1;
            if self.x.abs() < cfg.swallow_tol || self.x.signum() != before.signum() {
                self.collided = Some(self.s);
                return Err(LoewnerError::Collision { time: self.s });
            }
            if count > cfg.max_substeps {
                return Err(LoewnerError::NumericalBreakdown {
                    time: self.s,
                    reason: format!("more than {} substeps in one grid step", cfg.max_substeps),
                });
            }
        }
        Ok(())
    }
}

/// Flows `z0` along the whole path with the default settings and the given
/// escape threshold.
///
/// ```
/// use sle_lab::loewner::{flow_point, DrivingPath, Kernel, PointFate};
/// use sle_lab::Complex64;
/// let path = DrivingPath::constant(0.0, 1e-3, 1.0);
/// let fate = flow_point(Kernel::HalfPlane, Complex64::i(), &path, 25.0).unwrap();
/// match fate {
///     PointFate::Swallowed(s) => assert!((s - 0.25).abs() < 1e-4),
///     other => panic!("{other:?}"),
/// }
/// ```
pub fn flow_point(
    kernel: Kernel,
    z0: ComplexPoint,
    path: &DrivingPath,
    escape_threshold: f64,
) -> Result<PointFate, LoewnerError> {
    let cfg = FlowConfig {
        escape_threshold,
        ..FlowConfig::default()
    };
    flow_point_with(kernel, z0, path, &cfg)
}

/// [`flow_point`] with explicit settings. A starting point on the lower
/// boundary (real axis) is accepted and flowed as a real point.
pub fn flow_point_with(
    kernel: Kernel,
    z0: ComplexPoint,
    path: &DrivingPath,
    cfg: &FlowConfig,
) -> Result<PointFate, LoewnerError> {
    path.validate()?;
    if !(cfg.escape_threshold > 0.0) {
        return Err(LoewnerError::InvalidPath("escape threshold must be positive".into()));
    }
    let boundary_ok = z0.im == 0.0 && z0.re != path.values[0];
    if !kernel.contains(z0) && !boundary_ok {
        return Err(LoewnerError::Domain(z0));
    }
    let mut flow = PointFlow {
        kernel,
        w: z0 - path.values[0],
        e: Complex64::new(0.0, 0.0),
        e_stale: true,
        v: path.values[0],
        s: 0.0,
        fate: None,
    };
    flow.refresh_e();
    for pair in path.values.windows(2) {
        let inc = DriverIncrement::new(pair[0], pair[1], path.dt);
        if flow.advance(&inc, cfg)?.is_some() {
            break;
        }
    }
    Ok(flow.fate())
}

/// Fills the marked-point tracks of `path` for `a` (and `b`). In the
/// half-plane, a collision truncates every track at the collision time and
/// is reported as an error carrying that time.
pub fn evolve_marked(
    kernel: Kernel,
    path: &DrivingPath,
    a: f64,
    b: Option<f64>,
) -> Result<DrivingPath, LoewnerError> {
    path.validate()?;
    let cfg = FlowConfig::default();
    let v0 = path.values[0];
    let mut fa = MarkedFlow::new(kernel, a, v0)?;
    let mut fb = b.map(|b| MarkedFlow::new(kernel, b, v0)).transpose()?;
    let mut ta = Vec::with_capacity(path.values.len());
    let mut tb = Vec::with_capacity(path.values.len());
    ta.push(a);
    if let Some(b) = b {
        tb.push(b);
    }
    for pair in path.values.windows(2) {
        let inc = DriverIncrement::new(pair[0], pair[1], path.dt);
        fa.advance(&inc, &cfg)?;
        ta.push(fa.position());
        if let Some(fb) = fb.as_mut() {
            fb.advance(&inc, &cfg)?;
            tb.push(fb.position());
        }
    }
    let mut out = path.clone();
    out.marked_a = Some(ta);
    out.marked_b = b.map(|_| tb);
    Ok(out)
}

/// Reconstructed tip positions `γ(s) ≈ g_s^{−1}(V_s + iε₀)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TipTrace {
    pub times: Vec<f64>,
    pub points: Vec<ComplexPoint>,
    /// Backward flows that blew up and were dropped from the trace.
    pub warnings: usize,
}

/// Starting height of the backward flow.
pub const TRACE_EPSILON: f64 = 1e-6;

/// Tip trace sampled every `sample_stride` grid steps.
pub fn trace_tip(kernel: Kernel, path: &DrivingPath, sample_stride: usize) -> Result<TipTrace, LoewnerError> {
    path.validate()?;
    let stride = sample_stride.max(1);
    let mut trace = TipTrace {
        times: Vec::new(),
        points: Vec::new(),
        warnings: 0,
    };
    for k in (stride..path.values.len()).step_by(stride) {
        let mut w = Complex64::new(0.0, TRACE_EPSILON);
        let mut ok = true;
        for j in (1..=k).rev() {
            let (v_hi, v_lo) = (path.values[j], path.values[j - 1]);
            if !backward_step(kernel, &mut w, v_hi, v_lo, path.dt) {
                ok = false;
                break;
            }
        }
        if ok {
            trace.times.push(k as f64 * path.dt);
            trace.points.push(w + path.values[0]);
        } else {
            trace.warnings += 1;
        }
    }
    Ok(trace)
}

/// Runs the flow backward over one grid step, from driver value `v_hi` at
/// the later time to `v_lo` at the earlier one. Returns false on blow-up.
fn backward_step(kernel: Kernel, w: &mut Complex64, v_hi: f64, v_lo: f64, dt: f64) -> bool {
    // relative coordinate with respect to the driver at the current time
    let dv_rate = (v_lo - v_hi) / dt;
    let mut remaining = dt;
    let mut guard = 0u32;
    while remaining > 0.0 {
        let k1 = -kernel.rate(*w);
        let speed = abs(k1) + dv_rate.abs();
        let mut h = (MOVE_FRACTION * abs(*w) / speed).min(remaining);
        if remaining - h < 1e-3 * h {
            h = remaining;
        }
        let dv = dv_rate * h;
        let w_half = *w + 0.5 * h * k1 - 0.5 * dv;
        let k2 = -kernel.rate(w_half);
        *w += h * k2 - dv;
        remaining -= h;
        guard += 1;
        if !(w.re.is_finite() && w.im.is_finite()) || guard > 1_000_000 {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn flowing(f: PointFate) -> Complex64 {
        match f {
            PointFate::Flowing(z) => z,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn half_plane_constant_driver_boundary_point() {
        let path = DrivingPath::constant(0.0, 1e-4, 1.0);
        let g = flowing(flow_point(Kernel::HalfPlane, c(2.0, 0.0), &path, 25.0).unwrap());
        assert!((g.re - 8.0f64.sqrt()).abs() < 1e-8, "{g}");
        assert_eq!(g.im, 0.0);
    }

    #[test]
    fn half_plane_bulk_point_against_square_root() {
        let path = DrivingPath::constant(0.0, 1e-4, 1.0);
        let z = c(0.5, 0.7);
        let g = flowing(flow_point(Kernel::HalfPlane, z, &path, 25.0).unwrap());
        let exact = (z * z + 4.0).sqrt();
        assert!((g - exact).norm() < 1e-8, "{g} {exact}");
    }

    #[test]
    fn half_plane_swallow_time() {
        let path = DrivingPath::constant(0.0, 1e-4, 0.5);
        match flow_point(Kernel::HalfPlane, c(0.0, 1.0), &path, 25.0).unwrap() {
            PointFate::Swallowed(s) => assert!((s - 0.25).abs() < 1e-4, "{s}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strip_constant_driver_boundary_point() {
        let path = DrivingPath::constant(0.0, 1e-4, 1.0);
        let g = flowing(flow_point(Kernel::Strip, c(1.0, 0.0), &path, 25.0).unwrap());
        let exact = 2.0 * ((0.5f64).exp() * (0.5f64).cosh()).acosh();
        assert!((g.re - exact).abs() < 1e-8, "{g} {exact}");
    }

    #[test]
    fn strip_bulk_point_against_cosh_law() {
        // cosh(w/2) e^{−s/2} is conserved for the constant driver
        let path = DrivingPath::constant(0.0, 1e-4, 1.0);
        let z = c(0.4, 1.1);
        let g = flowing(flow_point(Kernel::Strip, z, &path, 25.0).unwrap());
        let lhs = (0.5 * g).cosh();
        let rhs = (0.5 * z).cosh() * (0.5f64).exp();
        assert!((lhs - rhs).norm() < 1e-8, "{lhs} {rhs}");
    }

    #[test]
    fn linearized_region_keeps_the_closed_forms() {
        let path = DrivingPath::constant(0.0, 1e-3, 3.0);
        for z in [c(9.0, 1.3), c(-12.0, 2.9), c(7.9, 0.2)] {
            let g = flowing(flow_point(Kernel::Strip, z, &path, 100.0).unwrap());
            let mut exact = 2.0 * ((0.5 * z).cosh() * (1.5f64).exp()).acosh();
            if exact.re.signum() != z.re.signum() {
                exact = -exact;
            }
            assert!((g - exact).norm() < 1e-8, "{z}: {g} {exact}");
        }
        let out = evolve_marked(Kernel::Strip, &path, 9.0, Some(-10.0)).unwrap();
        let (a, b) = (out.marked_a.unwrap(), out.marked_b.unwrap());
        let law = |x0: f64| 2.0 * ((1.5f64).exp() * (0.5 * x0).sinh()).asinh();
        assert!((a.last().unwrap() - law(9.0)).abs() < 1e-8);
        assert!((b.last().unwrap() - law(-10.0)).abs() < 1e-8);
    }

    #[test]
    fn strip_ends_translate() {
        let path = DrivingPath::constant(0.0, 1e-3, 2.0);
        for &x in &[30.0, -30.0] {
            let cfg = FlowConfig {
                escape_threshold: 100.0,
                ..FlowConfig::default()
            };
            let g = flowing(flow_point_with(Kernel::Strip, c(x, 1.0), &path, &cfg).unwrap());
            assert!((g - c(x, 1.0) - x.signum() * 2.0).norm() < 1e-6, "{g}");
        }
    }

    #[test]
    fn hydrodynamic_normalization() {
        let t = 0.5;
        let path = DrivingPath::new(1e-3, (0..=500).map(|k| (k as f64 * 0.01).sin()).collect(), 0.0);
        for k in 0..8 {
            let z = 1e3 * Complex64::from_polar(1.0, 0.2 + 0.35 * k as f64);
            let g = flowing(flow_point(Kernel::HalfPlane, z, &path, 25.0).unwrap());
            let err = (g - z - 2.0 * t / z).norm();
            assert!(err < 10.0 * t / z.norm_sqr(), "{err}");
        }
    }

    #[test]
    fn escapes_are_reported() {
        let path = DrivingPath::constant(0.0, 1e-3, 40.0);
        match flow_point(Kernel::Strip, c(1.0, 1.0), &path, 25.0).unwrap() {
            PointFate::EscapedRight(s) => assert!(s > 20.0 && s < 30.0, "{s}"),
            other => panic!("{other:?}"),
        }
        match flow_point(Kernel::Strip, c(-1.0, 2.0), &path, 25.0).unwrap() {
            PointFate::EscapedLeft(_) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn domain_errors() {
        let path = DrivingPath::constant(0.0, 1e-3, 1.0);
        assert!(flow_point(Kernel::Strip, c(0.0, 4.0), &path, 25.0).is_err());
        assert!(flow_point(Kernel::HalfPlane, c(0.0, -1.0), &path, 25.0).is_err());
        assert!(flow_point(Kernel::HalfPlane, c(0.0, 1.0), &path, 0.0).is_err());
    }

    #[test]
    fn substep_cap_reports_breakdown() {
        let path = DrivingPath::constant(0.0, 1e-3, 1.0);
        let cfg = FlowConfig {
            max_substeps: 2,
            ..FlowConfig::default()
        };
        let err = flow_point_with(Kernel::HalfPlane, c(0.0, 0.1), &path, &cfg).unwrap_err();
        assert!(matches!(err, LoewnerError::NumericalBreakdown { .. }));
    }

    #[test]
    fn marked_tracks_follow_sinh_law() {
        let path = DrivingPath::constant(0.0, 1e-4, 1.0);
        let out = evolve_marked(Kernel::Strip, &path, 1.0, Some(0.0)).unwrap();
        let a = out.marked_a.as_ref().unwrap();
        let b = out.marked_b.as_ref().unwrap();
        // cosh((A + iπ)/2) = i sinh(A/2), so sinh(A/2) e^{−s/2} is conserved
        for (k, (&ak, &bk)) in a.iter().zip(b).enumerate() {
            let s = k as f64 * 1e-4;
            let exact = 2.0 * ((0.5 * s).exp() * (0.5f64).sinh()).asinh();
            assert!((ak - exact).abs() < 1e-8, "{s} {ak} {exact}");
            assert_eq!(bk, 0.0);
        }
    }

    #[test]
    fn marked_tracks_are_odd() {
        let path = DrivingPath::constant(0.0, 1e-3, 2.0);
        let p = evolve_marked(Kernel::Strip, &path, 0.7, None).unwrap();
        let m = evolve_marked(Kernel::Strip, &path, -0.7, None).unwrap();
        for (x, y) in p.marked_a.unwrap().iter().zip(m.marked_a.unwrap()) {
            assert_eq!(*x, -y);
        }
    }

    #[test]
    fn driver_jump_does_not_cross_marked_point() {
        // a driver jump across the point within one grid step: repulsion
        // keeps the point ahead of the driver
        let values: Vec<f64> = (0..=100).map(|k| if k < 10 { 0.0 } else { 1.0 }).collect();
        let path = DrivingPath::new(1e-3, values, 0.0);
        let out = evolve_marked(Kernel::HalfPlane, &path, 0.5, None).unwrap();
        for (a, v) in out.marked_a.unwrap().iter().zip(&path.values) {
            assert!(a > v);
        }
    }

    #[test]
    fn half_plane_gprime_against_closed_form() {
        // g_t(x) = sqrt(x² + 4t), g′ = x / sqrt(x² + 4t)
        let path = DrivingPath::constant(0.0, 1e-4, 0.5);
        let mut m = MarkedFlow::new(Kernel::HalfPlane, 1.5, 0.0).unwrap();
        let cfg = FlowConfig::default();
        for pair in path.values.windows(2) {
            m.advance(&DriverIncrement::new(pair[0], pair[1], 1e-4), &cfg).unwrap();
        }
        let g = (1.5f64 * 1.5 + 2.0).sqrt();
        assert!((m.position() - g).abs() < 1e-9);
        assert!((m.log_gprime() - (1.5 / g).ln()).abs() < 1e-9);
    }

    #[test]
    fn tip_trace_constant_driver() {
        let path = DrivingPath::constant(0.0, 1e-3, 1.0);
        let tr = trace_tip(Kernel::HalfPlane, &path, 100).unwrap();
        assert_eq!(tr.warnings, 0);
        for (t, z) in tr.times.iter().zip(&tr.points) {
            assert!(z.re.abs() < 1e-6);
            assert!((z.im - 2.0 * t.sqrt()).abs() < 1e-4, "{t} {z}");
        }
        let tr = trace_tip(Kernel::Strip, &path, 100).unwrap();
        for z in &tr.points {
            assert!(z.re.abs() < 1e-6 && z.im > 0.0 && z.im < PI);
        }
    }

    #[test]
    fn fates_are_monotone_in_horizon() {
        let values: Vec<f64> = (0..=30000).map(|k| (k as f64 * 1e-3).sin() * 0.5).collect();
        let long = DrivingPath::new(1e-3, values.clone(), 0.0);
        let short = DrivingPath::new(1e-3, values[..25001].to_vec(), 0.0);
        let z = c(0.2, 1.0);
        let a = flow_point(Kernel::Strip, z, &long, 20.0).unwrap();
        let b = flow_point(Kernel::Strip, z, &short, 20.0).unwrap();
        if let (PointFate::EscapedRight(s1), PointFate::EscapedRight(s2)) = (a, b) {
            assert_eq!(s1, s2);
        } else {
            panic!("{a:?} {b:?}");
        }
    }

    #[test]
    fn side_rules() {
        assert_eq!(decide_side(PointFate::EscapedRight(1.0)), Side::Left);
        assert_eq!(decide_side(PointFate::EscapedLeft(1.0)), Side::Right);
        assert_eq!(decide_side(PointFate::Flowing(c(0.0, 1.0))), Side::Undecided);
    }
}
