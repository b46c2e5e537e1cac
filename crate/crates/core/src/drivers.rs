//! Euler–Maruyama sampling of the driving process for the chordal and
//! dipolar variants, with their drift functions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{conditioning_drift_f, AnalyticsError};
use crate::loewner::{DriverIncrement, DrivingPath, FlowConfig, Kernel, LoewnerError, MarkedFlow};
use crate::numerics::RngStream;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriverError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid step parameters: {0}")]
    InvalidStep(String),
    #[error("singular configuration: {0}")]
    Singular(String),
    #[error("marked point met the driver at s = {time}")]
    Collision { time: f64 },
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Loewner(#[from] LoewnerError),
}

/// The driving processes. Half-plane marked points live on the real axis,
/// strip marked points `a`, `b` stand for `iπ + a`, `iπ + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SleModel {
    ChordalHalfPlaneToInfinity { kappa: f64 },
    ChordalHalfPlaneToA { kappa: f64, a: f64 },
    ChordalStrip { kappa: f64, a: f64 },
    DipolarHalfPlane { kappa: f64, a: f64, b: f64 },
    DipolarStrip { kappa: f64 },
    DipolarStripCondInterval { kappa: f64, a: f64, b: f64 },
    DipolarStripCondPoint { kappa: f64, a: f64 },
}

impl SleModel {
    pub fn kappa(&self) -> f64 {
        match *self {
            SleModel::ChordalHalfPlaneToInfinity { kappa }
            | SleModel::ChordalHalfPlaneToA { kappa, .. }
            | SleModel::ChordalStrip { kappa, .. }
            | SleModel::DipolarHalfPlane { kappa, .. }
            | SleModel::DipolarStrip { kappa }
            | SleModel::DipolarStripCondInterval { kappa, .. }
            | SleModel::DipolarStripCondPoint { kappa, .. } => kappa,
        }
    }

    pub fn kernel(&self) -> Kernel {
        match self {
            SleModel::ChordalHalfPlaneToInfinity { .. }
            | SleModel::ChordalHalfPlaneToA { .. }
            | SleModel::DipolarHalfPlane { .. } => Kernel::HalfPlane,
            _ => Kernel::Strip,
        }
    }

    /// The marked points the drift depends on.
    pub fn marked_points(&self) -> (Option<f64>, Option<f64>) {
        match *self {
            SleModel::ChordalHalfPlaneToInfinity { .. } | SleModel::DipolarStrip { .. } => (None, None),
            SleModel::ChordalHalfPlaneToA { a, .. }
            | SleModel::ChordalStrip { a, .. }
            | SleModel::DipolarStripCondPoint { a, .. } => (Some(a), None),
            SleModel::DipolarHalfPlane { a, b, .. } | SleModel::DipolarStripCondInterval { a, b, .. } => {
                (Some(a), Some(b))
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SleModel::ChordalHalfPlaneToInfinity { .. } => "chordal_half_plane_to_infinity",
            SleModel::ChordalHalfPlaneToA { .. } => "chordal_half_plane_to_a",
            SleModel::ChordalStrip { .. } => "chordal_strip",
            SleModel::DipolarHalfPlane { .. } => "dipolar_half_plane",
            SleModel::DipolarStrip { .. } => "dipolar_strip",
            SleModel::DipolarStripCondInterval { .. } => "dipolar_strip_cond_interval",
            SleModel::DipolarStripCondPoint { .. } => "dipolar_strip_cond_point",
        }
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let k = self.kappa();
        if !(k >= 0.0 && k.is_finite()) {
            return Err(DriverError::InvalidModel(format!("kappa = {k}")));
        }
        if matches!(self, SleModel::DipolarStripCondInterval { .. }) && k == 0.0 {
            return Err(DriverError::InvalidModel("interval conditioning needs kappa > 0".into()));
        }
        let (a, b) = self.marked_points();
        for x in [a, b].into_iter().flatten() {
            if !x.is_finite() {
                return Err(DriverError::InvalidModel(format!("marked point {x}")));
            }
        }
        if let (Some(a), Some(b)) = (a, b) {
            if !(a < b) {
                return Err(DriverError::InvalidModel(format!("need a < b, got ({a}, {b})")));
            }
        }
        Ok(())
    }
}

fn need(x: Option<f64>, name: &str) -> Result<f64, DriverError> {
    x.ok_or_else(|| DriverError::Singular(format!("marked point {name} not supplied")))
}

fn pole(v: f64, x: f64) -> Result<f64, DriverError> {
    if v == x {
        Err(DriverError::Singular(format!("driver at marked point {x}")))
    } else {
        Ok(1.0 / (v - x))
    }
}

/// The `ds` coefficient of `dV_s` given the current driver and marked points.
///
/// ```
/// use sle_lab::drivers::{drift, SleModel};
/// let m = SleModel::ChordalStrip { kappa: 6.0, a: 0.0 };
/// assert_eq!(drift(&m, 0.3, Some(-1.0), None).unwrap(), 0.0);
/// ```
pub fn drift(model: &SleModel, v: f64, a: Option<f64>, b: Option<f64>) -> Result<f64, DriverError> {
    let k = model.kappa();
    Ok(match model {
        SleModel::ChordalHalfPlaneToInfinity { .. } | SleModel::DipolarStrip { .. } => 0.0,
        SleModel::ChordalHalfPlaneToA { .. } => (k - 6.0) * pole(v, need(a, "A")?)?,
        SleModel::ChordalStrip { .. } => (0.5 * k - 3.0) * (0.5 * (v - need(a, "A")?)).tanh(),
        SleModel::DipolarHalfPlane { .. } => {
            (0.5 * k - 3.0) * (pole(v, need(a, "A")?)? + pole(v, need(b, "B")?)?)
        }
        SleModel::DipolarStripCondInterval { .. } => {
            let (a, b) = (need(a, "A")?, need(b, "B")?);
            -k * conditioning_drift_f(a - v, b - v, k)?
        }
        SleModel::DipolarStripCondPoint { .. } => -2.0 * (0.5 * (v - need(a, "A")?)).tanh(),
    })
}

/// Drift of dipolar SLE in the strip toward the upper-boundary interval
/// `[iπ + A, iπ + B]`: `(κ/2 − 3)(tanh((V−A)/2) + tanh((V−B)/2))/2`.
pub fn dipolar_strip_interval_drift(v: f64, a: f64, b: f64, kappa: f64) -> f64 {
    (0.5 * kappa - 3.0) * 0.5 * ((0.5 * (v - a)).tanh() + (0.5 * (v - b)).tanh())
}

/// Streaming Euler–Maruyama sampler. Marked points are co-evolved on the
/// same grid by the Loewner flow; extra tracked points follow the same
/// flow without entering the drift.
#[derive(Debug, Clone)]
pub struct DriverStepper {
    model: SleModel,
    dt: f64,
    sqrt_kdt: f64,
    v: f64,
    s: f64,
    own: usize,
    marked: Vec<MarkedFlow>,
    retired: Vec<bool>,
    cfg: FlowConfig,
    stream: RngStream,
    collision: Option<f64>,
}

impl DriverStepper {
    pub fn new(model: SleModel, dt: f64, stream: RngStream) -> Result<Self, DriverError> {
        Self::with_tracked(model, dt, stream, &[])
    }

    pub fn with_tracked(model: SleModel, dt: f64, stream: RngStream, tracked: &[f64]) -> Result<Self, DriverError> {
        model.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DriverError::InvalidStep(format!("dt = {dt}")));
        }
        let kernel = model.kernel();
        let (a, b) = model.marked_points();
        let own: Vec<f64> = [a, b].into_iter().flatten().collect();
        let marked = own
            .iter()
            .chain(tracked)
            .map(|&x| MarkedFlow::new(kernel, x, 0.0))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            model,
            dt,
            sqrt_kdt: (model.kappa() * dt).sqrt(),
            v: 0.0,
            s: 0.0,
            own: own.len(),
            retired: vec![false; marked.len()],
            marked,
            cfg: FlowConfig::default(),
            stream,
            collision: None,
        })
    }

    pub fn set_flow_config(&mut self, cfg: FlowConfig) {
        self.cfg = cfg;
    }

    /// Stops flowing tracked point `i`; it keeps its last state. The
    /// model's own points cannot be retired.
    pub fn retire(&mut self, i: usize) {
        if i >= self.own {
            self.retired[i] = true;
        }
    }

    pub fn model(&self) -> &SleModel {
        &self.model
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn driver(&self) -> f64 {
        self.v
    }

    pub fn time(&self) -> f64 {
        self.s
    }

    pub fn collision(&self) -> Option<f64> {
        self.collision
    }

    /// Marked point `i`: the model's own points first, then the tracked ones.
    pub fn marked(&self, i: usize) -> &MarkedFlow {
        &self.marked[i]
    }

    pub fn marked_len(&self) -> usize {
        self.marked.len()
    }

    fn own_positions(&self) -> (Option<f64>, Option<f64>) {
        let pos = |i: usize| (i < self.own).then(|| self.marked[i].position());
        (pos(0), pos(1))
    }

    /// Draws one increment, advances the marked points and returns the
    /// increment for probe flows to share.
    pub fn step(&mut self) -> Result<DriverIncrement, DriverError> {
        if let Some(time) = self.collision {
            return Err(DriverError::Collision { time });
        }
        let (a, b) = self.own_positions();
        let mu = drift(&self.model, self.v, a, b)?;
        let v1 = self.v + mu * self.dt + self.sqrt_kdt * self.stream.gaussian();
        let s1 = self.s + self.dt;
        // an Euler step across a real marked point is a collision
        if self.model.kernel() == Kernel::HalfPlane {
            for x in [a, b].into_iter().flatten() {
                if (x - self.v).signum() != (x - v1).signum() {
                    self.collision = Some(s1);
                    return Err(DriverError::Collision { time: s1 });
                }
            }
        }
        let inc = DriverIncrement::new(self.v, v1, self.dt);
        for (i, m) in self.marked.iter_mut().enumerate() {
            if i >= self.own && (self.retired[i] || m.collision().is_some()) {
                continue;
            }
            match m.advance(&inc, &self.cfg) {
                Ok(()) => {}
                Err(LoewnerError::Collision { time }) if i < self.own => {
                    self.collision = Some(time);
                    return Err(DriverError::Collision { time });
                }
                // a tracked point keeps its collision time and stops moving
                Err(LoewnerError::Collision { .. }) => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.v = v1;
        self.s = s1;
        Ok(inc)
    }
}

/// Samples the driver on `[0, horizon]` with step `dt`, recording the
/// model's marked-point tracks. A half-plane collision truncates the path
/// and sets its collision time.
///
/// ```
/// use sle_lab::drivers::{sample_path, SleModel};
/// use sle_lab::numerics::derive_stream;
/// let p = sample_path(&SleModel::DipolarStrip { kappa: 2.0 }, 1e-3, 0.1, derive_stream(7, 0)).unwrap();
/// assert_eq!(p.values.len(), 101);
/// ```
pub fn sample_path(model: &SleModel, dt: f64, horizon: f64, stream: RngStream) -> Result<DrivingPath, DriverError> {
    if !(horizon >= dt) || !horizon.is_finite() {
        return Err(DriverError::InvalidStep(format!("horizon {horizon} shorter than dt {dt}")));
    }
    let mut st = DriverStepper::new(*model, dt, stream)?;
    let steps = (horizon / dt).round() as usize;
    let (a, b) = model.marked_points();
    let mut values = Vec::with_capacity(steps + 1);
    let mut ta = a.map(|a| vec![a]);
    let mut tb = b.map(|b| vec![b]);
    values.push(0.0);
    let mut collision = None;
    for _ in 0..steps {
        match st.step() {
            Ok(_) => {}
            Err(DriverError::Collision { time }) => {
                collision = Some(time);
                break;
            }
            Err(e) => return Err(e),
        }
        values.push(st.driver());
        let (pa, pb) = st.own_positions();
        if let (Some(t), Some(x)) = (ta.as_mut(), pa) {
            t.push(x);
        }
        if let (Some(t), Some(x)) = (tb.as_mut(), pb) {
            t.push(x);
        }
    }
    let mut path = DrivingPath::new(dt, values, model.kappa());
    path.marked_a = ta;
    path.marked_b = tb;
    path.collision = collision;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::log_partition_drift;
    use crate::loewner::evolve_marked;
    use crate::numerics::derive_stream;
    use proptest::prelude::*;

    #[test]
    fn drifts_vanish_at_six() {
        let models = [
            SleModel::ChordalHalfPlaneToA { kappa: 6.0, a: 1.0 },
            SleModel::ChordalStrip { kappa: 6.0, a: 1.0 },
            SleModel::DipolarHalfPlane { kappa: 6.0, a: -1.0, b: 1.0 },
        ];
        for m in &models {
            for &v in &[-2.0, 0.3, 5.0] {
                assert_eq!(drift(m, v, Some(1.5), Some(2.5)).unwrap(), 0.0);
            }
        }
        assert_eq!(dipolar_strip_interval_drift(0.2, -1.0, 1.0, 6.0), 0.0);
    }

    #[test]
    fn kappa_two_point_conditioning_is_chordal() {
        let cp = SleModel::DipolarStripCondPoint { kappa: 2.0, a: 0.0 };
        let ch = SleModel::ChordalStrip { kappa: 2.0, a: 0.0 };
        for i in 0..10 {
            for j in 0..10 {
                let (v, a) = (-4.0 + 0.9 * i as f64, -3.7 + 0.8 * j as f64);
                assert_eq!(drift(&cp, v, Some(a), None).unwrap(), drift(&ch, v, Some(a), None).unwrap());
            }
        }
    }

    #[test]
    fn kappa_two_interval_conditioning_is_dipolar() {
        let m = SleModel::DipolarStripCondInterval { kappa: 2.0, a: -1.0, b: 1.0 };
        for &(v, a, b) in &[(0.0, -1.0, 1.0), (0.7, -3.0, 2.0), (-5.0, 1.0, 1.5), (2.0, 2.0 + 1e-10, 2.0 + 3e-10)] {
            let d = drift(&m, v, Some(a), Some(b)).unwrap();
            let exact = -((0.5f64 * (v - a)).tanh() + (0.5f64 * (v - b)).tanh());
            assert!((d - exact).abs() < 1e-12, "{v} {a} {b}");
            assert!((d - dipolar_strip_interval_drift(v, a, b, 2.0)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn interval_drift_antisymmetric_configuration(a in 0.01f64..20.0, k in 0.5f64..8.0) {
            let m = SleModel::DipolarStripCondInterval { kappa: k, a: -a, b: a };
            prop_assert_eq!(drift(&m, 0.0, Some(-a), Some(a)).unwrap(), 0.0);
        }

        #[test]
        fn dipolar_half_plane_is_partition_drift(x in -5.0f64..5.0, a in -5.0f64..0.0, len in 0.1f64..5.0, k in 0.1f64..8.0) {
            let b = a + len;
            prop_assume!(x != a && x != b);
            let m = SleModel::DipolarHalfPlane { kappa: k, a, b };
            prop_assert_eq!(drift(&m, x, Some(a), Some(b)).unwrap(), log_partition_drift(x, a, b, k).unwrap());
        }
    }

    #[test]
    fn singular_configurations() {
        let m = SleModel::DipolarHalfPlane { kappa: 3.0, a: -1.0, b: 1.0 };
        assert!(matches!(drift(&m, 1.0, Some(-1.0), Some(1.0)), Err(DriverError::Singular(_))));
        assert!(drift(&m, 0.0, Some(-1.0), None).is_err());
        assert!(SleModel::DipolarHalfPlane { kappa: 3.0, a: 1.0, b: -1.0 }.validate().is_err());
        assert!(SleModel::DipolarStrip { kappa: -1.0 }.validate().is_err());
    }

    #[test]
    fn zero_kappa_base_models_stay_at_zero() {
        for m in [SleModel::DipolarStrip { kappa: 0.0 }, SleModel::ChordalHalfPlaneToInfinity { kappa: 0.0 }] {
            let p = sample_path(&m, 0.01, 1.0, derive_stream(1, 2)).unwrap();
            assert!(p.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn increment_variance() {
        let p = sample_path(&SleModel::DipolarStrip { kappa: 2.0 }, 1e-3, 100.0, derive_stream(11, 0)).unwrap();
        let inc: Vec<f64> = p.values.windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(inc.len(), 100_000);
        let mean = inc.iter().sum::<f64>() / inc.len() as f64;
        let var = inc.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (inc.len() - 1) as f64;
        assert!((var / 2e-3 - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn deterministic_per_stream() {
        let m = SleModel::DipolarStripCondInterval { kappa: 3.0, a: -1.0, b: 2.0 };
        let p = sample_path(&m, 1e-3, 0.5, derive_stream(5, 9)).unwrap();
        let q = sample_path(&m, 1e-3, 0.5, derive_stream(5, 9)).unwrap();
        assert_eq!(p, q);
        let r = sample_path(&m, 1e-3, 0.5, derive_stream(5, 10)).unwrap();
        assert_ne!(p.values, r.values);
    }

    #[test]
    fn tracks_match_a_posteriori_evolution() {
        let m = SleModel::ChordalStrip { kappa: 3.0, a: 0.5 };
        let p = sample_path(&m, 1e-3, 0.3, derive_stream(3, 0)).unwrap();
        let q = evolve_marked(Kernel::Strip, &p, 0.5, None).unwrap();
        assert_eq!(p.marked_a, q.marked_a);
    }

    #[test]
    fn chordal_toward_boundary_point_collides() {
        // the driver is attracted to its target and reaches it in finite time
        let m = SleModel::ChordalHalfPlaneToA { kappa: 2.0, a: 0.3 };
        let p = sample_path(&m, 1e-4, 10.0, derive_stream(21, 0)).unwrap();
        let t = p.collision.expect("collision");
        assert!(t < 10.0);
        assert_eq!(p.values.len(), p.marked_a.as_ref().unwrap().len());
        assert!(p.horizon() < t + 1e-12);
    }
}
