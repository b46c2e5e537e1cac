use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use statrs::function::beta::beta;

use crate::analytics::{
    alpha, check_integral_identity, conditioned_spec, conditioning_drift_f, dipolar2_right_passage,
    dipolar2_right_passage_integral, halfplane_hitting_density_unnormalized, hit_right_prob,
    integral_identity_constant, interval_strip_map_derivative, log_conditioning_partition,
    log_partition_dipolar_unnormalized, log_partition_drift, martingale_value, MartingaleState,
};
use crate::conformal::{artanh, strip_automorphism, strip_to_dipolar_half_plane, weight_h};
use crate::drivers::{dipolar_strip_interval_drift, drift, SleModel};
use crate::loewner::{flow_point, DriverIncrement, DrivingPath, FlowConfig, Kernel, MarkedFlow, PointFate, PointFlow};
use crate::numerics::derive_stream;
use crate::{Complex64, ComplexPoint};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Inteq,
    Flows,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl IdentityCheck {
    fn new(name: &str, max_deviation: f64, tolerance: f64) -> Self {
        Self { name: name.into(), max_deviation, tolerance, passed: max_deviation < tolerance }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteqRow {
    pub kappa: f64,
    pub p: f64,
    pub q: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub checks: Vec<IdentityCheck>,
    pub inteq_table: Vec<InteqRow>,
    pub passed: bool,
}

/// Kappa values for the integral identity when none are given.
pub const INTEQ_KAPPAS: [f64; 5] = [2.0, 8.0 / 3.0, 3.0, 4.0, 6.0];
/// The five `(P, Q)` configurations of the integral identity.
pub const INTEQ_PAIRS: [(f64, f64); 5] = [(-1.0, 1.0), (-2.0, 3.0), (-0.1, 5.0), (-7.0, 0.4), (-1.3, 1.7)];
const SEED: u64 = 0x5eed;

/// Runs a deterministic identity suite. `kappas` restricts the integral
/// identity table; empty means [`INTEQ_KAPPAS`].
pub fn verify_suite(suite: Suite, kappas: &[f64]) -> Result<VerifyReport, ExperimentError> {
    let mut checks = Vec::new();
    let mut table = Vec::new();
    if matches!(suite, Suite::Identities | Suite::All) {
        checks.extend(identities()?);
    }
    if matches!(suite, Suite::Inteq | Suite::All) {
        let ks = if kappas.is_empty() { &INTEQ_KAPPAS[..] } else { kappas };
        let (c, t) = inteq(ks)?;
        checks.extend(c);
        table = t;
    }
    if matches!(suite, Suite::Flows | Suite::All) {
        checks.extend(flows()?);
    }
    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { suite, checks, inteq_table: table, passed })
}

fn identities() -> Result<Vec<IdentityCheck>, ExperimentError> {
    let mut rng = derive_stream(SEED, 0);
    let mut u = move |lo: f64, hi: f64| lo + (hi - lo) * rng.uniform();
    let mut out = Vec::new();

    let mut dev = 0.0f64;
    for _ in 0..1000 {
        let (v, a) = (u(-10.0, 10.0), u(-10.0, 10.0));
        let cp = drift(&SleModel::DipolarStripCondPoint { kappa: 2.0, a }, v, Some(a), None)?;
        let ch = drift(&SleModel::ChordalStrip { kappa: 2.0, a }, v, Some(a), None)?;
        dev = dev.max((cp - ch).abs());
    }
    out.push(IdentityCheck::new("kappa2_point_conditioned_drift_equals_chordal_strip", dev, 1e-12));

    let mut dev = 0.0f64;
    for _ in 0..1000 {
        let (v, a) = (u(-10.0, 10.0), u(-10.0, 10.0));
        let b = a + u(1e-9, 10.0);
        let m = SleModel::DipolarStripCondInterval { kappa: 2.0, a, b };
        let ci = drift(&m, v, Some(a), Some(b))?;
        dev = dev.max((ci - dipolar_strip_interval_drift(v, a, b, 2.0)).abs());
        dev = dev.max((ci + (0.5 * (v - a)).tanh() + (0.5 * (v - b)).tanh()).abs());
    }
    out.push(IdentityCheck::new("kappa2_interval_conditioned_drift_equals_dipolar_interval", dev, 1e-10));

    let mut dev = 0.0f64;
    for _ in 0..1000 {
        let (x, a, k) = (u(-5.0, 5.0), u(-5.0, 0.0), u(0.1, 8.0));
        let b = a + u(0.1, 5.0);
        let m = SleModel::DipolarHalfPlane { kappa: k, a, b };
        dev = dev.max((log_partition_drift(x, a, b, k)? - drift(&m, x, Some(a), Some(b))?).abs());
    }
    out.push(IdentityCheck::new("partition_drift_equals_dipolar_half_plane_drift", dev, 1e-12));

    let mut dev = 0.0f64;
    for _ in 0..200 {
        let (k, a) = (u(0.5, 8.0), u(-3.0, 0.0));
        let b = a + u(0.1, 4.0);
        let h = weight_h(1.0, 2.0, k)?;
        let g = |x: f64| -> Result<f64, ExperimentError> {
            Ok(log_partition_dipolar_unnormalized(x, a, b, k)? - h * interval_strip_map_derivative(x, a, b).abs().ln())
        };
        let (x1, x2) = (a + u(0.01, 0.99) * (b - a), a + u(0.01, 0.99) * (b - a));
        dev = dev.max((g(x1)? - g(x2)?).abs());
    }
    out.push(IdentityCheck::new("partition_times_map_derivative_pow_minus_h12_is_x_independent", dev, 1e-9));

    let mut dev = 0.0f64;
    for _ in 0..200 {
        let (v, a, k) = (u(-2.0, 2.0), u(-3.0, 2.0), u(1.0, 8.0));
        let b = a + u(0.2, 4.0);
        let h = 1e-6;
        let d = (log_conditioning_partition(v + h, a, b, k)? - log_conditioning_partition(v - h, a, b, k)?) / (2.0 * h);
        dev = dev.max((d + conditioning_drift_f(a - v, b - v, k)?).abs());
    }
    out.push(IdentityCheck::new("conditioning_partition_log_derivative_is_minus_f", dev, 1e-6));

    let mut dev = 0.0f64;
    for i in 0..6 {
        for j in 0..6 {
            let w = Complex64::new(-2.0 + 0.8 * i as f64, PI / 6.0 + (2.0 * PI / 3.0) * j as f64 / 5.0);
            dev = dev.max((dipolar2_right_passage(w)? - dipolar2_right_passage_integral(w)?).abs());
        }
    }
    out.push(IdentityCheck::new("p2_closed_form_equals_integral", dev, 1e-7));

    let mut dev = 0.0f64;
    for i in 0..100 {
        let a = -8.0 + 0.16 * i as f64;
        dev = dev.max((hit_right_prob(a, 2.0)? - (1.0 - (0.5 * a).tanh()) / 2.0).abs());
        let b = a + 0.05 * (i + 1) as f64;
        let exact = -((0.5 * a).tanh() + (0.5 * b).tanh()) / 2.0;
        dev = dev.max((conditioning_drift_f(a, b, 2.0)? - exact).abs());
    }
    out.push(IdentityCheck::new("kappa2_hitting_law_and_f_closed_forms", dev, 1e-10));

    let mut dev = 0.0f64;
    for i in 0..100 {
        let k = 0.08 * (i + 1) as f64;
        dev = dev.max((alpha(0.5 * (k - 2.0), k) - alpha(0.5 * (k - 6.0), k)).abs());
    }
    out.push(IdentityCheck::new("alpha_equal_for_dipolar_and_conditioned_weights", dev, 1e-12));

    let mut dev = 0.0f64;
    for _ in 0..200 {
        let (v, a) = (u(-3.0, 3.0), u(-3.0, 3.0));
        let b = a + u(0.05, 4.0);
        let phi = strip_automorphism(v, a, b)?;
        let closed = -((0.5 * (v - a)).tanh() + (0.5 * (v - b)).tanh()) / 2.0;
        dev = dev.max((phi.tip_log_derivative() - closed).abs());
    }
    out.push(IdentityCheck::new("tip_log_derivative_of_strip_automorphism", dev, 1e-12));

    let mut dev = 0.0f64;
    for &k in &[2.0, 3.0, 5.0] {
        let ratio = |a: f64| -> Result<f64, ExperimentError> {
            let s = conditioned_spec(a, k)?;
            Ok(martingale_value(&s, &MartingaleState::initial(&s, 0.0))? / halfplane_hitting_density_unnormalized(a, k)?)
        };
        let r0 = ratio(2.0)?;
        for &a in &[-5.0, -1.2, 1.5, 7.0] {
            dev = dev.max((ratio(a)? / r0 - 1.0).abs());
        }
    }
    out.push(IdentityCheck::new("conditioned_martingale_at_start_is_proportional_to_hitting_density", dev, 1e-10));

    let mut dev = 0.0f64;
    for &k in &[2.0, 3.0, 5.0] {
        let ratio = |a: f64| -> Result<f64, ExperimentError> {
            let x = strip_to_dipolar_half_plane(ComplexPoint::new(a, PI)).re;
            let strip = (0.5 * a).cosh().powf(-4.0 / k) * 2.0 * (0.5 * a).sinh().powi(2);
            Ok(strip / halfplane_hitting_density_unnormalized(x, k)?)
        };
        let r0 = ratio(1.0)?;
        for &a in &[-6.0, -2.0, -0.3, 0.2, 3.0, 8.0] {
            dev = dev.max((ratio(a)? / r0 - 1.0).abs());
        }
    }
    out.push(IdentityCheck::new("half_plane_hitting_density_is_strip_pushforward", dev, 1e-6));

    out.push(IdentityCheck::new("commutative_diagram_half_plane_to_strip", commutative_diagram_deviation(1e-4)?, 1e-6));
    Ok(out)
}

fn inteq(kappas: &[f64]) -> Result<(Vec<IdentityCheck>, Vec<InteqRow>), ExperimentError> {
    let mut checks = Vec::new();
    let mut table = Vec::new();
    for &k in kappas {
        let mut ratios = Vec::new();
        for &(p, q) in &INTEQ_PAIRS {
            let r = check_integral_identity(p, q, k)?;
            table.push(InteqRow { kappa: k, p, q, ratio: r });
            ratios.push(r);
        }
        let max = ratios.iter().cloned().fold(f64::MIN, f64::max);
        let min = ratios.iter().cloned().fold(f64::MAX, f64::min);
        checks.push(IdentityCheck::new(&format!("inteq_ratio_relative_spread_kappa_{k:.6}"), (max - min) / min, 1e-5));
        let c = integral_identity_constant(k)?;
        checks.push(IdentityCheck::new(&format!("inteq_constant_second_route_kappa_{k:.6}"), (c / ratios[0] - 1.0).abs(), 1e-8));
        let b = beta(2.0 / k, 2.0 / k);
        checks.push(IdentityCheck::new(&format!("inteq_constant_is_beta_kappa_{k:.6}"), (c / b - 1.0).abs(), 1e-8));
        if k == 2.0 {
            checks.push(IdentityCheck::new("inteq_ratio_is_one_at_kappa_2", (ratios[0] - 1.0).abs(), 1e-8));
        }
    }
    Ok((checks, table))
}

fn flows() -> Result<Vec<IdentityCheck>, ExperimentError> {
    let dt = 1e-4;
    let path = DrivingPath::constant(0.0, dt, 1.0);
    let t = path.horizon();
    let mut dev = 0.0f64;
    for z in [Complex64::new(0.5, 1.5), Complex64::new(1.0, 1.0), Complex64::new(-2.0, 0.5), Complex64::new(0.3, 2.0)] {
        let mut exact = (z * z + 4.0 * t).sqrt();
        if exact.im < 0.0 {
            exact = -exact;
        }
        match flow_point(Kernel::HalfPlane, z, &path, 25.0)? {
            PointFate::Flowing(g) => dev = dev.max((g - exact).norm()),
            _ => dev = f64::INFINITY,
        }
    }
    let mut checks = vec![IdentityCheck::new("half_plane_constant_driver_square_root_law", dev, 1e-8)];

    let mut dev = 0.0f64;
    for z in [Complex64::new(0.3, 1.0), Complex64::new(0.5, 1.5), Complex64::new(-1.0, 2.5), Complex64::new(2.0, 0.3)] {
        match flow_point(Kernel::Strip, z, &path, 25.0)? {
            PointFate::Flowing(g) => dev = dev.max(((0.5 * g).cosh() - (0.5 * t).exp() * (0.5 * z).cosh()).norm()),
            _ => dev = f64::INFINITY,
        }
    }
    checks.push(IdentityCheck::new("strip_constant_driver_cosh_law", dev, 1e-8));

    let cfg = FlowConfig::default();
    let mut dev = 0.0f64;
    for a in [-2.0, 0.5, 1.0, 3.0] {
        let mut m = MarkedFlow::new(Kernel::Strip, a, 0.0)?;
        let inc = DriverIncrement::new(0.0, 0.0, dt);
        for _ in 0..path.values.len() - 1 {
            m.advance(&inc, &cfg)?;
        }
        dev = dev.max(((0.5 * m.position()).sinh() - (0.5 * t).exp() * (0.5 * a).sinh()).abs());
    }
    checks.push(IdentityCheck::new("strip_marked_point_sinh_law", dev, 1e-8));
    Ok(checks)
}

/// Maximum distance, at strip capacity `s = 1/2`, between the two ways
/// around the diagram `g ∘ F = F_t ∘ h_t`: probe points are flowed by a
/// half-plane Loewner chain with a smooth deterministic driver `ξ(t)` and
/// mapped to the strip by `F_t`, or mapped by `F` first and flowed in the
/// strip with the induced driver `V_s` and time change `ds = F_t′(ξ)² dt`.
///
/// `F_t` is `tanh((F_t(w) − A)/2) + tanh((A − V)/2) = l(w − ξ)`; with
/// `T = tanh((A − V)/2)` and `F_t′(ξ) = 2l/(1 − T²)` the parameters obey
/// `dA = F′²T dt`, `dl = −F′² l (1 − T²)/2 dt`, `dV = F′ dξ + 3F′²T dt`.
pub fn commutative_diagram_deviation(dt: f64) -> Result<f64, ExperimentError> {
    let xi = |t: f64| 0.8 * (3.0 * t).sin() + 0.5 * t;
    let xi_dot = |t: f64| 2.4 * (3.0 * t).cos() + 0.5;
    let probes = [Complex64::new(0.3, 0.8), Complex64::new(-1.0, 0.5), Complex64::new(2.0, 2.0)];
    let n = probes.len();

    // state: A, l, V, s, then h_j
    #[derive(Clone)]
    struct State {
        a: f64,
        l: f64,
        v: f64,
        s: f64,
        h: Vec<Complex64>,
    }
    let deriv = |t: f64, y: &State| -> State {
        let tt = (0.5 * (y.a - y.v)).tanh();
        let fp = 2.0 * y.l / (1.0 - tt * tt);
        let rate = fp * fp;
        State {
            a: rate * tt,
            l: -0.5 * rate * y.l * (1.0 - tt * tt),
            v: fp * xi_dot(t) + 3.0 * rate * tt,
            s: rate,
            h: y.h.iter().map(|&h| 2.0 / (h - xi(t))).collect(),
        }
    };
    let axpy = |y: &State, k: &State, c: f64| State {
        a: y.a + c * k.a,
        l: y.l + c * k.l,
        v: y.v + c * k.v,
        s: y.s + c * k.s,
        h: y.h.iter().zip(&k.h).map(|(a, b)| a + c * b).collect(),
    };
    let f_t = |y: &State, t: f64, w: Complex64| -> Complex64 {
        let tt = (0.5 * (y.a - y.v)).tanh();
        y.a + 2.0 * artanh(y.l * (w - xi(t)) - tt)
    };

    let a0 = 0.6;
    let mut y = State { a: a0, l: 1.0, v: 0.0, s: 0.0, h: probes.to_vec() };
    let mut flows = probes
        .iter()
        .map(|&w| PointFlow::new(Kernel::Strip, f_t(&y, 0.0, w), 0.0))
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = FlowConfig::default();
    let mut t = 0.0;
    while y.s < 0.5 {
        let k1 = deriv(t, &y);
        let k2 = deriv(t + 0.5 * dt, &axpy(&y, &k1, 0.5 * dt));
        let k3 = deriv(t + 0.5 * dt, &axpy(&y, &k2, 0.5 * dt));
        let k4 = deriv(t + dt, &axpy(&y, &k3, dt));
        let mut next = y.clone();
        for (k, c) in [(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)] {
            next = axpy(&next, k, c * dt / 6.0);
        }
        let inc = DriverIncrement::new(y.v, next.v, next.s - y.s);
        for f in flows.iter_mut() {
            f.advance(&inc, &cfg)?;
        }
        y = next;
        t += dt;
    }
    let mut dev = 0.0f64;
    for j in 0..n {
        let other = f_t(&y, t, y.h[j]);
        dev = dev.max((flows[j].position() - other).norm());
    }
    Ok(dev)
}
