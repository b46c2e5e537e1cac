use serde::{Deserialize, Serialize};

use super::{check_kappa, AnalyticsError};

/// `α(ρ, κ) = (8 − 2κ + 2ρ)ρ / (8κ)`, the `|g′|` exponent of a force point.
///
/// ```
/// use sle_lab::analytics::alpha;
/// assert_eq!(alpha(-4.0, 3.0), 1.0);
/// ```
pub fn alpha(rho: f64, kappa: f64) -> f64 {
    (8.0 - 2.0 * kappa + 2.0 * rho) * rho / (8.0 * kappa)
}

/// Force points `x_j` with weights `ρ_j` for the SLE(κ,ρ) martingale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleSpec {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub kappa: f64,
}

impl MartingaleSpec {
    pub fn new(points: Vec<f64>, weights: Vec<f64>, kappa: f64) -> Result<Self, AnalyticsError> {
        check_kappa(kappa)?;
        if points.len() != weights.len() {
            return Err(AnalyticsError::Domain(format!(
                "{} points but {} weights",
                points.len(),
                weights.len()
            )));
        }
        if points.iter().chain(&weights).any(|v| !v.is_finite()) {
            return Err(AnalyticsError::Domain("non-finite point or weight".into()));
        }
        for (i, x) in points.iter().enumerate() {
            if points[..i].contains(x) {
                return Err(AnalyticsError::Domain(format!("repeated force point {x}")));
            }
        }
        Ok(Self { points, weights, kappa })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Dipolar SLE in `H` from 0 to `[−1,1]^c`: force points ±1 with weight `(κ−6)/2`.
pub fn dipolar_spec(kappa: f64) -> Result<MartingaleSpec, AnalyticsError> {
    let r = 0.5 * (kappa - 6.0);
    MartingaleSpec::new(vec![-1.0, 1.0], vec![r, r], kappa)
}

/// Dipolar SLE conditioned to end at `a`: weight −4 at `a` and `(κ−2)/2` at ±1.
pub fn conditioned_spec(a: f64, kappa: f64) -> Result<MartingaleSpec, AnalyticsError> {
    if !(a.abs() > 1.0) {
        return Err(AnalyticsError::Domain(format!("endpoint {a} must lie in [-1,1]^c")));
    }
    let r = 0.5 * (kappa - 2.0);
    MartingaleSpec::new(vec![a, -1.0, 1.0], vec![-4.0, r, r], kappa)
}

/// `X_j = g_t(x_j) − W_t` and `|g′_t(x_j)|` for each force point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleState {
    pub x: Vec<f64>,
    pub gprime: Vec<f64>,
}

impl MartingaleState {
    /// The state at `t = 0` for a driver started at `w0`.
    pub fn initial(spec: &MartingaleSpec, w0: f64) -> Self {
        Self {
            x: spec.points.iter().map(|p| p - w0).collect(),
            gprime: vec![1.0; spec.len()],
        }
    }
}

/// `ln M_t`, with `L = |g′|^α |X|^{ρ/κ}` per point and
/// `Q = |X_i − X_j|^{ρ_i ρ_j/(2κ)}` per pair.
pub fn log_martingale_value(
    spec: &MartingaleSpec,
    state: &MartingaleState,
) -> Result<f64, AnalyticsError> {
    let n = spec.len();
    if state.x.len() != n || state.gprime.len() != n {
        return Err(AnalyticsError::Domain("state does not match spec".into()));
    }
    let k = spec.kappa;
    let mut acc = 0.0;
    for j in 0..n {
        let (x, gp, rho) = (state.x[j], state.gprime[j], spec.weights[j]);
        if !(gp > 0.0) {
            return Err(AnalyticsError::Domain(format!("g' = {gp} must be positive")));
        }
        if rho == 0.0 {
            continue;
        }
        if x == 0.0 {
            return Err(AnalyticsError::Singular(format!("force point {j} at the driver")));
        }
        acc += alpha(rho, k) * gp.ln() + rho / k * x.abs().ln();
        for i in 0..j {
            let e = spec.weights[i] * rho / (2.0 * k);
            if e == 0.0 {
                continue;
            }
            let d = (state.x[i] - x).abs();
            if d == 0.0 {
                return Err(AnalyticsError::Singular(format!("force points {i} and {j} coincide")));
            }
            acc += e * d.ln();
        }
    }
    Ok(acc)
}

/// `M_t`.
pub fn martingale_value(spec: &MartingaleSpec, state: &MartingaleState) -> Result<f64, AnalyticsError> {
    Ok(log_martingale_value(spec, state)?.exp())
}

/// `M̂_t = M_t / M_0` for a driver started at `w0`.
pub fn martingale_normalized(
    spec: &MartingaleSpec,
    state: &MartingaleState,
    w0: f64,
) -> Result<f64, AnalyticsError> {
    let m0 = log_martingale_value(spec, &MartingaleState::initial(spec, w0))?;
    Ok((log_martingale_value(spec, state)? - m0).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics::halfplane_hitting_density_unnormalized;
    use proptest::prelude::*;

    #[test]
    fn alpha_values() {
        assert_eq!(alpha(0.0, 3.0), 0.0);
        for &k in &[1.0, 2.0, 3.0, 6.0, 7.5] {
            assert!((alpha(-4.0, k) - 1.0).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn alpha_coincides_for_dipolar_and_conditioned_weights(k in 0.1f64..8.0) {
            let a = alpha(0.5 * (k - 2.0), k);
            let b = alpha(0.5 * (k - 6.0), k);
            prop_assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
        }

        #[test]
        fn normalized_value_is_one_at_start(k in 0.5f64..8.0, a in 1.01f64..10.0, w0 in -0.5f64..0.5) {
            let spec = conditioned_spec(a, k).unwrap();
            let m = martingale_normalized(&spec, &MartingaleState::initial(&spec, w0), w0).unwrap();
            prop_assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dipolar_spec_shape() {
        let s = dipolar_spec(3.0).unwrap();
        assert_eq!(s.points, vec![-1.0, 1.0]);
        assert_eq!(s.weights, vec![-1.5, -1.5]);
    }

    #[test]
    fn initial_conditioned_value_is_proportional_to_hitting_density() {
        for &k in &[2.0, 3.0, 5.0] {
            let ratios: Vec<f64> = [-4.0, -1.5, 1.2, 2.0, 9.0]
                .iter()
                .map(|&a| {
                    let s = conditioned_spec(a, k).unwrap();
                    martingale_value(&s, &MartingaleState::initial(&s, 0.0)).unwrap()
                        / halfplane_hitting_density_unnormalized(a, k).unwrap()
                })
                .collect();
            for r in &ratios {
                assert!((r / ratios[0] - 1.0).abs() < 1e-12, "{k} {ratios:?}");
            }
        }
    }

    #[test]
    fn explicit_product() {
        let s = MartingaleSpec::new(vec![-1.0, 2.0], vec![1.0, 3.0], 2.0).unwrap();
        let st = MartingaleState { x: vec![-0.5, 1.5], gprime: vec![0.8, 0.6] };
        let exact = 0.8f64.powf(alpha(1.0, 2.0))
            * 0.5f64.powf(0.5)
            * 0.6f64.powf(alpha(3.0, 2.0))
            * 1.5f64.powf(1.5)
            * 2.0f64.powf(3.0 / 4.0);
        assert!((martingale_value(&s, &st).unwrap() / exact - 1.0).abs() < 1e-14);
    }

    #[test]
    fn errors() {
        assert!(MartingaleSpec::new(vec![1.0, 1.0], vec![1.0, 1.0], 2.0).is_err());
        assert!(MartingaleSpec::new(vec![1.0], vec![1.0, 1.0], 2.0).is_err());
        assert!(conditioned_spec(0.5, 2.0).is_err());
        let s = MartingaleSpec::new(vec![-1.0, 1.0], vec![1.0, 1.0], 2.0).unwrap();
        let st = MartingaleState { x: vec![0.3, 0.3], gprime: vec![1.0, 1.0] };
        assert!(matches!(martingale_value(&s, &st), Err(AnalyticsError::Singular(_))));
        let st = MartingaleState { x: vec![0.0, 0.3], gprime: vec![1.0, 1.0] };
        assert!(matches!(martingale_value(&s, &st), Err(AnalyticsError::Singular(_))));
    }
}
