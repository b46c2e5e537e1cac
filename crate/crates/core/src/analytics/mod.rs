//! Closed-form quantities: hitting laws, conditioned drifts, passage
//! probabilities, SLE(κ,ρ) martingales, partition functions and the
//! integral identity behind the three-force-point conditioning.
//!
//! Formulas stated only up to a constant are exposed with an
//! `_unnormalized` suffix; the plain names are normalized.

mod hitting;
mod martingale;
mod partition;
mod passage;

pub use hitting::{
    conditioning_drift_f, cosh_power_integral, hit_density_unnormalized, hit_interval_prob,
    hit_right_prob, log_cosh_power_integral, total_hit_mass,
};
pub use martingale::{
    alpha, conditioned_spec, dipolar_spec, log_martingale_value, martingale_normalized,
    martingale_value, MartingaleSpec, MartingaleState,
};
pub use partition::{
    check_integral_identity, conditioning_partition, halfplane_hitting_density,
    halfplane_hitting_density_unnormalized, integral_identity_constant, log_conditioning_partition,
    interval_strip_map_derivative, log_partition_dipolar_unnormalized, log_partition_drift,
    substitution_x,
};
pub use passage::{
    chordal_strip_right_passage, dipolar2_right_passage, dipolar2_right_passage_integral,
    schramm_right_passage,
};

use thiserror::Error;

use crate::conformal::ConformalError;
use crate::numerics::NumericsError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("outside the domain: {0}")]
    Domain(String),
    #[error("singular configuration: {0}")]
    Singular(String),
    #[error(transparent)]
    Quadrature(#[from] NumericsError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

pub(crate) fn check_kappa(kappa: f64) -> Result<(), AnalyticsError> {
    if kappa > 0.0 && kappa.is_finite() {
        Ok(())
    } else {
        Err(AnalyticsError::Domain(format!("kappa must be positive, got {kappa}")))
    }
}
