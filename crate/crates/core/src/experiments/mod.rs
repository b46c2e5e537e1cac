//! Monte Carlo experiments confronting simulation with the closed forms,
//! and the deterministic identity suites.
//!
//! Sample `i` always draws from stream `i` of the master seed, and partial
//! results are reduced in fixed chunks in index order, so reports do not
//! depend on the number of worker threads.

mod equivalence;
mod hitting;
mod martingale;
mod passage;
mod reweight;
mod verify;

pub use equivalence::{equivalence_test, Expectation};
pub use hitting::hitting_histogram;
pub use martingale::{martingale_expectation, reweighted_bessel_dimension};
pub use passage::passage_field;
pub use reweight::{girsanov_reweight, ReweightTarget};
pub use verify::{commutative_diagram_deviation, verify_suite, IdentityCheck, InteqRow, Suite, VerifyReport};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::conformal::ConformalError;
use crate::drivers::{DriverError, DriverStepper, SleModel};
use crate::loewner::{FlowConfig, LoewnerError};
use crate::numerics::{derive_stream, ConfidenceInterval, NumericsError};

/// Samples per reduction chunk.
const CHUNK: u64 = 64;
/// Stream offset of the second population in two-sample experiments.
pub const SECOND_POPULATION_OFFSET: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Conformal(#[from] ConformalError),
}

impl From<LoewnerError> for ExperimentError {
    fn from(e: LoewnerError) -> Self {
        ExperimentError::Driver(DriverError::Loewner(e))
    }
}

impl ExperimentError {
    /// Whether the failure is a numerical breakdown rather than bad input.
    pub fn is_breakdown(&self) -> bool {
        matches!(
            self,
            ExperimentError::Driver(DriverError::Loewner(LoewnerError::NumericalBreakdown { .. }))
                | ExperimentError::Numerics(NumericsError::NonConvergence { .. })
                | ExperimentError::Numerics(NumericsError::NonFinite { .. })
                | ExperimentError::Analytics(AnalyticsError::Quadrature(
                    NumericsError::NonConvergence { .. } | NumericsError::NonFinite { .. }
                ))
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: SleModel,
    pub n_samples: u64,
    pub dt: f64,
    pub horizon: f64,
    pub escape_threshold: f64,
    pub master_seed: u64,
    pub max_substeps: u64,
    /// Largest tolerated fraction of undecided samples.
    pub undecided_gate: f64,
}

impl ExperimentConfig {
    pub const DEFAULT_DT: f64 = 1e-3;
    pub const DEFAULT_HORIZON: f64 = 60.0;
    pub const DEFAULT_THRESHOLD: f64 = 25.0;
    pub const DEFAULT_GATE: f64 = 0.01;

    pub fn new(model: SleModel, n_samples: u64, master_seed: u64) -> Self {
        Self {
            model,
            n_samples,
            dt: Self::DEFAULT_DT,
            horizon: Self::DEFAULT_HORIZON,
            escape_threshold: Self::DEFAULT_THRESHOLD,
            master_seed,
            max_substeps: FlowConfig::default().max_substeps,
            undecided_gate: Self::DEFAULT_GATE,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.model.validate()?;
        let bad = |m: &str| Err(ExperimentError::Config(m.into()));
        if self.n_samples == 0 {
            return bad("n_samples must be at least 1");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive");
        }
        if !(self.horizon >= self.dt && self.horizon.is_finite()) {
            return bad("horizon must be at least dt");
        }
        if !(self.escape_threshold > 0.0 && self.escape_threshold.is_finite()) {
            return bad("escape threshold must be positive");
        }
        if self.max_substeps == 0 {
            return bad("max_substeps must be positive");
        }
        if !(0.0..=1.0).contains(&self.undecided_gate) {
            return bad("undecided gate must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn flow_config(&self) -> FlowConfig {
        FlowConfig {
            escape_threshold: self.escape_threshold,
            max_substeps: self.max_substeps,
            ..FlowConfig::default()
        }
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    pub(crate) fn stepper(&self, model: SleModel, index: u64, tracked: &[f64]) -> Result<DriverStepper, ExperimentError> {
        let mut st = DriverStepper::with_tracked(model, self.dt, derive_stream(self.master_seed, index), tracked)?;
        st.set_flow_config(self.flow_config());
        Ok(st)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    InsufficientPower,
}

/// One estimated quantity: a histogram bin, a probe, a mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimate {
    pub label: String,
    pub coords: Vec<f64>,
    pub n: u64,
    pub hits: Option<u64>,
    pub estimate: f64,
    pub std_error: f64,
    pub interval: Option<ConfidenceInterval>,
    pub reference: Option<f64>,
    pub z: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub name: String,
    pub value: f64,
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
}

impl Statistic {
    pub fn info(name: &str, value: f64) -> Self {
        Self { name: name.into(), value, threshold: None, pass: None }
    }

    /// A statistic that passes when `value < threshold`.
    pub fn below(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold: Some(threshold), pass: Some(value < threshold) }
    }

    /// A statistic that passes when `value > threshold`.
    pub fn above(name: &str, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), value, threshold: Some(threshold), pass: Some(value > threshold) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub parameters: BTreeMap<String, Vec<f64>>,
    pub cells: Vec<CellEstimate>,
    pub statistics: Vec<Statistic>,
    pub undecided: u64,
    pub undecided_fraction: f64,
    pub excluded: u64,
    pub wall_clock_seconds: f64,
    pub verdict: Verdict,
    pub diagnosis: Option<String>,
}

impl ExperimentReport {
    pub(crate) fn new(experiment: &str, config: ExperimentConfig) -> Self {
        Self {
            experiment: experiment.into(),
            config,
            parameters: BTreeMap::new(),
            cells: Vec::new(),
            statistics: Vec::new(),
            undecided: 0,
            undecided_fraction: 0.0,
            excluded: 0,
            wall_clock_seconds: 0.0,
            verdict: Verdict::Fail,
            diagnosis: None,
        }
    }

    pub(crate) fn param(&mut self, name: &str, values: Vec<f64>) {
        self.parameters.insert(name.into(), values);
    }

    /// Pass when every cell and statistic carrying a decision passes and
    /// the undecided gate holds.
    pub(crate) fn settle(&mut self) {
        let gate = self.undecided_fraction <= self.config.undecided_gate;
        let cells = self.cells.iter().all(|c| c.pass != Some(false));
        let stats = self.statistics.iter().all(|s| s.pass != Some(false));
        self.verdict = if gate && cells && stats { Verdict::Pass } else { Verdict::Fail };
        if !gate {
            self.diagnosis = Some(format!(
                "undecided fraction {:.3e} exceeds the gate {}; raise the horizon or lower the escape threshold",
                self.undecided_fraction, self.config.undecided_gate
            ));
        } else if self.verdict == Verdict::Fail && self.diagnosis.is_none() {
            let mut failed: Vec<&str> = self.cells.iter().filter(|c| c.pass == Some(false)).map(|c| c.label.as_str()).collect();
            failed.extend(self.statistics.iter().filter(|s| s.pass == Some(false)).map(|s| s.name.as_str()));
            self.diagnosis = Some(format!("failed: {}", failed.join(", ")));
        }
    }
}

/// Runs `fold` over sample indices `offset..offset + n` in chunks of
/// [`CHUNK`], in parallel, and merges the chunk results in index order.
pub(crate) fn run_indexed<A, I, F, M>(n: u64, offset: u64, init: I, fold: F, merge: M) -> Result<A, ExperimentError>
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, u64) -> Result<(), ExperimentError> + Sync,
    M: Fn(&mut A, A),
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Result<A, ExperimentError>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                fold(&mut acc, offset + i)?;
            }
            Ok(acc)
        })
        .collect();
    let mut total = init();
    for p in parts {
        merge(&mut total, p?);
    }
    Ok(total)
}

/// One-sample score of `hits/n` against a reference proportion. For a
/// degenerate reference the cell passes only on an exact match.
pub(crate) fn proportion_cell(label: String, coords: Vec<f64>, hits: u64, n: u64, reference: Option<f64>, threshold: f64) -> Result<CellEstimate, ExperimentError> {
    let interval = if n > 0 { Some(crate::numerics::wilson_interval(hits, n, 0.95)?) } else { None };
    let p_hat = if n > 0 { hits as f64 / n as f64 } else { f64::NAN };
    let se_hat = if n > 0 { (p_hat * (1.0 - p_hat) / n as f64).sqrt() } else { f64::NAN };
    let (z, pass) = match reference {
        None => (None, None),
        Some(_) if n == 0 => (None, Some(false)),
        Some(p) if p <= 0.0 || p >= 1.0 => (None, Some(p_hat == p)),
        Some(p) => {
            let z = (p_hat - p) / (p * (1.0 - p) / n as f64).sqrt();
            (Some(z), Some(z.abs() < threshold))
        }
    };
    Ok(CellEstimate { label, coords, n, hits: Some(hits), estimate: p_hat, std_error: se_hat, interval, reference, z, pass })
}

/// Mean and standard error from running sums.
pub(crate) fn mean_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    let mean = sum / nf;
    if n == 1 {
        return (mean, f64::NAN);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}
