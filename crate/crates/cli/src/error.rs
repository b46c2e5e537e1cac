use sle_lab::analytics::AnalyticsError;
use sle_lab::experiments::ExperimentError;
use sle_lab::numerics::NumericsError;
use thiserror::Error;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_STATISTICAL: i32 = 2;
pub const EXIT_BREAKDOWN: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Experiment(e) if e.is_breakdown() => EXIT_BREAKDOWN,
            CliError::Analytics(AnalyticsError::Quadrature(
                NumericsError::NonConvergence { .. } | NumericsError::NonFinite { .. },
            )) => EXIT_BREAKDOWN,
            _ => EXIT_USAGE,
        }
    }
}
