use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "sle-lab", version, about = "Monte Carlo and identity checks for chordal and dipolar SLE")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Histogram of the strip endpoint over bins of the upper boundary.
    Hitting(HittingArgs),
    /// Right-passage field on a grid of strip points.
    Passage(PassageArgs),
    /// Deterministic identity suites.
    Verify(VerifyArgs),
    /// Two-sample comparison of conditioned-to-point and chordal strip SLE.
    Equivalence(EquivalenceArgs),
    /// Mean of the normalized SLE(κ,ρ) martingale over chordal paths.
    Martingale(MartingaleArgs),
    /// Girsanov reweighting against direct simulation.
    Reweight(ReweightArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Hitting(_) => "hitting",
            Command::Passage(_) => "passage",
            Command::Verify(_) => "verify",
            Command::Equivalence(_) => "equivalence",
            Command::Martingale(_) => "martingale",
            Command::Reweight(_) => "reweight",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Hitting(a) => &a.common,
            Command::Passage(a) => &a.common,
            Command::Verify(a) => &a.common,
            Command::Equivalence(a) => &a.common,
            Command::Martingale(a) => &a.common,
            Command::Reweight(a) => &a.common,
        }
    }
}

/// Flags shared by every command. Unset flags fall back to the config file,
/// then to built-in defaults.
#[derive(Debug, Args)]
pub struct Common {
    #[arg(long, allow_negative_numbers = true)]
    pub kappa: Option<f64>,
    #[arg(long = "a", allow_negative_numbers = true)]
    pub a: Option<f64>,
    #[arg(long = "b", allow_negative_numbers = true)]
    pub b: Option<f64>,
    /// Number of samples.
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Largest simulated capacity.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Escape threshold on |Re(g − V)| deciding sides in the strip.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Master seed; mandatory for Monte Carlo commands.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory (default: $SLE_LAB_OUT, then the working directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// key=value file supplying defaults for the flags above.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub max_substeps: Option<u64>,
    /// Largest tolerated fraction of undecided samples.
    #[arg(long)]
    pub gate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StripModel {
    Dipolar,
    CondInterval,
    CondPoint,
    Chordal,
}

#[derive(Debug, Args)]
pub struct HittingArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub model: Option<StripModel>,
    /// Interior bin edges on the upper boundary, e.g. `--edges=-1,0,1`.
    #[arg(long, allow_hyphen_values = true)]
    pub edges: Option<String>,
}

#[derive(Debug, Args)]
pub struct PassageArgs {
    #[command(flatten)]
    pub common: Common,
    /// `dipolar` or `chordal` (toward iπ + a).
    #[arg(long, value_enum)]
    pub model: Option<StripModel>,
    /// `RxC`: R values of Re w in [−u_max, u_max], C values of Im w in (0, π).
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub u_max: Option<f64>,
    /// Tabulate the closed form only.
    #[arg(long)]
    pub analytic_only: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SuiteArg {
    Identities,
    Inteq,
    Flows,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub suite: Option<SuiteArg>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExpectArg {
    Equal,
    Different,
}

#[derive(Debug, Args)]
pub struct EquivalenceArgs {
    #[command(flatten)]
    pub common: Common,
    /// Target `iπ + point` on the upper boundary.
    #[arg(long, allow_negative_numbers = true)]
    pub point: Option<f64>,
    /// Probe points `re:im`, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    pub probes: Option<String>,
    /// Default: `equal` at κ = 2, `different` otherwise.
    #[arg(long, value_enum)]
    pub expect: Option<ExpectArg>,
    /// Cumulative sample counts for staged runs, comma separated.
    #[arg(long)]
    pub stages: Option<String>,
}

#[derive(Debug, Args)]
pub struct MartingaleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Force points on the real line, e.g. `--points=-1,1`.
    #[arg(long, allow_hyphen_values = true)]
    pub points: Option<String>,
    /// Weights, or `auto-dipolar` ((κ−6)/2 each), or `auto-conditioned`
    /// (−4 at the first point, (κ−2)/2 at the others).
    #[arg(long, allow_hyphen_values = true)]
    pub rhos: Option<String>,
    /// Evaluation time.
    #[arg(long)]
    pub t: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Conditioned,
    Trivial,
    Exponential,
}

#[derive(Debug, Args)]
pub struct ReweightArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_enum)]
    pub target: Option<TargetArg>,
    /// Same as `--target trivial`.
    #[arg(long)]
    pub trivial: bool,
    /// Observable threshold `iπ + probe` for interval targets.
    #[arg(long, allow_negative_numbers = true)]
    pub probe: Option<f64>,
    /// Tilt of the exponential martingale.
    #[arg(long, allow_negative_numbers = true)]
    pub x: Option<f64>,
    /// Stopping time (default: the horizon for interval targets, 1 otherwise).
    #[arg(long)]
    pub t: Option<f64>,
}
