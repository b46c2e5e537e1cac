use std::time::Instant;

use crate::analytics::hit_right_prob;
use crate::drivers::SleModel;
use crate::loewner::Kernel;
use crate::numerics::{bonferroni_threshold, chi_square_sf, two_sided_p, FAMILYWISE_SIGMA};

use super::{proportion_cell, run_indexed, ExperimentConfig, ExperimentError, ExperimentReport, Statistic};

/// Finite interior edges, sorted and distinct; infinite entries are dropped.
fn interior_edges(edges: &[f64]) -> Result<Vec<f64>, ExperimentError> {
    let inner: Vec<f64> = edges.iter().copied().filter(|e| e.is_finite()).collect();
    if edges.iter().any(|e| e.is_nan()) {
        return Err(ExperimentError::Config("NaN bin edge".into()));
    }
    if inner.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(ExperimentError::Config("bin edges must be strictly increasing".into()));
    }
    if inner.is_empty() {
        return Err(ExperimentError::Config("need at least one finite bin edge".into()));
    }
    Ok(inner)
}

/// Law of the endpoint on the upper boundary, as the probability of `(lo, hi)`.
fn bin_reference(model: &SleModel, lo: f64, hi: f64) -> Result<Option<f64>, ExperimentError> {
    let f = |x: f64, k: f64| hit_right_prob(x, k);
    Ok(match *model {
        SleModel::DipolarStrip { kappa } => Some(f(lo, kappa)? - f(hi, kappa)?),
        SleModel::DipolarStripCondInterval { kappa, a, b } => {
            let (l, h) = (lo.max(a), hi.min(b));
            if l >= h {
                Some(0.0)
            } else {
                Some((f(l, kappa)? - f(h, kappa)?) / (f(a, kappa)? - f(b, kappa)?))
            }
        }
        SleModel::DipolarStripCondPoint { a, .. } | SleModel::ChordalStrip { a, .. } => {
            if a == lo || a == hi {
                return Err(ExperimentError::Config(format!("target {a} sits on a bin edge")));
            }
            Some(if lo < a && a < hi { 1.0 } else { 0.0 })
        }
        _ => None,
    })
}

/// Histogram of the endpoint of the curve on the upper strip boundary over
/// the bins cut by `bin_edges`. Each edge is flowed as a marked point; the
/// endpoint lies right of an edge when the edge escapes to the left end.
///
/// ```no_run
/// use sle_lab::drivers::SleModel;
/// use sle_lab::experiments::{hitting_histogram, ExperimentConfig};
/// let cfg = ExperimentConfig::new(SleModel::DipolarStrip { kappa: 2.0 }, 1000, 42);
/// let report = hitting_histogram(&cfg, &[-1.0, 0.0, 1.0]).unwrap();
/// assert_eq!(report.cells.len(), 4);
/// ```
pub fn hitting_histogram(cfg: &ExperimentConfig, bin_edges: &[f64]) -> Result<ExperimentReport, ExperimentError> {
    let start = Instant::now();
    cfg.validate()?;
    if cfg.model.kernel() != Kernel::Strip {
        return Err(ExperimentError::Config("hitting histograms need a strip model".into()));
    }
    let edges = interior_edges(bin_edges)?;
    let m = edges.len();
    let bins = m + 1;
    let threshold = cfg.escape_threshold;
    let steps = cfg.steps();

    let counts = run_indexed(
        cfg.n_samples,
        0,
        || vec![0u64; bins + 1],
        |acc, index| {
            let mut st = cfg.stepper(cfg.model, index, &edges)?;
            let own = st.marked_len() - m;
            // edges keep their order, so the undecided ones form a window
            let (mut lo, mut hi) = (own, own + m);
            let mut k = 0;
            loop {
                while lo < hi && st.marked(lo).relative() <= -threshold {
                    st.retire(lo);
                    lo += 1;
                }
                while lo < hi && st.marked(hi - 1).relative() >= threshold {
                    st.retire(hi - 1);
                    hi -= 1;
                }
                if lo == hi || k == steps {
                    break;
                }
                st.step()?;
                k += 1;
            }
            if lo == hi {
                acc[lo - own] += 1;
            } else {
                acc[bins] += 1;
            }
            Ok(())
        },
        |t, p| t.iter_mut().zip(p).for_each(|(a, b)| *a += b),
    )?;

    let undecided = counts[bins];
    let n_used = cfg.n_samples - undecided;
    let z_max = bonferroni_threshold(FAMILYWISE_SIGMA, bins);
    let mut report = ExperimentReport::new("hitting", *cfg);
    report.param("edges", edges.clone());
    let mut chi2 = 0.0;
    let mut dof = 0usize;
    for b in 0..bins {
        let lo = if b == 0 { f64::NEG_INFINITY } else { edges[b - 1] };
        let hi = if b == m { f64::INFINITY } else { edges[b] };
        let reference = bin_reference(&cfg.model, lo, hi)?;
        if let Some(p) = reference {
            if p > 0.0 {
                let e = p * n_used as f64;
                chi2 += (counts[b] as f64 - e).powi(2) / e;
                dof += 1;
            }
        }
        report.cells.push(proportion_cell(format!("bin {b}"), vec![lo, hi], counts[b], n_used, reference, z_max)?);
    }
    if dof >= 2 {
        let p_value = chi_square_sf(chi2, (dof - 1) as f64);
        report.statistics.push(Statistic::info("chi_square", chi2));
        report.statistics.push(Statistic::above("chi_square_p_value", p_value, two_sided_p(FAMILYWISE_SIGMA)));
    }
    report.statistics.push(Statistic::info("z_threshold", z_max));
    report.undecided = undecided;
    report.undecided_fraction = undecided as f64 / cfg.n_samples as f64;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.settle();
    Ok(report)
}
