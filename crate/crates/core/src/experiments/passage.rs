use std::time::Instant;

use crate::analytics::{chordal_strip_right_passage, dipolar2_right_passage};
use crate::drivers::{DriverStepper, SleModel};
use crate::loewner::{decide_side, Kernel, PointFlow, Side};
use crate::numerics::{bonferroni_threshold, FAMILYWISE_SIGMA};
use crate::ComplexPoint;

use super::{proportion_cell, run_indexed, ExperimentConfig, ExperimentError, ExperimentReport, Statistic};

/// Right-passage reference for the model at `w`, where one is known.
pub(crate) fn passage_reference(model: &SleModel, w: ComplexPoint) -> Result<Option<f64>, ExperimentError> {
    Ok(match *model {
        SleModel::DipolarStrip { kappa } if kappa == 2.0 => Some(dipolar2_right_passage(w)?),
        SleModel::ChordalStrip { kappa, a } if kappa == 2.0 => Some(chordal_strip_right_passage(a, w)?),
        SleModel::DipolarStripCondPoint { kappa, a } if kappa == 2.0 => Some(chordal_strip_right_passage(a, w)?),
        _ => None,
    })
}

/// Per-probe counts of right passages and of undecided probes.
#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct SideCounts {
    pub right: Vec<u64>,
    pub undecided: Vec<u64>,
    pub samples: u64,
}

impl SideCounts {
    fn new(m: usize) -> Self {
        Self { right: vec![0; m], undecided: vec![0; m], samples: 0 }
    }

    pub(crate) fn merge(&mut self, other: SideCounts) {
        self.right.iter_mut().zip(other.right).for_each(|(a, b)| *a += b);
        self.undecided.iter_mut().zip(other.undecided).for_each(|(a, b)| *a += b);
        self.samples += other.samples;
    }

    pub(crate) fn decided(&self, i: usize) -> u64 {
        self.samples - self.undecided[i]
    }
}

/// Flows every probe along one sampled driver until all are decided or the
/// horizon is reached.
pub(crate) fn probe_sides(
    cfg: &ExperimentConfig,
    model: SleModel,
    probes: &[ComplexPoint],
    index_range: (u64, u64),
) -> Result<SideCounts, ExperimentError> {
    let m = probes.len();
    let flow_cfg = cfg.flow_config();
    let steps = cfg.steps();
    run_indexed(
        index_range.1,
        index_range.0,
        || SideCounts::new(m),
        |acc, index| {
            let mut st: DriverStepper = cfg.stepper(model, index, &[])?;
            let mut flows = probes
                .iter()
                .map(|&z| PointFlow::new(Kernel::Strip, z, 0.0))
                .collect::<Result<Vec<_>, _>>()?;
            let mut open = m;
            let mut k = 0;
            while k < steps && open > 0 {
                let inc = st.step()?;
                for f in flows.iter_mut().filter(|f| !f.is_decided()) {
                    if f.advance(&inc, &flow_cfg)?.is_some() {
                        open -= 1;
                    }
                }
                k += 1;
            }
            for (i, f) in flows.iter().enumerate() {
                match decide_side(f.fate()) {
                    Side::Right => acc.right[i] += 1,
                    Side::Left => {}
                    Side::Undecided => acc.undecided[i] += 1,
                }
            }
            acc.samples += 1;
            Ok(())
        },
        SideCounts::merge,
    )
}

pub(crate) fn check_probes(probes: &[ComplexPoint]) -> Result<(), ExperimentError> {
    if probes.is_empty() {
        return Err(ExperimentError::Config("no probe points".into()));
    }
    if let Some(z) = probes.iter().find(|z| !Kernel::Strip.contains(**z)) {
        return Err(ExperimentError::Config(format!("probe {z} is not inside the strip")));
    }
    Ok(())
}

/// Monte Carlo right-passage probabilities at `probes`, compared with the
/// closed forms (dipolar SLE₂, or chordal SLE₂ toward `iπ + a`).
///
/// ```no_run
/// use sle_lab::drivers::SleModel;
/// use sle_lab::experiments::{passage_field, ExperimentConfig};
/// use sle_lab::Complex64;
/// let cfg = ExperimentConfig::new(SleModel::DipolarStrip { kappa: 2.0 }, 1000, 1);
/// let r = passage_field(&cfg, &[Complex64::new(0.0, 1.5)]).unwrap();
/// assert!((r.cells[0].estimate - 0.5).abs() < 0.1);
/// ```
pub fn passage_field(cfg: &ExperimentConfig, probes: &[ComplexPoint]) -> Result<ExperimentReport, ExperimentError> {
    let start = Instant::now();
    cfg.validate()?;
    check_probes(probes)?;
    if !matches!(cfg.model, SleModel::DipolarStrip { .. } | SleModel::ChordalStrip { .. }) {
        return Err(ExperimentError::Config("passage fields use DipolarStrip or ChordalStrip".into()));
    }
    if cfg.model.kappa() != 2.0 {
        return Err(ExperimentError::Config("the closed-form passage probabilities hold at kappa = 2".into()));
    }
    let counts = probe_sides(cfg, cfg.model, probes, (0, cfg.n_samples))?;
    let z_max = bonferroni_threshold(FAMILYWISE_SIGMA, probes.len());
    let mut report = ExperimentReport::new("passage", *cfg);
    report.param("probe_re", probes.iter().map(|z| z.re).collect());
    report.param("probe_im", probes.iter().map(|z| z.im).collect());
    for (i, &w) in probes.iter().enumerate() {
        let reference = passage_reference(&cfg.model, w)?;
        report.cells.push(proportion_cell(format!("probe {i}"), vec![w.re, w.im], counts.right[i], counts.decided(i), reference, z_max)?);
    }
    let worst = counts.undecided.iter().copied().max().unwrap_or(0);
    report.statistics.push(Statistic::info("z_threshold", z_max));
    report.undecided = counts.undecided.iter().sum();
    report.undecided_fraction = worst as f64 / cfg.n_samples as f64;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.settle();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_probe_small_run() {
        let cfg = ExperimentConfig::new(SleModel::DipolarStrip { kappa: 2.0 }, 300, 8);
        let r = passage_field(&cfg, &[ComplexPoint::new(0.0, 1.5), ComplexPoint::new(2.0, 1.0)]).unwrap();
        assert_eq!(r.undecided, 0);
        assert_eq!(r.verdict, crate::experiments::Verdict::Pass, "{r:?}");
        assert!(r.cells[1].estimate < 0.3);
    }

    #[test]
    fn probes_outside_refused() {
        let cfg = ExperimentConfig::new(SleModel::DipolarStrip { kappa: 2.0 }, 3, 8);
        assert!(passage_field(&cfg, &[ComplexPoint::new(0.0, 4.0)]).is_err());
        assert!(passage_field(&cfg, &[]).is_err());
    }
}
