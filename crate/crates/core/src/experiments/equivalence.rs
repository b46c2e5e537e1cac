use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::drivers::{drift, SleModel};
use crate::loewner::Kernel;
use crate::numerics::{bonferroni_threshold, wilson_interval, FAMILYWISE_SIGMA};
use crate::ComplexPoint;

use super::passage::{check_probes, probe_sides, SideCounts};
use super::{CellEstimate, ExperimentConfig, ExperimentError, ExperimentReport, Statistic, Verdict, SECOND_POPULATION_OFFSET};

/// What the two laws are expected to do.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    /// Same law: every probe must agree.
    Equal,
    /// Different laws: some probe must separate them at `|z| > 4`, or the
    /// report says the run lacked power.
    Different,
}

fn two_sample_z(x1: u64, n1: u64, x2: u64, n2: u64) -> f64 {
    if n1 == 0 || n2 == 0 {
        return f64::NAN;
    }
    let (p1, p2) = (x1 as f64 / n1 as f64, x2 as f64 / n2 as f64);
    let pool = (x1 + x2) as f64 / (n1 + n2) as f64;
    let se = (pool * (1.0 - pool) * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        0.0
    } else {
        (p1 - p2) / se
    }
}

/// Largest drift difference between the two models over a grid of
/// configurations sharing the same marked points.
fn drift_gap(a: &SleModel, b: &SleModel) -> Result<Option<f64>, ExperimentError> {
    let (pa, pb) = (a.marked_points(), b.marked_points());
    if pa != pb {
        return Ok(None);
    }
    let mut worst = 0.0f64;
    for i in 0..20 {
        for j in 0..20 {
            let v = -5.0 + 0.5 * i as f64 + 0.013;
            let shift = -4.75 + 0.5 * j as f64;
            let am = pa.0.map(|x| x + shift);
            let bm = pa.1.map(|x| x + shift);
            worst = worst.max((drift(a, v, am, bm)? - drift(b, v, am, bm)?).abs());
        }
    }
    Ok(Some(worst))
}

/// Two-sample comparison of right-passage proportions at `probes` between
/// `model_a` (streams `0..`) and `model_b` (streams offset by
/// [`SECOND_POPULATION_OFFSET`]).
///
/// `stages` lists cumulative sample counts; with [`Expectation::Different`]
/// the run stops at the first stage that separates the laws. An empty list
/// means the single stage `cfg.n_samples`.
pub fn equivalence_test(
    cfg: &ExperimentConfig,
    model_a: SleModel,
    model_b: SleModel,
    probes: &[ComplexPoint],
    expectation: Expectation,
    stages: &[u64],
) -> Result<ExperimentReport, ExperimentError> {
    let start = Instant::now();
    cfg.validate()?;
    model_a.validate()?;
    model_b.validate()?;
    check_probes(probes)?;
    if model_a.kernel() != Kernel::Strip || model_b.kernel() != Kernel::Strip {
        return Err(ExperimentError::Config("equivalence tests compare strip models".into()));
    }
    let stages: Vec<u64> = if stages.is_empty() { vec![cfg.n_samples] } else { stages.to_vec() };
    if stages[0] == 0 || stages.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ExperimentError::Config("stages must be positive and increasing".into()));
    }
    let stages = if expectation == Expectation::Equal { vec![*stages.last().unwrap_or(&cfg.n_samples)] } else { stages };

    let m = probes.len();
    let z_max = bonferroni_threshold(FAMILYWISE_SIGMA, m);
    let mut ca = SideCounts { right: vec![0; m], undecided: vec![0; m], samples: 0 };
    let mut cb = ca.clone();
    let mut done = 0u64;
    let mut zs = vec![f64::NAN; m];
    let mut detected = false;
    for &n in &stages {
        ca.merge(probe_sides(cfg, model_a, probes, (done, n - done))?);
        cb.merge(probe_sides(cfg, model_b, probes, (SECOND_POPULATION_OFFSET + done, n - done))?);
        done = n;
        for i in 0..m {
            zs[i] = two_sample_z(ca.right[i], ca.decided(i), cb.right[i], cb.decided(i));
        }
        detected = zs.iter().any(|z| z.abs() > FAMILYWISE_SIGMA);
        if expectation == Expectation::Different && detected {
            break;
        }
    }

    let mut run_cfg = *cfg;
    run_cfg.model = model_a;
    run_cfg.n_samples = done;
    let mut report = ExperimentReport::new("equivalence", run_cfg);
    report.param("probe_re", probes.iter().map(|z| z.re).collect());
    report.param("probe_im", probes.iter().map(|z| z.im).collect());
    report.param("stages", stages.iter().map(|&s| s as f64).collect());
    for (i, &w) in probes.iter().enumerate() {
        let (na, nb) = (ca.decided(i), cb.decided(i));
        let pa = ca.right[i] as f64 / na as f64;
        let pb = cb.right[i] as f64 / nb as f64;
        let se = (pa * (1.0 - pa) / na as f64 + pb * (1.0 - pb) / nb as f64).sqrt();
        let pass = match expectation {
            Expectation::Equal => Some(zs[i].abs() < z_max),
            Expectation::Different => None,
        };
        report.cells.push(CellEstimate {
            label: format!("probe {i}"),
            coords: vec![w.re, w.im],
            n: na,
            hits: Some(ca.right[i]),
            estimate: pa,
            std_error: se,
            interval: if na > 0 { Some(wilson_interval(ca.right[i], na, 0.95)?) } else { None },
            reference: Some(pb),
            z: Some(zs[i]),
            pass,
        });
    }
    let max_z = zs.iter().fold(0.0f64, |a, z| a.max(z.abs()));
    report.statistics.push(Statistic::info("samples_per_model", done as f64));
    report.statistics.push(Statistic::info("z_threshold", z_max));
    report.statistics.push(Statistic::info("max_abs_z", max_z));
    if let Some(gap) = drift_gap(&model_a, &model_b)? {
        let identity = model_a == model_b
            || (model_a.kappa() == 2.0
                && model_b.kappa() == 2.0
                && matches!(
                    (model_a, model_b),
                    (SleModel::DipolarStripCondPoint { .. }, SleModel::ChordalStrip { .. })
                        | (SleModel::ChordalStrip { .. }, SleModel::DipolarStripCondPoint { .. })
                ));
        if identity && expectation == Expectation::Equal {
            report.statistics.push(Statistic::below("drift_max_abs_difference", gap, 1e-12));
        } else {
            report.statistics.push(Statistic::info("drift_max_abs_difference", gap));
        }
    }
    let undecided: u64 = ca.undecided.iter().chain(&cb.undecided).sum();
    let worst = ca.undecided.iter().chain(&cb.undecided).copied().max().unwrap_or(0);
    report.undecided = undecided;
    report.undecided_fraction = worst as f64 / done as f64;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.settle();
    if expectation == Expectation::Different && report.undecided_fraction <= cfg.undecided_gate {
        if detected {
            report.verdict = Verdict::Pass;
            report.diagnosis = Some(format!("laws separated: max |z| = {max_z:.2} at N = {done}"));
        } else {
            report.verdict = Verdict::InsufficientPower;
            report.diagnosis = Some(format!(
                "no probe reached |z| > {FAMILYWISE_SIGMA} at N = {done} per model (max |z| = {max_z:.2}); the difference was not resolved"
            ));
        }
    }
    Ok(report)
}
