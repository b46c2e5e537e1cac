use std::time::Instant;

use crate::analytics::{log_martingale_value, MartingaleSpec, MartingaleState};
use crate::drivers::SleModel;

use super::{mean_se, Verdict, run_indexed, CellEstimate, ExperimentConfig, ExperimentError, ExperimentReport, Statistic};

/// Smallest Bessel dimension `1 + 2(ρ_j + 2)/κ` of `X^{x_j}/√κ` under the
/// measure weighted by `M`. Below 2 the weighted driver hits `x_j` with
/// positive probability and `M` is a strict local martingale.
pub fn reweighted_bessel_dimension(spec: &MartingaleSpec) -> f64 {
    spec.weights
        .iter()
        .filter(|&&r| r != 0.0)
        .map(|r| 1.0 + 2.0 * (r + 2.0) / spec.kappa)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    sum: f64,
    sum_sq: f64,
    excluded: u64,
}

/// Mean of `M̂_t` over chordal SLE in `H` from 0 to ∞. Force points are
/// flowed on the real axis together with `log |g′_t(x_j)|`; a sample in
/// which one of them meets the driver before `t` is excluded and counted.
pub fn martingale_expectation(spec: &MartingaleSpec, t: f64, cfg: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    let start = Instant::now();
    cfg.validate()?;
    let kappa = match cfg.model {
        SleModel::ChordalHalfPlaneToInfinity { kappa } => kappa,
        _ => return Err(ExperimentError::Config("the martingale runs on chordal SLE in H to infinity".into())),
    };
    if kappa != spec.kappa {
        return Err(ExperimentError::Config(format!("model kappa {kappa} differs from spec kappa {}", spec.kappa)));
    }
    if spec.points.contains(&0.0) {
        return Err(ExperimentError::Config("force points must avoid the starting point 0".into()));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(ExperimentError::Config(format!("t = {t} must be positive")));
    }
    let steps = (t / cfg.dt).round().max(1.0) as u64;
    let log_m0 = log_martingale_value(spec, &MartingaleState::initial(spec, 0.0))?;
    let k = spec.len();

    let mom = run_indexed(
        cfg.n_samples,
        0,
        Moments::default,
        |acc, index| {
            let mut st = cfg.stepper(cfg.model, index, &spec.points)?;
            for _ in 0..steps {
                st.step()?;
            }
            if (0..k).any(|i| st.marked(i).collision().is_some()) {
                acc.excluded += 1;
                return Ok(());
            }
            let state = MartingaleState {
                x: (0..k).map(|i| st.marked(i).relative()).collect(),
                gprime: (0..k).map(|i| st.marked(i).log_gprime().exp()).collect(),
            };
            let m = (log_martingale_value(spec, &state)? - log_m0).exp();
            acc.n += 1;
            acc.sum += m;
            acc.sum_sq += m * m;
            Ok(())
        },
        |tot, p| {
            tot.n += p.n;
            tot.sum += p.sum;
            tot.sum_sq += p.sum_sq;
            tot.excluded += p.excluded;
        },
    )?;

    let (mean, se) = mean_se(mom.sum, mom.sum_sq, mom.n);
    let z = if se > 0.0 { (mean - 1.0) / se } else if mean == 1.0 { 0.0 } else { f64::INFINITY };
    let mut report = ExperimentReport::new("martingale", *cfg);
    report.param("points", spec.points.clone());
    report.param("weights", spec.weights.clone());
    report.param("t", vec![steps as f64 * cfg.dt]);
    report.cells.push(CellEstimate {
        label: "mean normalized martingale".into(),
        coords: vec![],
        n: mom.n,
        hits: None,
        estimate: mean,
        std_error: se,
        interval: None,
        reference: Some(1.0),
        z: Some(z),
        pass: Some(z.abs() < 3.0),
    });
    report.statistics.push(Statistic::info("z_threshold", 3.0));
    let dim = reweighted_bessel_dimension(spec);
    report.statistics.push(Statistic::info("min_reweighted_bessel_dimension", dim));
    report.excluded = mom.excluded;
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.settle();
    if report.verdict == Verdict::Fail && dim < 2.0 {
        report.diagnosis = Some(format!(
            "mean {mean:.6} is below 1; the reweighted driver is a Bessel process of dimension {dim:.3} < 2 \
             relative to some force point and can reach it, so E[M_t] = P(no force point reached by t) and the \
             deficit is that probability"
        ));
    }
    Ok(report)
}
