use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analytics::{hit_right_prob, log_conditioning_partition};
use crate::drivers::{DriverStepper, SleModel};
use crate::numerics::{normal_quantile, wilson_interval};

use super::{mean_se, run_indexed, CellEstimate, ExperimentConfig, ExperimentError, ExperimentReport, Statistic, SECOND_POPULATION_OFFSET};

/// Target law reached by reweighting the base driver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "target", rename_all = "snake_case")]
pub enum ReweightTarget {
    /// Dipolar SLE in the strip conditioned to end in `[iπ + a, iπ + b]`,
    /// weighted by `Z(V, A, B)/Z(0, a, b)`. The observable is the event
    /// that the endpoint lies right of `iπ + probe`.
    ConditionedInterval { a: f64, b: f64, probe: f64 },
    /// Unit weights; the observable is as above.
    Trivial { probe: f64 },
    /// `e^{xB_t − tx²/2}` with `B = V/√κ`; the observable is `B_t`.
    ExponentialBrownian { x: f64 },
}

/// Smallest accepted effective sample size, as a fraction of the samples.
const MIN_ESS_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    n: u64,
    undecided: u64,
    /// Σ W·O, Σ (W·O)², Σ W, Σ W², Σ O
    wo: f64,
    wo_sq: f64,
    w: f64,
    w_sq: f64,
    o: f64,
}

impl Sums {
    fn merge(&mut self, p: Sums) {
        self.n += p.n;
        self.undecided += p.undecided;
        self.wo += p.wo;
        self.wo_sq += p.wo_sq;
        self.w += p.w;
        self.w_sq += p.w_sq;
        self.o += p.o;
    }

    fn add(&mut self, w: f64, o: f64) {
        self.n += 1;
        self.wo += w * o;
        self.wo_sq += (w * o) * (w * o);
        self.w += w;
        self.w_sq += w * w;
        self.o += o;
    }
}

/// Runs the driver until the listed marked points have all escaped, or
/// `steps` is reached. Returns whether they all escaped.
fn run_until_decided(st: &mut DriverStepper, idx: &[usize], steps: u64, threshold: f64) -> Result<bool, ExperimentError> {
    let decided = |st: &DriverStepper| idx.iter().all(|&i| st.marked(i).relative().abs() >= threshold);
    let mut k = 0;
    while k < steps && !decided(st) {
        st.step()?;
        k += 1;
    }
    Ok(decided(st))
}

/// Estimates a target-law observable as `E_base[M̂ · O]` and compares it with
/// a direct simulation of the target (or with its exact value).
pub fn girsanov_reweight(cfg: &ExperimentConfig, target: ReweightTarget, t_stop: f64) -> Result<ExperimentReport, ExperimentError> {
    let start = Instant::now();
    cfg.validate()?;
    if !(t_stop >= cfg.dt && t_stop.is_finite()) {
        return Err(ExperimentError::Config(format!("t_stop = {t_stop} must be at least dt")));
    }
    let steps = (t_stop / cfg.dt).round() as u64;
    let kappa = cfg.model.kappa();
    let thr = cfg.escape_threshold;
    let mut report = ExperimentReport::new("reweight", *cfg);
    report.param("t_stop", vec![steps as f64 * cfg.dt]);

    let (weighted, direct) = match target {
        ReweightTarget::ConditionedInterval { a, b, probe } => {
            if !matches!(cfg.model, SleModel::DipolarStrip { .. }) || kappa == 0.0 {
                return Err(ExperimentError::Config("conditioning reweights dipolar SLE in the strip, kappa > 0".into()));
            }
            if !(a < probe && probe < b) {
                return Err(ExperimentError::Config("need a < probe < b".into()));
            }
            report.param("interval", vec![a, b]);
            report.param("probe", vec![probe]);
            let log_z0 = log_conditioning_partition(0.0, a, b, kappa)?;
            let base = run_indexed(cfg.n_samples, 0, Sums::default, |acc, index| {
                let mut st = cfg.stepper(cfg.model, index, &[a, b, probe])?;
                if !run_until_decided(&mut st, &[0, 1, 2], steps, thr)? {
                    acc.undecided += 1;
                    return Ok(());
                }
                let (xa, xb) = (st.marked(0).relative(), st.marked(1).relative());
                let w = (log_conditioning_partition(0.0, xa, xb, kappa)? - log_z0).exp();
                let o = if st.marked(2).relative() < 0.0 { 1.0 } else { 0.0 };
                acc.add(w, o);
                Ok(())
            }, Sums::merge)?;
            let target_model = SleModel::DipolarStripCondInterval { kappa, a, b };
            let direct = run_indexed(cfg.n_samples, SECOND_POPULATION_OFFSET, Sums::default, |acc, index| {
                let mut st = cfg.stepper(target_model, index, &[probe])?;
                if !run_until_decided(&mut st, &[0, 1, 2], steps, thr)? {
                    acc.undecided += 1;
                    return Ok(());
                }
                let o = if st.marked(2).relative() < 0.0 { 1.0 } else { 0.0 };
                acc.add(1.0, o);
                Ok(())
            }, Sums::merge)?;
            let exact = (hit_right_prob(probe, kappa)? - hit_right_prob(b, kappa)?)
                / (hit_right_prob(a, kappa)? - hit_right_prob(b, kappa)?);
            report.statistics.push(Statistic::info("exact_conditioned_probability", exact));
            (base, Some(direct))
        }
        ReweightTarget::Trivial { probe } => {
            if cfg.model.kernel() != crate::loewner::Kernel::Strip {
                return Err(ExperimentError::Config("the trivial reweighting observes a strip endpoint".into()));
            }
            report.param("probe", vec![probe]);
            let base = run_indexed(cfg.n_samples, 0, Sums::default, |acc, index| {
                let mut st = cfg.stepper(cfg.model, index, &[probe])?;
                let i = st.marked_len() - 1;
                if !run_until_decided(&mut st, &[i], steps, thr)? {
                    acc.undecided += 1;
                    return Ok(());
                }
                let o = if st.marked(i).relative() < 0.0 { 1.0 } else { 0.0 };
                acc.add(1.0, o);
                Ok(())
            }, Sums::merge)?;
            (base, None)
        }
        ReweightTarget::ExponentialBrownian { x } => {
            if !matches!(cfg.model, SleModel::DipolarStrip { .. } | SleModel::ChordalHalfPlaneToInfinity { .. }) || kappa == 0.0 {
                return Err(ExperimentError::Config("the exponential martingale needs a drift-free base with kappa > 0".into()));
            }
            report.param("x", vec![x]);
            let t = steps as f64 * cfg.dt;
            let base = run_indexed(cfg.n_samples, 0, Sums::default, |acc, index| {
                let mut st = cfg.stepper(cfg.model, index, &[])?;
                for _ in 0..steps {
                    st.step()?;
                }
                let bt = st.driver() / kappa.sqrt();
                acc.add((x * bt - 0.5 * t * x * x).exp(), bt);
                Ok(())
            }, Sums::merge)?;
            report.statistics.push(Statistic::info("exact_drifted_mean", x * t));
            (base, None)
        }
    };

    let (est, se) = mean_se(weighted.wo, weighted.wo_sq, weighted.n);
    let ess = if weighted.w_sq > 0.0 { weighted.w * weighted.w / weighted.w_sq } else { 0.0 };
    let (mean_w, se_w) = mean_se(weighted.w, weighted.w_sq, weighted.n);
    report.statistics.push(Statistic::above("effective_sample_fraction", ess / weighted.n.max(1) as f64, MIN_ESS_FRACTION));
    report.statistics.push(Statistic::info("mean_weight", mean_w));
    report.statistics.push(Statistic::info("mean_weight_std_error", se_w));

    let z95 = normal_quantile(0.975);
    let mut cell = CellEstimate {
        label: "reweighted observable".into(),
        coords: vec![],
        n: weighted.n,
        hits: None,
        estimate: est,
        std_error: se,
        interval: Some(crate::numerics::ConfidenceInterval {
            estimate: est,
            lower: est - z95 * se,
            upper: est + z95 * se,
            n_samples: weighted.n,
            confidence_level: 0.95,
        }),
        reference: None,
        z: None,
        pass: None,
    };
    match (target, direct) {
        (ReweightTarget::ConditionedInterval { .. }, Some(d)) => {
            let hits = d.o as u64;
            let p = hits as f64 / d.n as f64;
            let se_d = (p * (1.0 - p) / d.n as f64).sqrt();
            let z = (est - p) / (se * se + se_d * se_d).sqrt();
            cell.reference = Some(p);
            cell.z = Some(z);
            cell.pass = Some(z.abs() < z95);
            report.cells.push(cell);
            report.cells.push(CellEstimate {
                label: "direct conditioned simulation".into(),
                coords: vec![],
                n: d.n,
                hits: Some(hits),
                estimate: p,
                std_error: se_d,
                interval: Some(wilson_interval(hits, d.n.max(1), 0.95)?),
                reference: None,
                z: None,
                pass: None,
            });
            report.undecided = weighted.undecided + d.undecided;
            report.undecided_fraction = weighted.undecided.max(d.undecided) as f64 / cfg.n_samples as f64;
        }
        (ReweightTarget::Trivial { .. }, _) => {
            let plain = weighted.o / weighted.n as f64;
            cell.reference = Some(plain);
            cell.pass = Some(est.to_bits() == plain.to_bits());
            report.cells.push(cell);
            report.undecided = weighted.undecided;
            report.undecided_fraction = weighted.undecided as f64 / cfg.n_samples as f64;
        }
        (ReweightTarget::ExponentialBrownian { x }, _) => {
            let exact = x * steps as f64 * cfg.dt;
            let z = (est - exact) / se;
            cell.reference = Some(exact);
            cell.z = Some(z);
            cell.pass = Some(z.abs() < 3.0);
            report.cells.push(cell);
        }
        _ => unreachable!("direct simulation exists only for the conditioned target"),
    }
    report.wall_clock_seconds = start.elapsed().as_secs_f64();
    report.settle();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::Verdict;

    #[test]
    fn trivial_weights_reproduce_base() {
        let cfg = ExperimentConfig::new(SleModel::DipolarStrip { kappa: 2.0 }, 200, 2);
        let r = girsanov_reweight(&cfg, ReweightTarget::Trivial { probe: 0.3 }, 60.0).unwrap();
        assert_eq!(r.verdict, Verdict::Pass);
        assert_eq!(r.cells[0].estimate, r.cells[0].reference.unwrap());
    }

    #[test]
    fn exponential_martingale_shifts_the_mean() {
        let mut cfg = ExperimentConfig::new(SleModel::DipolarStrip { kappa: 2.0 }, 4000, 2);
        cfg.dt = 1e-2;
        let r = girsanov_reweight(&cfg, ReweightTarget::ExponentialBrownian { x: 0.5 }, 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
    }

    #[test]
    fn conditioned_target_checks_arguments() {
        let cfg = ExperimentConfig::new(SleModel::DipolarStrip { kappa: 2.0 }, 10, 2);
        let t = ReweightTarget::ConditionedInterval { a: -1.0, b: 1.0, probe: 2.0 };
        assert!(girsanov_reweight(&cfg, t, 10.0).is_err());
        let cfg = ExperimentConfig::new(SleModel::ChordalStrip { kappa: 2.0, a: 0.0 }, 10, 2);
        let t = ReweightTarget::ConditionedInterval { a: -1.0, b: 1.0, probe: 0.0 };
        assert!(girsanov_reweight(&cfg, t, 10.0).is_err());
    }
}
