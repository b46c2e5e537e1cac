use std::f64::consts::PI;
use std::path::PathBuf;

use chrono::Utc;
use serde::Serialize;
use serde_json::Value;
use sle_lab::analytics::{chordal_strip_right_passage, dipolar2_right_passage, MartingaleSpec};
use sle_lab::drivers::SleModel;
use sle_lab::experiments::{
    equivalence_test, girsanov_reweight, hitting_histogram, martingale_expectation, passage_field, verify_suite, ExperimentConfig,
    ExperimentReport, Expectation, ReweightTarget, Suite, Verdict,
};
use sle_lab::Complex64;

use crate::args::{Command, Common, ExpectArg, StripModel, SuiteArg, TargetArg};
use crate::error::{CliError, EXIT_PASS, EXIT_STATISTICAL};
use crate::output::{cells_table, file_stem, fmt_f64, output_dir, timestamp, write_json, RunManifest, Table};
use crate::settings::{parse_grid, parse_list, parse_points, Settings};

/// Result of a finished command.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
    pub files: Vec<PathBuf>,
}

struct Product {
    /// (file suffix, table)
    tables: Vec<(&'static str, Table)>,
    report: Value,
    code: i32,
    summary: String,
    seed: Option<u64>,
}

fn verdict_product(report: &ExperimentReport, tables: Vec<(&'static str, Table)>) -> Result<Product, CliError> {
    let code = if report.verdict == Verdict::Pass { EXIT_PASS } else { EXIT_STATISTICAL };
    let verdict = match report.verdict {
        Verdict::Pass => "pass",
        Verdict::Fail => "FAIL",
        Verdict::InsufficientPower => "INSUFFICIENT POWER",
    };
    let mut summary = format!("{}: {verdict} (N = {})", report.experiment, report.config.n_samples);
    if let Some(d) = &report.diagnosis {
        summary.push_str(&format!("; {d}"));
    }
    Ok(Product { tables, report: serde_json::to_value(report)?, code, summary, seed: Some(report.config.master_seed) })
}

pub fn run(command: Command) -> Result<Outcome, CliError> {
    let name = command.name();
    let common = command.common();
    let mut s = Settings::load(common.config.as_deref())?;
    if let Some(w) = s.opt("workers", common.workers)? {
        if w == 0 {
            return Err(CliError::Usage("--workers must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    let out = s.opt("out", common.out.as_ref().map(|p| p.display().to_string()))?;
    let dir = output_dir(out.map(PathBuf::from))?;
    let started = Utc::now();

    let product = match &command {
        Command::Hitting(a) => hitting(&mut s, a)?,
        Command::Passage(a) => passage(&mut s, a)?,
        Command::Verify(a) => verify(&mut s, a)?,
        Command::Equivalence(a) => equivalence(&mut s, a)?,
        Command::Martingale(a) => martingale(&mut s, a)?,
        Command::Reweight(a) => reweight(&mut s, a)?,
    };

    let finished = Utc::now();
    let stem = file_stem(&dir, name, started);
    let mut files = Vec::new();
    for (suffix, table) in &product.tables {
        let path = dir.join(format!("{stem}{suffix}.csv"));
        table.write(&path)?;
        files.push(path);
    }
    let json = dir.join(format!("{stem}.json"));
    files.push(json.clone());
    let manifest = RunManifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: s.resolved.clone(),
        master_seed: product.seed,
        workers: rayon::current_num_threads(),
        started: timestamp(started),
        finished: timestamp(finished),
        outputs: files.iter().map(|p| p.display().to_string()).collect(),
    };
    write_json(&json, &manifest, &product.report)?;
    Ok(Outcome { code: product.code, summary: product.summary, files })
}

fn mc_config(s: &mut Settings, c: &Common, model: SleModel, default_n: u64) -> Result<ExperimentConfig, CliError> {
    let seed = s.require("seed", c.seed)?;
    let n = s.get("n", c.n, default_n)?;
    let mut cfg = ExperimentConfig::new(model, n, seed);
    cfg.dt = s.get("dt", c.dt, cfg.dt)?;
    cfg.horizon = s.get("horizon", c.horizon, cfg.horizon)?;
    cfg.escape_threshold = s.get("threshold", c.threshold, cfg.escape_threshold)?;
    cfg.max_substeps = s.get("max-substeps", c.max_substeps, cfg.max_substeps)?;
    cfg.undecided_gate = s.get("gate", c.gate, cfg.undecided_gate)?;
    cfg.validate()?;
    Ok(cfg)
}

fn strip_model(s: &mut Settings, c: &Common, which: StripModel, kappa: f64) -> Result<SleModel, CliError> {
    Ok(match which {
        StripModel::Dipolar => SleModel::DipolarStrip { kappa },
        StripModel::CondInterval => {
            let a = s.require("a", c.a)?;
            let b = s.require("b", c.b)?;
            SleModel::DipolarStripCondInterval { kappa, a, b }
        }
        StripModel::CondPoint => SleModel::DipolarStripCondPoint { kappa, a: s.require("a", c.a)? },
        StripModel::Chordal => SleModel::ChordalStrip { kappa, a: s.require("a", c.a)? },
    })
}

fn hitting(s: &mut Settings, args: &crate::args::HittingArgs) -> Result<Product, CliError> {
    let c = &args.common;
    let kappa = s.get("kappa", c.kappa, 2.0)?;
    let which = s.choice("model", args.model, StripModel::Dipolar)?;
    let model = strip_model(s, c, which, kappa)?;
    let edges = s.get("edges", args.edges.clone(), "-1,0,1".to_string())?;
    let edges = parse_list("edges", &edges)?;
    let cfg = mc_config(s, c, model, 10_000)?;
    let report = hitting_histogram(&cfg, &edges)?;
    let table = cells_table(&report, &["lower", "upper"]);
    verdict_product(&report, vec![("", table)])
}

fn grid_points(rows: usize, cols: usize, u_max: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        let u = if rows == 1 { 0.0 } else { -u_max + 2.0 * u_max * i as f64 / (rows - 1) as f64 };
        for j in 0..cols {
            out.push(Complex64::new(u, PI * (j + 1) as f64 / (cols + 1) as f64));
        }
    }
    out
}

#[derive(Debug, Serialize)]
struct AnalyticTable {
    analysis: String,
    model: String,
    rows: usize,
    cols: usize,
    u_max: f64,
    min_p2: f64,
    max_p2: f64,
}

fn passage(s: &mut Settings, args: &crate::args::PassageArgs) -> Result<Product, CliError> {
    let c = &args.common;
    let which = s.choice("model", args.model, StripModel::Dipolar)?;
    if !matches!(which, StripModel::Dipolar | StripModel::Chordal) {
        return Err(CliError::Usage("passage supports --model dipolar or chordal".into()));
    }
    let default_grid = if args.analytic_only { "41x21" } else { "4x4" };
    let grid = s.get("grid", args.grid.clone(), default_grid.to_string())?;
    let (rows, cols) = parse_grid(&grid)?;
    let u_max = s.get("u-max", args.u_max, 3.0)?;
    if !(u_max > 0.0 && u_max.is_finite()) {
        return Err(CliError::Usage("--u-max must be positive".into()));
    }
    let probes = grid_points(rows, cols, u_max);

    if args.analytic_only {
        s.record("analytic-only", true);
        let a = if which == StripModel::Chordal { Some(s.require("a", c.a)?) } else { None };
        let mut table = Table::new(&["u", "v", "p2"]);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for w in &probes {
            let p = match a {
                Some(a) => chordal_strip_right_passage(a, *w)?,
                None => dipolar2_right_passage(*w)?,
            };
            lo = lo.min(p);
            hi = hi.max(p);
            table.push(vec![fmt_f64(w.re), fmt_f64(w.im), fmt_f64(p)]);
        }
        let report = AnalyticTable {
            analysis: "passage_analytic".into(),
            model: if a.is_some() { "chordal_strip".into() } else { "dipolar_strip".into() },
            rows,
            cols,
            u_max,
            min_p2: lo,
            max_p2: hi,
        };
        return Ok(Product {
            tables: vec![("", table)],
            report: serde_json::to_value(report)?,
            code: EXIT_PASS,
            summary: format!("passage: tabulated p2 at {} points", probes.len()),
            seed: None,
        });
    }

    let kappa = s.get("kappa", c.kappa, 2.0)?;
    let model = strip_model(s, c, which, kappa)?;
    let cfg = mc_config(s, c, model, 10_000)?;
    let report = passage_field(&cfg, &probes)?;
    let table = cells_table(&report, &["u", "v"]);
    verdict_product(&report, vec![("", table)])
}

fn verify(s: &mut Settings, args: &crate::args::VerifyArgs) -> Result<Product, CliError> {
    let suite = match s.choice("suite", args.suite, SuiteArg::All)? {
        SuiteArg::Identities => Suite::Identities,
        SuiteArg::Inteq => Suite::Inteq,
        SuiteArg::Flows => Suite::Flows,
        SuiteArg::All => Suite::All,
    };
    let kappas: Vec<f64> = s.opt("kappa", args.common.kappa)?.into_iter().collect();
    let report = verify_suite(suite, &kappas)?;
    let mut checks = Table::new(&["name", "max_deviation", "tolerance", "passed"]);
    for ch in &report.checks {
        checks.push(vec![ch.name.clone(), fmt_f64(ch.max_deviation), fmt_f64(ch.tolerance), ch.passed.to_string()]);
    }
    let mut tables = vec![("", checks)];
    if !report.inteq_table.is_empty() {
        let mut t = Table::new(&["kappa", "p", "q", "ratio"]);
        for r in &report.inteq_table {
            t.push(vec![fmt_f64(r.kappa), fmt_f64(r.p), fmt_f64(r.q), fmt_f64(r.ratio)]);
        }
        tables.push(("-inteq", t));
    }
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let summary = if failed.is_empty() {
        format!("verify: pass ({} checks)", report.checks.len())
    } else {
        format!("verify: FAIL ({} of {} checks): {}", failed.len(), report.checks.len(), failed.join(", "))
    };
    Ok(Product {
        tables,
        code: if report.passed { EXIT_PASS } else { EXIT_STATISTICAL },
        report: serde_json::to_value(&report)?,
        summary,
        seed: None,
    })
}

fn equivalence(s: &mut Settings, args: &crate::args::EquivalenceArgs) -> Result<Product, CliError> {
    let c = &args.common;
    let kappa = s.get("kappa", c.kappa, 2.0)?;
    let point = s.get("point", args.point, 0.7)?;
    let probes = s.get("probes", args.probes.clone(), "-1:1.5,0.7:2.5,1.2:2.9,2:1".to_string())?;
    let probes: Vec<Complex64> = parse_points("probes", &probes)?.into_iter().map(|(re, im)| Complex64::new(re, im)).collect();
    let default_expect = if kappa == 2.0 { ExpectArg::Equal } else { ExpectArg::Different };
    let expectation = match s.choice("expect", args.expect, default_expect)? {
        ExpectArg::Equal => Expectation::Equal,
        ExpectArg::Different => Expectation::Different,
    };
    let stages = match s.opt("stages", args.stages.clone())? {
        Some(t) => t
            .split(',')
            .map(|x| x.trim().parse::<u64>().map_err(|e| CliError::Usage(format!("--stages: `{x}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let a = SleModel::DipolarStripCondPoint { kappa, a: point };
    let b = SleModel::ChordalStrip { kappa, a: point };
    let cfg = mc_config(s, c, a, 10_000)?;
    let report = equivalence_test(&cfg, a, b, &probes, expectation, &stages)?;
    let table = cells_table(&report, &["u", "v"]);
    verdict_product(&report, vec![("", table)])
}

fn martingale(s: &mut Settings, args: &crate::args::MartingaleArgs) -> Result<Product, CliError> {
    let c = &args.common;
    let kappa = s.get("kappa", c.kappa, 3.0)?;
    let points = s.get("points", args.points.clone(), "-1,1".to_string())?;
    let points = parse_list("points", &points)?;
    let rhos = s.get("rhos", args.rhos.clone(), "auto-dipolar".to_string())?;
    let weights = match rhos.as_str() {
        "auto-dipolar" => vec![0.5 * (kappa - 6.0); points.len()],
        "auto-conditioned" => {
            let mut w = vec![0.5 * (kappa - 2.0); points.len()];
            if let Some(first) = w.first_mut() {
                *first = -4.0;
            }
            w
        }
        list => parse_list("rhos", list)?,
    };
    let t = s.get("t", args.t, 0.05)?;
    let spec = MartingaleSpec::new(points, weights, kappa)?;
    let cfg = mc_config(s, c, SleModel::ChordalHalfPlaneToInfinity { kappa }, 10_000)?;
    let report = martingale_expectation(&spec, t, &cfg)?;
    let table = cells_table(&report, &[]);
    verdict_product(&report, vec![("", table)])
}

fn reweight(s: &mut Settings, args: &crate::args::ReweightArgs) -> Result<Product, CliError> {
    let c = &args.common;
    let kappa = s.get("kappa", c.kappa, 2.0)?;
    let flag = if args.trivial { Some(TargetArg::Trivial) } else { args.target };
    let which = s.choice("target", flag, TargetArg::Conditioned)?;
    let cfg = mc_config(s, c, SleModel::DipolarStrip { kappa }, 10_000)?;
    let (target, default_t) = match which {
        TargetArg::Conditioned => {
            let a = s.get("a", c.a, -1.0)?;
            let b = s.get("b", c.b, 1.0)?;
            let probe = s.get("probe", args.probe, 0.5 * (a + b))?;
            (ReweightTarget::ConditionedInterval { a, b, probe }, cfg.horizon)
        }
        TargetArg::Trivial => (ReweightTarget::Trivial { probe: s.get("probe", args.probe, 0.0)? }, cfg.horizon),
        TargetArg::Exponential => (ReweightTarget::ExponentialBrownian { x: s.get("x", args.x, 0.5)? }, 1.0),
    };
    let t = s.get("t", args.t, default_t)?;
    let report = girsanov_reweight(&cfg, target, t)?;
    let table = cells_table(&report, &[]);
    verdict_product(&report, vec![("", table)])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_is_row_major_and_symmetric() {
        let g = grid_points(41, 21, 3.0);
        assert_eq!(g.len(), 861);
        assert_eq!(g[20 * 21].re, 0.0);
        assert!((g[0].re + 3.0).abs() < 1e-15 && (g[860].re - 3.0).abs() < 1e-15);
        assert!(g.iter().all(|w| w.im > 0.0 && w.im < PI));
        assert_eq!(grid_points(1, 1, 3.0), vec![Complex64::new(0.0, PI / 2.0)]);
    }
}
