use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;
use sle_lab::experiments::ExperimentReport;

use crate::error::CliError;

/// Round-trip exact rendering of a double (17 significant digits).
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Header plus rows, written with the `csv` writer.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_path(path)?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One row per cell; `coords` names the cell coordinates.
pub fn cells_table(report: &ExperimentReport, coords: &[&str]) -> Table {
    let mut header = vec!["label"];
    header.extend_from_slice(coords);
    header.extend_from_slice(&["n", "hits", "estimate", "std_error", "ci_lower", "ci_upper", "reference", "z", "pass"]);
    let mut t = Table::new(&header);
    for c in &report.cells {
        let mut row = vec![c.label.clone()];
        for i in 0..coords.len() {
            row.push(fmt_opt(c.coords.get(i).copied()));
        }
        row.push(c.n.to_string());
        row.push(c.hits.map(|h| h.to_string()).unwrap_or_default());
        row.push(fmt_f64(c.estimate));
        row.push(fmt_f64(c.std_error));
        row.push(fmt_opt(c.interval.map(|i| i.lower)));
        row.push(fmt_opt(c.interval.map(|i| i.upper)));
        row.push(fmt_opt(c.reference));
        row.push(fmt_opt(c.z));
        row.push(c.pass.map(|p| p.to_string()).unwrap_or_default());
        t.push(row);
    }
    t
}

/// Everything needed to re-run a command.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: BTreeMap<String, Value>,
    pub master_seed: Option<u64>,
    pub workers: usize,
    pub started: String,
    pub finished: String,
    pub outputs: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Document<'a, R: Serialize> {
    manifest: &'a RunManifest,
    report: &'a R,
}

pub fn timestamp(t: DateTime<Utc>) -> String {
    t.to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Output directory: `--out`, then `$SLE_LAB_OUT`, then the working directory.
pub fn output_dir(flag: Option<PathBuf>) -> Result<PathBuf, CliError> {
    let dir = flag
        .or_else(|| std::env::var_os("SLE_LAB_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir)
}

/// `<cmd>-<timestamp>` not yet used by any file in `dir`.
pub fn file_stem(dir: &Path, cmd: &str, t: DateTime<Utc>) -> String {
    let base = format!("{cmd}-{}", t.format("%Y%m%dT%H%M%S%.3fZ"));
    let taken = |stem: &str| dir.join(format!("{stem}.json")).exists() || dir.join(format!("{stem}.csv")).exists();
    if !taken(&base) {
        return base;
    }
    (2..).map(|k| format!("{base}-{k}")).find(|s| !taken(s)).expect("unbounded suffixes")
}

pub fn write_json<R: Serialize>(path: &Path, manifest: &RunManifest, report: &R) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(&Document { manifest, report })?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubles_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, 0.5] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_opt(None), "");
    }

    #[test]
    fn stems_do_not_collide() {
        let dir = tempfile::tempdir().unwrap();
        let t = Utc::now();
        let a = file_stem(dir.path(), "hitting", t);
        fs::write(dir.path().join(format!("{a}.csv")), "").unwrap();
        let b = file_stem(dir.path(), "hitting", t);
        assert_ne!(a, b);
        assert!(b.starts_with(&a));
    }
}
