use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde_json::Value;

use crate::error::CliError;

/// Keys accepted in a config file.
const KEYS: &[&str] = &[
    "kappa", "a", "b", "n", "dt", "horizon", "threshold", "seed", "workers", "out", "max-substeps", "gate", "model", "edges",
    "grid", "u-max", "suite", "point", "probes", "expect", "stages", "points", "rhos", "t", "target", "probe", "x",
];

/// Resolves each setting as flag > config file > default and records the
/// resolved value for the manifest.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    pub resolved: BTreeMap<String, Value>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| CliError::Usage(format!("{}:{}: expected key=value", path.display(), i + 1)))?;
                let k = k.trim().replace('_', "-");
                if !KEYS.contains(&k.as_str()) {
                    return Err(CliError::Usage(format!("{}:{}: unknown key `{k}`", path.display(), i + 1)));
                }
                file.insert(k, v.trim().to_string());
            }
        }
        Ok(Self { file, resolved: BTreeMap::new() })
    }

    fn from_file<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.file
            .get(key)
            .map(|s| s.parse::<T>().map_err(|e| CliError::Usage(format!("config key `{key}` = `{s}`: {e}"))))
            .transpose()
    }

    /// Optional setting without a default.
    pub fn opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Clone + Into<Value>,
        T::Err: Display,
    {
        let v = match flag {
            Some(v) => Some(v),
            None => self.from_file(key)?,
        };
        if let Some(v) = &v {
            self.resolved.insert(key.to_string(), v.clone().into());
        }
        Ok(v)
    }

    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Clone + Into<Value>,
        T::Err: Display,
    {
        let v = self.opt(key, flag)?.unwrap_or(default);
        self.resolved.insert(key.to_string(), v.clone().into());
        Ok(v)
    }

    pub fn require<T>(&mut self, key: &str, flag: Option<T>) -> Result<T, CliError>
    where
        T: FromStr + Clone + Into<Value>,
        T::Err: Display,
    {
        self.opt(key, flag)?.ok_or_else(|| CliError::Usage(format!("--{key} is required")))
    }

    /// A value-enum flag, parsed from its kebab-case name in the file.
    pub fn choice<E: clap::ValueEnum + Clone>(&mut self, key: &str, flag: Option<E>, default: E) -> Result<E, CliError> {
        let v = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(s) => E::from_str(s, false).map_err(|e| CliError::Usage(format!("config key `{key}`: {e}")))?,
                None => default,
            },
        };
        let name = v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default();
        self.resolved.insert(key.to_string(), Value::String(name));
        Ok(v)
    }

    pub fn record(&mut self, key: &str, value: impl Into<Value>) {
        self.resolved.insert(key.to_string(), value.into());
    }
}

/// Comma-separated floats.
pub fn parse_list(key: &str, s: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("--{key}: `{t}`: {e}"))))
        .collect()
}

/// `RxC` with both sides positive.
pub fn parse_grid(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--grid expects RxC, got `{s}`"));
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    let r: usize = r.trim().parse().map_err(|_| bad())?;
    let c: usize = c.trim().parse().map_err(|_| bad())?;
    if r == 0 || c == 0 {
        return Err(bad());
    }
    Ok((r, c))
}

/// Comma-separated `re:im` pairs.
pub fn parse_points(key: &str, s: &str) -> Result<Vec<(f64, f64)>, CliError> {
    s.split(',')
        .map(|p| {
            let (re, im) = p
                .split_once(':')
                .ok_or_else(|| CliError::Usage(format!("--{key}: expected re:im, got `{p}`")))?;
            let f = |t: &str| t.trim().parse::<f64>().map_err(|e| CliError::Usage(format!("--{key}: `{t}`: {e}")));
            Ok((f(re)?, f(im)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_lists() {
        assert_eq!(parse_grid("41x21").unwrap(), (41, 21));
        assert!(parse_grid("4x0").is_err());
        assert!(parse_grid("44").is_err());
        assert_eq!(parse_list("edges", "-1, 0,1").unwrap(), vec![-1.0, 0.0, 1.0]);
        assert!(parse_list("edges", "1,,2").is_err());
        assert_eq!(parse_points("probes", "-1:1.5,0.7:2.8").unwrap(), vec![(-1.0, 1.5), (0.7, 2.8)]);
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "# comment\nkappa = 3\nn=50\nmax_substeps=7\n").unwrap();
        let mut s = Settings::load(Some(&path)).unwrap();
        assert_eq!(s.get("kappa", Some(2.0), 1.0).unwrap(), 2.0);
        assert_eq!(s.get("n", None::<u64>, 10).unwrap(), 50);
        assert_eq!(s.get("max-substeps", None::<u64>, 1).unwrap(), 7);
        assert_eq!(s.get("dt", None, 1e-3).unwrap(), 1e-3);
        assert!(s.require::<u64>("seed", None).is_err());
        assert_eq!(s.resolved["kappa"], Value::from(2.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        std::fs::write(&path, "kapa=3\n").unwrap();
        assert!(Settings::load(Some(&path)).is_err());
        std::fs::write(&path, "kappa\n").unwrap();
        assert!(Settings::load(Some(&path)).is_err());
    }
}
