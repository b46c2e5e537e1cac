#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
    pub files: Vec<PathBuf>,
}

impl Run {
    pub fn csv(&self) -> String {
        self.file_with(".csv", |p| !p.to_string_lossy().ends_with("-inteq.csv"))
    }

    pub fn inteq_csv(&self) -> String {
        self.file_with("-inteq.csv", |_| true)
    }

    pub fn json(&self) -> Value {
        serde_json::from_str(&self.file_with(".json", |_| true)).unwrap()
    }

    fn file_with(&self, suffix: &str, keep: impl Fn(&Path) -> bool) -> String {
        let path = self
            .files
            .iter()
            .find(|p| p.to_string_lossy().ends_with(suffix) && keep(p))
            .unwrap_or_else(|| panic!("no {suffix} output in {:?}", self.files));
        std::fs::read_to_string(path).unwrap()
    }

    /// Data rows of the main CSV, split on commas.
    pub fn rows(&self) -> Vec<Vec<String>> {
        self.csv().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
    }

    pub fn header(&self) -> Vec<String> {
        self.csv().lines().next().unwrap().split(',').map(str::to_string).collect()
    }

    pub fn column(&self, name: &str) -> Vec<String> {
        let i = self.header().iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows().into_iter().map(|r| r[i].clone()).collect()
    }
}

pub fn sle_lab(args: &[&str], out: &Path) -> Run {
    sle_lab_env(args, out, &[])
}

pub fn sle_lab_env(args: &[&str], out: &Path, env: &[(&str, &Path)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_sle-lab"));
    cmd.args(args).current_dir(out).env_remove("SLE_LAB_OUT");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let output = cmd.output().expect("binary runs");
    let stdout = String::from_utf8(output.stdout).unwrap();
    let files = stdout.lines().filter_map(|l| l.strip_prefix("wrote ")).map(|l| out.join(l)).collect();
    Run {
        code: output.status.code().expect("exit code"),
        stdout,
        stderr: String::from_utf8(output.stderr).unwrap(),
        files,
    }
}

pub fn schema() -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::options()
        .with_draft(jsonschema::Draft::Draft7)
        .compile(&schema)
        .expect("schema compiles")
}

pub fn assert_valid(doc: &Value) {
    let schema = schema();
    let msgs: Vec<String> = match schema.validate(doc) {
        Ok(()) => return,
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("schema violations: {msgs:#?}");
}

pub fn f(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s:?}"))
}
