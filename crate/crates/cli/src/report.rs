//! Report assembly and the single writer for `report.json` and CSV tables.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::config::{Config, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Skip,
}

/// One named certification with its measured slack (positive when it holds).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub stage: String,
    pub name: String,
    pub verdict: Verdict,
    pub slack: f64,
    pub detail: String,
}

impl Check {
    pub fn new(
        stage: &str,
        name: &str,
        passed: bool,
        slack: f64,
        detail: impl Into<String>,
    ) -> Self {
        Self {
            stage: stage.into(),
            name: name.into(),
            verdict: if passed { Verdict::Pass } else { Verdict::Fail },
            slack,
            detail: detail.into(),
        }
    }

    pub fn skip(stage: &str, name: &str, detail: impl Into<String>) -> Self {
        Self {
            stage: stage.into(),
            name: name.into(),
            verdict: Verdict::Skip,
            slack: f64::NAN,
            detail: detail.into(),
        }
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// A CSV table: header plus pre-formatted rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&'static str]) -> Self {
        Self {
            file: file.into(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Shortest round-trip decimal form; non-finite values spelled out.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        serde_json::to_string(&x).expect("finite float serializes")
    }
}

/// `exp(ln_x)` in decimal scientific notation, even beyond the `f64` range.
pub fn num_from_ln(ln_x: f64) -> String {
    let x = ln_x.exp();
    if x.is_normal() || !ln_x.is_finite() {
        return num(x);
    }
    let l10 = ln_x / std::f64::consts::LN_10;
    let e = l10.floor();
    let mantissa = 10f64.powf(l10 - e);
    format!("{mantissa:.15}e{}", e as i64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub config_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub command: String,
    pub status: &'static str,
    pub exit_code: i32,
    pub provenance: Provenance,
    pub config: Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub constants: Value,
    pub checks: Vec<Check>,
    pub stages: Value,
    pub tables: Vec<String>,
}

impl Report {
    pub fn new(command: &str, config: &Config) -> Self {
        Self {
            command: command.into(),
            status: "pass",
            exit_code: 0,
            provenance: Provenance {
                tool: "fracheat",
                version: env!("CARGO_PKG_VERSION"),
                core_version: fracheat_core::VERSION,
                config_sha256: config.hash(),
            },
            config: config.experiment(),
            violations: Vec::new(),
            error: None,
            constants: Value::Object(Default::default()),
            checks: Vec::new(),
            stages: Value::Object(Default::default()),
            tables: Vec::new(),
        }
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.failed())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Write `report.json` and every table into `dir`, creating it if needed.
pub fn write_outputs(dir: &Path, report: &Report, tables: &[Table]) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for t in tables {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(dir.join(&t.file))?;
        w.write_record(&t.header)?;
        for row in &t.rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    fs::write(dir.join("report.json"), report.to_json())
}
