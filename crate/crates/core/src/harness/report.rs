//! Run reports: per-experiment assertion rows, numeric tables, JSON emission
//! (schema "v1") and one CSV per table.
//!
//! CSV content is a pure function of config and seed; wall-clock timings live
//! only in the JSON so the CSVs stay bit-identical across repeated runs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::harness::config::ExperimentConfig;
use crate::types::ClusterGeometry;

pub const SCHEMA_VERSION: &str = "v1";

/// One checked condition with its measured value and threshold.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// One experiment section: its assertions and the tables it produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
    pub tables: Vec<String>,
    pub wall_ms: u128,
}

impl ExperimentReport {
    pub fn new(name: impl Into<String>) -> Self {
        ExperimentReport {
            name: name.into(),
            passed: true,
            assertions: Vec::new(),
            tables: Vec::new(),
            wall_ms: 0,
        }
    }

    /// Records `value <= threshold`.
    pub fn check_le(&mut self, name: impl Into<String>, value: f64, threshold: f64) -> bool {
        let passed = value <= threshold;
        self.passed &= passed;
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            value,
            threshold,
            detail: None,
        });
        passed
    }

    /// Records a boolean condition.
    pub fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) -> bool {
        self.passed &= passed;
        self.assertions.push(Assertion {
            name: name.into(),
            passed,
            value: if passed { 1.0 } else { 0.0 },
            threshold: 1.0,
            detail: Some(detail.into()),
        });
        passed
    }

    /// Records a failure coming from an error path.
    pub fn fail(&mut self, name: impl Into<String>, detail: impl Into<String>) {
        self.passed = false;
        self.assertions.push(Assertion {
            name: name.into(),
            passed: false,
            value: f64::NAN,
            threshold: 0.0,
            detail: Some(detail.into()),
        });
    }
}

/// A numeric table destined for one CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Geometry facts serialized with every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeometrySummary {
    pub q: usize,
    pub class_sizes: Vec<usize>,
    pub n: usize,
    pub delta: f64,
    pub theta_star_j: Vec<f64>,
    pub theta0: f64,
    pub theta_star: f64,
    pub d_bound: f64,
    pub band_halfwidth: f64,
}

impl GeometrySummary {
    pub fn from_geometry(g: &ClusterGeometry) -> Self {
        GeometrySummary {
            q: g.dim_q(),
            class_sizes: g.source().class_sizes().to_vec(),
            n: g.source().num_samples(),
            delta: g.delta(),
            theta_star_j: g.theta_star_all().to_vec(),
            theta0: g.theta0(),
            theta_star: g.theta_star(),
            d_bound: g.d_bound(),
            band_halfwidth: g.band_halfwidth(),
        }
    }
}

/// Full harness run output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySummary>,
    pub experiments: Vec<ExperimentReport>,
    pub tables: Vec<Table>,
    pub passed: bool,
}

impl RunReport {
    pub fn new(config: ExperimentConfig) -> Self {
        RunReport {
            schema: SCHEMA_VERSION.to_string(),
            config,
            geometry: None,
            experiments: Vec::new(),
            tables: Vec::new(),
            passed: true,
        }
    }

    pub fn push_experiment(&mut self, e: ExperimentReport) {
        self.passed &= e.passed;
        self.experiments.push(e);
    }

    pub fn push_table(&mut self, t: Table) {
        self.tables.push(t);
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn table_to_csv(t: &Table) -> String {
    let mut out = String::new();
    out.push_str(&t.columns.join(","));
    out.push('\n');
    for row in &t.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Writes `report.json` plus one `<table>.csv` per table into `dir`.
pub fn emit_report(r: &RunReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("report.json"), r.to_json()?)?;
    for t in &r.tables {
        std::fs::write(dir.join(format!("{}.csv", t.name)), table_to_csv(t))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_run_emits_valid_skeleton() {
        let cfg = ExperimentConfig::new(2, 2);
        let r = RunReport::new(cfg);
        assert!(r.passed);
        let dir = std::env::temp_dir().join("truncnet-report-test");
        emit_report(&r, &dir).unwrap();
        let text = std::fs::read_to_string(dir.join("report.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["schema"], "v1");
        assert_eq!(parsed["passed"], true);
    }

    #[test]
    fn failed_assertion_marks_run() {
        let cfg = ExperimentConfig::new(2, 2);
        let mut r = RunReport::new(cfg);
        let mut e = ExperimentReport::new("demo");
        e.check_le("bound", 2.0, 1.0);
        r.push_experiment(e);
        assert!(!r.passed);
        let json = r.to_json().unwrap();
        assert!(json.contains("\"passed\": false"));
    }

    #[test]
    fn csv_is_deterministic() {
        let mut t = Table::new("numbers", &["a", "b"]);
        t.push(vec![1.0, 0.070_622_455_154_644_87]);
        t.push(vec![-2.5, 1e-9]);
        let a = table_to_csv(&t);
        let b = table_to_csv(&t);
        assert_eq!(a, b);
        assert!(a.starts_with("a,b\n"));
    }
}
