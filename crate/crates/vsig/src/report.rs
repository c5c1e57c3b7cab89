//! Result emission: `report.json`, `table.csv`, `predictions.csv`.
//!
//! serde_json's default map is ordered, so reruns with identical inputs
//! produce byte-identical files apart from the timestamp field.

use crate::error::Result;
use serde::Serialize;
use serde_json::Value;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

/// Everything a driver hands to [`emit_report`].
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub timestamp_unix: u64,
    pub git_describe: String,
    pub config: Value,
    pub results: Value,
}

impl Report {
    pub fn new(config: Value, results: Value) -> Self {
        Report {
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            git_describe: env!("VSIG_GIT_DESCRIBE").to_string(),
            config,
            results,
        }
    }
}

/// A CSV table: header plus rows, written with a stable column order.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Paths of the emitted files.
#[derive(Debug, Clone)]
pub struct EmittedFiles {
    pub report: PathBuf,
    pub table: PathBuf,
    pub predictions: PathBuf,
}

/// Writes the three artifacts into `dir` (created if missing).
pub fn emit_report(
    dir: &Path,
    report: &Report,
    table: &Table,
    predictions: &Table,
) -> Result<EmittedFiles> {
    std::fs::create_dir_all(dir)?;
    let report_path = dir.join("report.json");
    let mut payload = serde_json::to_string_pretty(report).expect("report serializes");
    payload.push('\n');
    std::fs::write(&report_path, payload)?;
    let table_path = dir.join("table.csv");
    std::fs::write(&table_path, table.to_csv())?;
    let predictions_path = dir.join("predictions.csv");
    std::fs::write(&predictions_path, predictions.to_csv())?;
    Ok(EmittedFiles {
        report: report_path,
        table: table_path,
        predictions: predictions_path,
    })
}

/// JSON dump of a fitted ridge model: coefficients keyed by word string
/// (raw feature scale), standardization statistics and the penalty.
pub fn ridge_model_json(model: &vsig_core::learning::RidgeModel) -> Value {
    let labels: Vec<String> = model
        .words()
        .iter()
        .map(|w| {
            w.iter()
                .map(|l| l.to_string())
                .collect::<Vec<_>>()
                .join(".")
        })
        .collect();
    let raw = model.coefficients_raw();
    let coefficients: serde_json::Map<String, Value> = labels
        .iter()
        .zip(raw.iter())
        .map(|(label, &c)| (label.clone(), Value::from(c)))
        .collect();
    serde_json::json!({
        "eta": model.eta(),
        "coefficients": coefficients,
        "standardization": {"means": model.means(), "scales": model.scales()},
        "theta_standardized": model.theta(),
    })
}

/// Compact float formatting shared by every emitted table.
pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.10e}")
    } else {
        "nan".to_string()
    }
}
