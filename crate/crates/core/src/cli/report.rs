//! JSON and CSV report emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::scenario::Scenario;
use crate::error::{Error, Result};
use crate::euler_lagrange::ResidualReport;

/// A `(Θ, κ)` comparison with its pass flag and optional path or
/// refinement coordinate.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ResidualRow {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(flatten)]
    pub report: ResidualReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_slope: Option<f64>,
    pub pass: bool,
}

/// A scalar check against a reference value.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckRow {
    pub check: String,
    pub label: String,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Row {
    Residual(ResidualRow),
    Check(CheckRow),
}

impl Row {
    pub fn pass(&self) -> bool {
        match self {
            Row::Residual(r) => r.pass,
            Row::Check(c) => c.pass,
        }
    }

    pub fn summary(&self) -> String {
        let flag = if self.pass() { "PASS" } else { "FAIL" };
        match self {
            Row::Residual(r) => {
                let at = match (r.t, r.level) {
                    (Some(t), _) => format!(" t={t:.2}"),
                    (_, Some(l)) => format!(" level={l}"),
                    _ => String::new(),
                };
                let slope = r
                    .report
                    .convergence_slope
                    .map_or("n/a".to_string(), |s| format!("{s:.3}"));
                format!(
                    "{flag} {} {} {}{at}: EL {:.6e} pairing {:.6e} residual {:.3e} slope {slope}",
                    r.report.theta_name,
                    r.report.signature,
                    r.report.kappa,
                    r.report.el_value,
                    r.report.pairing_value,
                    r.report.relative_residual
                )
            }
            Row::Check(c) => format!(
                "{flag} {} {}: value {:.6e} reference {:.6e} error {:.3e} (tol {:.1e})",
                c.check, c.label, c.value, c.reference, c.error, c.tolerance
            ),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub suite: String,
    pub scenario: String,
    pub residuals: Vec<Row>,
    pub tolerances: BTreeMap<String, f64>,
    pub pass: bool,
    pub seed: u64,
    pub version: String,
    pub elapsed_ms: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: Scenario,
}

impl Report {
    pub fn new(scenario: &Scenario, suite: String, rows: Vec<Row>, error: Option<String>, elapsed_ms: u64) -> Self {
        let pass = error.is_none() && !rows.is_empty() && rows.iter().all(Row::pass);
        Self {
            suite,
            scenario: scenario.name.clone(),
            residuals: rows,
            tolerances: scenario.tolerance_map(),
            pass,
            seed: scenario.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            elapsed_ms,
            error,
            config: scenario.clone(),
        }
    }

    /// The residual rows only, as JSON; identical across thread counts.
    pub fn residuals_json(&self) -> Result<String> {
        serde_json::to_string(&self.residuals).map_err(|e| Error::Scenario(e.to_string()))
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ResidualCsv<'a> {
    theta: &'a str,
    signature: &'a str,
    kappa: &'a str,
    t: Option<f64>,
    level: Option<f64>,
    el_value: f64,
    el_value_imag: f64,
    pairing_value: f64,
    pairing_value_imag: f64,
    relative_residual: f64,
    convergence_slope: Option<f64>,
    fitted_slope: Option<f64>,
    pass: bool,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Scenario(format!("{}: {e}", path.display()))
}

/// Writes `<stem>.json` and `<stem>.csv` under `dir`; returns both paths.
pub fn write_report(report: &Report, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let csv_path = dir.join(format!("{stem}.csv"));
    let json = serde_json::to_string_pretty(report).map_err(|e| io_err(&json_path, e))?;
    fs::write(&json_path, json + "\n").map_err(|e| io_err(&json_path, e))?;
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| io_err(&csv_path, e))?;
    let residual_rows = report.residuals.iter().any(|r| matches!(r, Row::Residual(_)));
    for row in &report.residuals {
        match row {
            Row::Residual(r) if residual_rows => w
                .serialize(ResidualCsv {
                    theta: &r.report.theta_name,
                    signature: &r.report.signature,
                    kappa: &r.report.kappa,
                    t: r.t,
                    level: r.level,
                    el_value: r.report.el_value,
                    el_value_imag: r.report.el_value_imag,
                    pairing_value: r.report.pairing_value,
                    pairing_value_imag: r.report.pairing_value_imag,
                    relative_residual: r.report.relative_residual,
                    convergence_slope: r.report.convergence_slope,
                    fitted_slope: r.fitted_slope,
                    pass: r.pass,
                })
                .map_err(|e| io_err(&csv_path, e))?,
            Row::Check(c) if !residual_rows => w.serialize(c).map_err(|e| io_err(&csv_path, e))?,
            _ => {}
        }
    }
    if report.residuals.is_empty() {
        w.write_record(["theta", "signature", "kappa", "elValue", "pairingValue", "relativeResidual"])
            .map_err(|e| io_err(&csv_path, e))?;
    }
    w.flush().map_err(|e| io_err(&csv_path, e))?;
    Ok((json_path, csv_path))
}
