//! Report rows, CSV/JSON emission.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::rate::{Check, RateFit, ThetaFit};
use super::HarnessError;

/// Column order of `report.csv`. Missing values are empty cells.
pub const CSV_COLUMNS: [&str; 23] = [
    "experiment",
    "kind",
    "eps",
    "h",
    "unknowns",
    "converged",
    "lambda_eps",
    "lambda0",
    "r0",
    "r1",
    "e0",
    "e1",
    "e2",
    "projection",
    "osborn",
    "w0",
    "w1",
    "h1_zeroth",
    "h1_first",
    "h1_second",
    "layer_norm",
    "neumann_integral",
    "neumann_norm",
];

/// One ε level of a sweep.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Row {
    /// Experiment name and kind when the row comes from another report.
    #[serde(skip)]
    pub origin: Option<(String, String)>,
    pub eps: f64,
    pub h: f64,
    pub unknowns: usize,
    pub converged: bool,
    pub wall_seconds: f64,
    /// Cluster mean of the oscillating problem.
    pub lambda_eps: Option<f64>,
    /// Cluster mean of the homogenized problem on the same mesh.
    pub lambda0: Option<f64>,
    pub r0: Option<f64>,
    pub r1: Option<f64>,
    pub e0: Option<f64>,
    pub e1: Option<f64>,
    pub e2: Option<f64>,
    pub projection: Option<f64>,
    pub osborn: Option<f64>,
    pub w0: Option<f64>,
    pub w1: Option<f64>,
    pub h1_zeroth: Option<f64>,
    pub h1_first: Option<f64>,
    pub h1_second: Option<f64>,
    pub layer_norm: Option<f64>,
    pub neumann_integral: Option<f64>,
    pub neumann_norm: Option<f64>,
}

impl Row {
    /// Named quantity as used by slope fits.
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "r0" => self.r0,
            "r1" => self.r1,
            "e0" => self.e0,
            "e1" => self.e1,
            "e2" => self.e2,
            "projection" => self.projection,
            "osborn" => self.osborn,
            "w0" => self.w0,
            "w1" => self.w1,
            "h1_zeroth" => self.h1_zeroth,
            "h1_first" => self.h1_first,
            "h1_second" => self.h1_second,
            "layer_norm" => self.layer_norm,
            _ => None,
        }
    }

    fn csv_cells(&self) -> Vec<String> {
        let f = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        vec![
            format!("{:.12e}", self.eps),
            format!("{:.12e}", self.h),
            self.unknowns.to_string(),
            self.converged.to_string(),
            f(self.lambda_eps),
            f(self.lambda0),
            f(self.r0),
            f(self.r1),
            f(self.e0),
            f(self.e1),
            f(self.e2),
            f(self.projection),
            f(self.osborn),
            f(self.w0),
            f(self.w1),
            f(self.h1_zeroth),
            f(self.h1_first),
            f(self.h1_second),
            f(self.layer_norm),
            f(self.neumann_integral),
            f(self.neumann_norm),
        ]
    }
}

/// Two estimates of the first-order eigenvalue coefficient.
#[derive(Debug, Clone, Serialize, Default)]
pub struct ThetaReport {
    pub pairing: Option<f64>,
    pub pairing_error: Option<f64>,
    pub empirical: Option<ThetaFit>,
    /// Empirical fit without the largest ε.
    pub empirical_truncated: Option<ThetaFit>,
    /// `|pairing − empirical|`.
    pub discrepancy: Option<f64>,
}

/// Everything one subcommand produced.
#[derive(Debug, Clone, Serialize)]
pub struct ExpansionReport {
    pub name: String,
    pub kind: String,
    pub version: String,
    pub rows: Vec<Row>,
    pub slopes: BTreeMap<String, RateFit>,
    pub theta: Option<ThetaReport>,
    pub checks: Vec<Check>,
    /// Kind-specific diagnostics.
    pub details: serde_json::Value,
    pub config: serde_json::Value,
    pub wall_seconds: f64,
    /// Text dumps written under `fields/` as `(file name, contents)`.
    #[serde(skip)]
    pub fields: Vec<(String, String)>,
    /// Binary files written next to the reports.
    #[serde(skip)]
    pub binaries: Vec<(String, Vec<u8>)>,
}

impl ExpansionReport {
    pub fn new(name: &str, kind: &str) -> Self {
        ExpansionReport {
            name: name.to_string(),
            kind: kind.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            rows: Vec::new(),
            slopes: BTreeMap::new(),
            theta: None,
            checks: Vec::new(),
            details: serde_json::Value::Null,
            config: serde_json::Value::Null,
            wall_seconds: 0.0,
            fields: Vec::new(),
            binaries: Vec::new(),
        }
    }

    /// Fits every named quantity over converged rows, skipping those with
    /// fewer than three usable values.
    pub fn fit_slopes(&mut self, names: &[&str]) {
        for name in names {
            let pts: Vec<(f64, f64)> = self
                .rows
                .iter()
                .filter(|r| r.converged)
                .filter_map(|r| r.get(name).map(|v| (r.eps, v)))
                .collect();
            if let Ok(fit) = super::rate::rate_fit(&pts) {
                self.slopes.insert(name.to_string(), fit);
            }
        }
    }

    pub fn slope(&self, name: &str) -> Option<&RateFit> {
        self.slopes.get(name)
    }

    pub fn exit_code(&self) -> i32 {
        super::rate::exit_code(&self.checks)
    }

    /// CSV text; independent of wall-clock time, so identical inputs give
    /// identical bytes.
    pub fn csv(&self) -> String {
        let mut out = CSV_COLUMNS.join(",");
        out.push('\n');
        for r in &self.rows {
            let (name, kind) = r.origin.clone().unwrap_or_else(|| (self.name.clone(), self.kind.clone()));
            let mut cells = vec![name, kind];
            cells.extend(r.csv_cells());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `report.csv`, `report.json`, binaries and field dumps into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.csv())?;
        fs::write(dir.join("report.json"), self.json())?;
        for (name, bytes) in &self.binaries {
            fs::write(dir.join(name), bytes)?;
        }
        if !self.fields.is_empty() {
            let sub = dir.join("fields");
            fs::create_dir_all(&sub)?;
            for (name, text) in &self.fields {
                fs::write(sub.join(name), text)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_row_width_agree() {
        let mut rep = ExpansionReport::new("x", "sweep-dirichlet");
        rep.rows.push(Row {
            eps: 0.125,
            r0: Some(1.5),
            ..Default::default()
        });
        let csv = rep.csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0].split(',').count(), CSV_COLUMNS.len());
        assert_eq!(lines[1].split(',').count(), CSV_COLUMNS.len());
        assert!(lines[1].starts_with("x,sweep-dirichlet,1.250000000000e-1,"));
    }

    #[test]
    fn slopes_skip_missing_quantities() {
        let mut rep = ExpansionReport::new("x", "k");
        for e in [0.5, 0.25, 0.125] {
            rep.rows.push(Row {
                eps: e,
                converged: true,
                r0: Some(e),
                ..Default::default()
            });
        }
        rep.fit_slopes(&["r0", "r1"]);
        assert!((rep.slope("r0").unwrap().slope - 1.0).abs() < 1e-12);
        assert!(rep.slope("r1").is_none());
    }
}
