//! Suites of experiments run by the `report` command.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::rate::{Check, Status};
use super::report::ExpansionReport;
use super::{run_experiment, Command, ExperimentConfig, HarnessError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteRun {
    /// Subcommand name, e.g. `sweep-dirichlet`.
    pub command: String,
    /// Experiment config, relative to the suite file.
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub name: String,
    pub run: Vec<SuiteRun>,
}

impl SuiteConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let s: SuiteConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        for r in &s.run {
            match Command::parse(&r.command) {
                None | Some(Command::Report) => return Err(HarnessError::Config(format!("unknown suite command `{}`", r.command))),
                Some(_) => {}
            }
        }
        if s.run.is_empty() {
            return Err(HarnessError::Config("suite has no [[run]] entries".into()));
        }
        Ok(s)
    }
}

/// Runs every entry, writing each report to `out/<experiment name>/`, and
/// returns the aggregate. All configs are parsed before anything runs.
pub fn run_suite(suite: &SuiteConfig, base: &Path, out: &Path) -> Result<ExpansionReport, HarnessError> {
    let mut jobs = Vec::new();
    for r in &suite.run {
        let path = base.join(&r.config);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let cfg = ExperimentConfig::from_toml(&text)?;
        jobs.push((Command::parse(&r.command).expect("checked on parse"), cfg));
    }
    let mut agg = ExpansionReport::new(&suite.name, "report");
    let mut summary = Vec::new();
    for (command, cfg) in jobs {
        let dir = out.join(&cfg.name);
        let (status, exit) = match run_experiment(command, &cfg) {
            Ok(rep) => {
                rep.write(&dir)?;
                for c in &rep.checks {
                    agg.checks.push(Check {
                        name: format!("{}: {}", rep.name, c.name),
                        ..c.clone()
                    });
                }
                for row in &rep.rows {
                    let mut row = row.clone();
                    row.origin = Some((rep.name.clone(), rep.kind.clone()));
                    agg.rows.push(row);
                }
                ("ok".to_string(), rep.exit_code())
            }
            Err(e) => {
                agg.checks.push(Check {
                    name: format!("{}: run", cfg.name),
                    status: Status::Fail,
                    detail: e.to_string(),
                });
                (e.to_string(), e.exit_code())
            }
        };
        summary.push(json!({ "name": cfg.name, "command": command.name(), "status": status, "exit_code": exit }));
    }
    agg.details = json!({ "runs": summary });
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects() {
        let s = SuiteConfig::from_toml("name = \"s\"\n[[run]]\ncommand = \"oracle1d\"\nconfig = \"o.toml\"\n").unwrap();
        assert_eq!(s.run.len(), 1);
        assert!(SuiteConfig::from_toml("name = \"s\"\n[[run]]\ncommand = \"report\"\nconfig = \"o.toml\"\n").is_err());
        assert!(SuiteConfig::from_toml("name = \"s\"\nrun = []\n").is_err());
    }

    #[test]
    fn runs_nested_reports() {
        let dir = std::env::temp_dir().join(format!("twoscale-suite-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("c.toml"), "name = \"cells\"\ncoefficient = { family = \"trig2d\", params = [1.0] }\ncell_grid = 16\n").unwrap();
        let s = SuiteConfig::from_toml("name = \"s\"\n[[run]]\ncommand = \"correctors\"\nconfig = \"c.toml\"\n").unwrap();
        let out = dir.join("out");
        let rep = run_suite(&s, &dir, &out).unwrap();
        assert!(out.join("cells/report.json").exists());
        assert!(out.join("cells/correctors.bin").exists());
        assert!(rep.checks.iter().all(|c| c.name.starts_with("cells: ")));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
