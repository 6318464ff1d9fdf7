//! H¹ residuals of the second-order source expansion.

use std::time::Instant;

use serde_json::json;

use crate::coeff::CoefficientField;
use crate::fem::{assemble, nodal_gradient, nodal_hessian, AssembleOptions, Bc, CellCorrectors, CoefSource, Csr};
use crate::layers::{v1_eps, v2_eps};

use super::rate::Check;
use super::report::{ExpansionReport, Row};
use super::{axpy, build_level, cell_correctors, par_map, sub, Expectation, ExperimentConfig, HarnessError, Purpose};

/// Smallest acceptable residual ratio when ε is halved.
const HALVING_RATIO: f64 = 2.8;
const MIN_SLOPE: f64 = 1.6;

struct H1Level {
    row: Row,
    details: serde_json::Value,
}

fn h1_norm(lap: &Csr, mass: &Csr, x: &[f64]) -> f64 {
    (lap.inner(x, x) + mass.inner(x, x)).max(0.0).sqrt()
}

fn level(cfg: &ExperimentConfig, field: &CoefficientField, cell: &dyn CellCorrectors, eps: f64) -> Result<H1Level, HarnessError> {
    let start = Instant::now();
    let lv = build_level(cfg, field, cell, eps, Bc::Dirichlet)?;
    let mesh = &lv.mesh;
    let lap = assemble(
        mesh,
        CoefSource::Constant([[1.0, 0.0], [0.0, 1.0]]),
        Bc::Dirichlet,
        AssembleOptions::default(),
    )?;
    let f = vec![cfg.source; mesh.n_nodes()];
    let ue = lv.sys_eps.solve_source(&f, None)?;
    let u0 = lv.sys0.solve_source(&f, None)?;
    let grad = nodal_gradient(mesh, &u0);
    let hess = nodal_hessian(mesh, &u0);
    let v1 = v1_eps(mesh, &lv.sys_eps, &lv.nodal, &grad)?;
    let v2 = v2_eps(mesh, &lv.sys_eps, &lv.nodal, &hess)?;

    let norm = |x: &[f64]| h1_norm(&lap.stiffness, &lap.mass, x);
    let mut r = sub(&ue, &u0);
    let zeroth = norm(&r);
    axpy(&mut r, -eps, &lv.nodal.chi_dot(&grad));
    axpy(&mut r, -eps, &v1.field);
    let first = norm(&r);
    axpy(&mut r, -eps * eps, &lv.nodal.upsilon_dot(&hess));
    axpy(&mut r, -eps * eps, &v2.field);
    let second = norm(&r);

    let residual = v1.residual.max(v2.residual);
    let row = Row {
        eps,
        h: mesh.h,
        unknowns: lv.sys0.free().len(),
        converged: residual <= 1e-8,
        wall_seconds: start.elapsed().as_secs_f64(),
        h1_zeroth: Some(zeroth),
        h1_first: Some(first),
        h1_second: Some(second),
        layer_norm: Some(v1.norm_l2),
        ..Row::default()
    };
    let details = json!({
        "eps": eps,
        "v1": v1,
        "v2": v2,
        "v2_h1": norm(&v2.field),
    });
    Ok(H1Level { row, details })
}

pub fn h1_sweep(cfg: &ExperimentConfig) -> Result<ExpansionReport, HarnessError> {
    cfg.validate(Purpose::H1)?;
    if cfg.bc != Bc::Dirichlet {
        return Err(HarnessError::Config("the H1 expansion is set on Dirichlet problems".into()));
    }
    let field = cfg.field()?;
    let cell = cell_correctors(cfg, &field)?;
    let cell: &dyn CellCorrectors = cell.as_ref();
    let levels: Vec<H1Level> = par_map(cfg.workers, &cfg.eps, |&e| level(cfg, &field, cell, e))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let mut rep = ExpansionReport::new(&cfg.name, "h1");
    let mut details = Vec::new();
    for l in levels {
        rep.rows.push(l.row);
        details.push(l.details);
    }
    rep.fit_slopes(&["h1_zeroth", "h1_first", "h1_second", "layer_norm"]);
    let tol = cfg.tolerances;
    let health = rep.rows.iter().all(|r| r.converged);
    let mut checks = vec![Check::new("layer solve residual", health, "every layer residual <= 1e-8".into())];
    match cfg.expect {
        Expectation::None => checks.clear(),
        Expectation::Trivial => {
            let worst = rep.rows.iter().filter_map(|r| r.h1_second).fold(0.0, f64::max);
            checks.push(Check::new("trivial h1", worst <= tol.trivial, format!("{worst:.2e} <= {:e}", tol.trivial)));
        }
        Expectation::Rates => {
            let halving = rep.rows.windows(2).find(|w| (w[0].eps / w[1].eps - 2.0).abs() < 1e-9);
            checks.push(match halving {
                Some(w) => {
                    let (a, b) = (w[0].h1_second.unwrap_or(0.0), w[1].h1_second.unwrap_or(0.0));
                    let ratio = if b > 0.0 { a / b } else { f64::INFINITY };
                    Check::new(
                        "h1 halving ratio",
                        ratio >= HALVING_RATIO,
                        format!("eps {} -> {}: ratio {ratio:.3} >= {HALVING_RATIO}", w[0].eps, w[1].eps),
                    )
                }
                None => Check::inconclusive("h1 halving ratio", "no consecutive pair with eps ratio 2".into()),
            });
            checks.push(Check::slope_at_least("h1 rate", rep.slope("h1_second"), MIN_SLOPE, tol.fit));
            if let Some(f) = rep.slope("h1_first") {
                checks.push(Check::recorded("h1 first-order slope", format!("{:.3}", f.slope)));
            }
        }
    }
    rep.checks = checks;
    rep.details = json!({ "levels": details });
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Status;

    fn config(family: &str, params: &str, source: f64, expect: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
name = "h1"
coefficient = {{ family = "{family}", params = [{params}] }}
eps = [0.25, 0.2, 0.125]
source = {source}
expect = "{expect}"
"#
        ))
        .unwrap()
    }

    #[test]
    fn identity_residual_vanishes() {
        let rep = h1_sweep(&config("identity", "", 1.0, "trivial")).unwrap();
        assert!(rep.checks.iter().all(|c| c.status == Status::Pass), "{:?}", rep.checks);
        assert!(rep.rows.iter().all(|r| r.h1_zeroth.unwrap() < 1e-10));
    }

    #[test]
    fn zero_source_gives_zero_residual() {
        let rep = h1_sweep(&config("trig2d", "1.0", 0.0, "none")).unwrap();
        for r in &rep.rows {
            assert_eq!(r.h1_second, Some(0.0));
        }
    }

    #[test]
    fn corrections_reduce_the_residual() {
        let rep = h1_sweep(&config("trig2d", "1.0", 1.0, "none")).unwrap();
        for r in &rep.rows {
            assert!(r.h1_first.unwrap() < r.h1_zeroth.unwrap(), "{r:?}");
        }
    }
}
