//! Neumann ε-sweep with an empirically fitted first-order coefficient.

use std::time::Instant;

use serde_json::json;

use crate::cell::{CorrectorSet, TrigInterpolant};
use crate::coeff::CoefficientField;
use crate::fem::{nodal_gradient, Bc, CellCorrectors};
use crate::layers::neumann_data;
use crate::spectral::{cluster_mean, ProjectionPair};

use super::rate::{theta_fit, Check};
use super::report::{ExpansionReport, Row, ThetaReport};
use super::{axpy, build_level, cell_correctors, cluster, par_map, sub, Expectation, ExperimentConfig, HarnessError, Purpose};

/// Largest admissible boundary integral of the Neumann layer data.
const COMPATIBILITY_TOL: f64 = 1e-8;

struct NeumannLevel {
    row: Row,
    details: serde_json::Value,
}

fn level(
    cfg: &ExperimentConfig,
    field: &CoefficientField,
    cell: &dyn CellCorrectors,
    flux: [&TrigInterpolant; 2],
    eps: f64,
) -> Result<NeumannLevel, HarnessError> {
    let start = Instant::now();
    let lv = build_level(cfg, field, cell, eps, Bc::Neumann)?;
    let mesh = &lv.mesh;
    let c0 = cluster(cfg, &lv.sys0)?;
    let ce = cluster(cfg, &lv.sys_eps)?;
    let pair = ProjectionPair::new(&lv.sys0.mass, &c0, &ce)?;
    let (lambda0, _) = cluster_mean(&c0.values);
    let (lambda_eps, _) = cluster_mean(&ce.values);

    let (mut e0, mut e1) = (0.0f64, 0.0f64);
    let (mut integral, mut data_norm) = (0.0f64, 0.0f64);
    for (phi0, phie) in pair.basis0.iter().zip(&pair.basis_eps) {
        let g = nodal_gradient(mesh, phi0);
        let mut d = sub(phie, phi0);
        e0 = e0.max(lv.sys0.mass_norm(&d));
        axpy(&mut d, -eps, &lv.nodal.chi_dot(&g));
        e1 = e1.max(lv.sys0.mass_norm(&d));
        let data = neumann_data(mesh, flux, eps, &g)?;
        integral = integral.max(data.integral.abs());
        data_norm = data_norm.max(data.norm_l2);
    }
    let converged = c0.residuals.iter().chain(&ce.residuals).all(|r| *r <= cfg.tolerances.eigen);
    let row = Row {
        eps,
        h: mesh.h,
        unknowns: lv.sys0.free().len(),
        converged,
        wall_seconds: start.elapsed().as_secs_f64(),
        lambda_eps: Some(lambda_eps),
        lambda0: Some(lambda0),
        r0: Some((lambda_eps - lambda0).abs()),
        e0: Some(e0),
        e1: Some(e1),
        neumann_integral: Some(integral),
        neumann_norm: Some(data_norm),
        ..Row::default()
    };
    Ok(NeumannLevel {
        row,
        details: json!({ "eps": eps, "cluster0": c0, "cluster_eps": ce }),
    })
}

pub fn sweep_neumann(cfg: &ExperimentConfig) -> Result<ExpansionReport, HarnessError> {
    cfg.validate(Purpose::SweepNeumann)?;
    let field = cfg.field()?;
    let cell = cell_correctors(cfg, &field)?;
    let cell: &dyn CellCorrectors = cell.as_ref();
    let set = CorrectorSet::compute(&field, cfg.cell_grid, cfg.tolerances.cell)?;
    let grid = set.grid();
    // b_12k sits at index (0·2 + 1)·2 + k.
    let b121 = grid.interpolant(&set.b[2]);
    let b122 = grid.interpolant(&set.b[3]);

    let levels: Vec<NeumannLevel> = par_map(cfg.workers, &cfg.eps, |&e| level(cfg, &field, cell, [&b121, &b122], e))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let mut rep = ExpansionReport::new(&cfg.name, "sweep-neumann");
    let mut details = Vec::new();
    for l in levels {
        rep.rows.push(l.row);
        details.push(l.details);
    }

    let diffs: Vec<(f64, f64)> = rep
        .rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.eps, r.lambda_eps.unwrap_or(0.0) - r.lambda0.unwrap_or(0.0)))
        .collect();
    let full = theta_fit(&diffs, cfg.remainder_exponent).ok();
    let truncated = theta_fit(diffs.get(1..).unwrap_or(&[]), cfg.remainder_exponent).ok();
    if let Some(f) = &full {
        for r in rep.rows.iter_mut() {
            r.r1 = Some((r.lambda_eps.unwrap_or(0.0) - r.lambda0.unwrap_or(0.0) - r.eps * f.theta).abs());
        }
    }
    rep.fit_slopes(&["r0", "r1", "e0", "e1"]);
    rep.theta = Some(ThetaReport {
        pairing: None,
        pairing_error: None,
        discrepancy: match (&full, &truncated) {
            (Some(a), Some(b)) => Some((a.theta - b.theta).abs()),
            _ => None,
        },
        empirical: full.clone(),
        empirical_truncated: truncated.clone(),
    });

    let tol = cfg.tolerances;
    let worst_integral = rep.rows.iter().filter_map(|r| r.neumann_integral).fold(0.0, f64::max);
    let compat = Check::new(
        "neumann compatibility",
        worst_integral <= COMPATIBILITY_TOL,
        format!("max boundary integral {worst_integral:.2e} <= {COMPATIBILITY_TOL:e}"),
    );
    let mut checks = Vec::new();
    match cfg.expect {
        Expectation::None => {}
        Expectation::Trivial => {
            checks.push(match &full {
                Some(f) => {
                    let bound = (2.0 * f.error).max(tol.trivial);
                    Check::new("trivial theta", f.theta.abs() <= bound, format!("|{:.2e}| <= {bound:.2e}", f.theta))
                }
                None => Check::inconclusive("trivial theta", "no fit".into()),
            });
            let worst = rep.rows.iter().filter_map(|r| r.r0).fold(0.0, f64::max);
            checks.push(Check::new("trivial r0", worst <= tol.trivial, format!("{worst:.2e} <= {:e}", tol.trivial)));
            checks.push(compat);
        }
        Expectation::Rates => {
            checks.push(match (&full, &truncated) {
                (Some(a), Some(b)) => {
                    let change = (a.theta - b.theta).abs();
                    Check::new(
                        "theta truncation stability",
                        change <= 2.0 * a.error,
                        format!("theta {:.4} -> {:.4}, change {change:.2e} <= 2 x {:.2e}", a.theta, b.theta, a.error),
                    )
                }
                _ => Check::inconclusive("theta truncation stability", "too few converged rows".into()),
            });
            checks.push(Check::slope_margin("r1 improves on r0", rep.slope("r1"), rep.slope("r0"), 0.15, tol.fit));
            checks.push(compat);
        }
    }
    rep.checks = checks;
    rep.details = json!({ "levels": details, "flux_potential_residual": set.residuals });
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Status;

    #[test]
    fn identity_gives_zero_theta() {
        let cfg = ExperimentConfig::from_toml(
            r#"
name = "neumann-identity"
coefficient = { family = "identity", params = [] }
bc = "neumann"
eps = [0.25, 0.2, 0.16, 0.125]
target = { lambda = 3.39, window = 1.0, multiplicity = 2 }
expect = "trivial"
"#,
        )
        .unwrap();
        let rep = sweep_neumann(&cfg).unwrap();
        for c in &rep.checks {
            assert_eq!(c.status, Status::Pass, "{c:?}");
        }
        for r in &rep.rows {
            assert!(r.neumann_integral.unwrap() <= COMPATIBILITY_TOL);
            assert!(r.e1.unwrap() < 1e-8);
        }
    }
}
