//! Dirichlet ε-sweep: eigenvalue, eigenfunction, projection and gradient
//! expansion residuals.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::coeff::CoefficientField;
use crate::fem::meshio::{write_field, write_mesh, NodalField};
use crate::fem::{nodal_gradient, nodal_hessian, Bc, CellCorrectors};
use crate::layers::{estimate_kbl, transfer, v1_eps, KblEstimate};
use crate::spectral::{
    cluster_mean, combine, osborn_diagnostic, procrustes, project_onto, projection_laws, psi_bl_solve, random_rotation,
    resolvent_defect, source_operator, theta_from_pairing, theta_rotation_defect, EigenCluster, ProjectionPair,
    PsiSolution,
};

use super::gradient::{delta_weights, weighted_gradient_residual};
use super::rate::{theta_fit, Check};
use super::report::{ExpansionReport, Row, ThetaReport};
use super::{axpy, build_level, cell_correctors, cluster, par_map, sub, Expectation, ExperimentConfig, HarnessError, Level, Purpose};

/// Solver health bound shared by every layer and ψ solve.
const SOLVE_TOL: f64 = 1e-8;
/// Bound for the projection laws and the rotation invariance of θ.
const ALGEBRA_TOL: f64 = 1e-8;

/// Per-level output of the first pass.
struct Stage {
    level: Level,
    c0: EigenCluster,
    ce: EigenCluster,
    /// First-order layers for the raw homogenized basis.
    v1: Vec<Vec<f64>>,
    layer_residual: f64,
    seconds: f64,
}

fn first_pass(cfg: &ExperimentConfig, field: &CoefficientField, cell: &dyn CellCorrectors, eps: f64) -> Result<Stage, HarnessError> {
    let start = Instant::now();
    let level = build_level(cfg, field, cell, eps, Bc::Dirichlet)?;
    let c0 = cluster(cfg, &level.sys0)?;
    let ce = cluster(cfg, &level.sys_eps)?;
    let mut v1 = Vec::new();
    let mut layer_residual: f64 = 0.0;
    for phi in &c0.vectors {
        let g = nodal_gradient(&level.mesh, phi);
        let s = v1_eps(&level.mesh, &level.sys_eps, &level.nodal, &g)?;
        layer_residual = layer_residual.max(s.residual).max(s.trace_defect);
        v1.push(s.field);
    }
    Ok(Stage {
        level,
        c0,
        ce,
        v1,
        layer_residual,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Homogenized basis and layers of one level, rotated so the basis matches
/// the finest level's.
struct Aligned {
    basis: Vec<Vec<f64>>,
    v1: Vec<Vec<f64>>,
}

fn align_to_finest(stages: &[Stage]) -> Vec<Aligned> {
    let fine = stages.last().expect("at least one level");
    let mass = &fine.level.sys0.mass;
    stages
        .iter()
        .enumerate()
        .map(|(i, st)| {
            if i + 1 == stages.len() {
                return Aligned {
                    basis: st.c0.vectors.clone(),
                    v1: st.v1.clone(),
                };
            }
            let moved: Vec<Vec<f64>> = st.c0.vectors.iter().map(|v| transfer(&st.level.mesh, v, &fine.level.mesh)).collect();
            let r = procrustes(mass, &fine.c0.vectors, &moved);
            Aligned {
                basis: combine(&st.c0.vectors, &r),
                v1: combine(&st.v1, &r),
            }
        })
        .collect()
}

/// Everything derived from one level after `K^bl` is known.
struct LevelResult {
    row: Row,
    psi_health: f64,
    details: serde_json::Value,
    fields: Vec<(String, String)>,
}

struct Shared<'a> {
    cfg: &'a ExperimentConfig,
    kbl: &'a [Vec<f64>],
}

fn second_pass(sh: &Shared<'_>, fine: &Stage, st: &Stage, al: &Aligned, coarsest: bool, finest: bool) -> Result<LevelResult, HarnessError> {
    let start = Instant::now();
    let cfg = sh.cfg;
    let lv = &st.level;
    let (mesh, mass, eps) = (&lv.mesh, &lv.sys0.mass, lv.eps);
    let m = al.basis.len();
    let (lambda0, mu0) = cluster_mean(&st.c0.values);
    let (lambda_eps, mu_eps) = cluster_mean(&st.ce.values);

    let kbl: Vec<Vec<f64>> = if finest {
        sh.kbl.to_vec()
    } else {
        sh.kbl.iter().map(|k| transfer(&fine.level.mesh, k, mesh)).collect()
    };
    let psis: Vec<PsiSolution> = kbl
        .iter()
        .map(|k| psi_bl_solve(&lv.sys0, &al.basis, lambda0, k))
        .collect::<Result<_, _>>()?;
    let psi_health = psis.iter().map(|p| p.residual.max(p.orthogonality_defect)).fold(0.0, f64::max);

    let mut c0a = st.c0.clone();
    c0a.vectors = al.basis.clone();
    let pair = ProjectionPair::new(mass, &c0a, &st.ce)?;
    let grads: Vec<Vec<[f64; 2]>> = al.basis.iter().map(|p| nodal_gradient(mesh, p)).collect();
    let chi_g: Vec<Vec<f64>> = grads.iter().map(|g| lv.nodal.chi_dot(g)).collect();

    let (mut e0, mut e1, mut e2) = (0.0f64, 0.0f64, 0.0f64);
    for j in 0..m {
        let mut d = sub(&pair.basis_eps[j], &al.basis[j]);
        e0 = e0.max(lv.sys0.mass_norm(&d));
        axpy(&mut d, -eps, &chi_g[j]);
        e1 = e1.max(lv.sys0.mass_norm(&d));
        axpy(&mut d, -eps, &psis[j].psi);
        e2 = e2.max(lv.sys0.mass_norm(&d));
    }

    // Range residual on basis members and random unit combinations.
    let mut rng = ChaCha8Rng::seed_from_u64(sh.cfg.seed);
    let mut coefs: Vec<Vec<f64>> = (0..m).map(|j| (0..m).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    if m > 1 {
        for _ in 0..cfg.samples {
            let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            coefs.push(c.iter().map(|x| x / n).collect());
        }
    }
    let mut projection: f64 = 0.0;
    for c in &coefs {
        let mut g = vec![0.0; mesh.n_nodes()];
        let mut corr = vec![0.0; mesh.n_nodes()];
        for j in 0..m {
            axpy(&mut g, c[j], &al.basis[j]);
            axpy(&mut corr, c[j], &chi_g[j]);
            axpy(&mut corr, c[j], &psis[j].psi);
        }
        let mut d = sub(&project_onto(mass, &pair.basis_eps, &g)?, &g);
        axpy(&mut d, -eps, &corr);
        projection = projection.max(lv.sys0.mass_norm(&d));
    }

    let te = source_operator(&lv.sys_eps);
    let t0 = source_operator(&lv.sys0);
    let osborn = osborn_diagnostic(mass, &te, &t0, &al.basis, mu_eps, mu0)?;

    let (mut w0, mut w1) = (None, None);
    if m == 1 {
        let weights = delta_weights(mesh);
        let (phi0, phie, psi) = (&al.basis[0], &pair.basis_eps[0], &psis[0].psi);
        let mut u0 = phi0.clone();
        axpy(&mut u0, eps, &chi_g[0]);
        w0 = Some(weighted_gradient_residual(mesh, phie, &u0, &weights));
        let hess = nodal_hessian(mesh, phi0);
        let mut u1 = u0;
        axpy(&mut u1, eps * eps, &lv.nodal.upsilon_dot(&hess));
        axpy(&mut u1, eps, psi);
        axpy(&mut u1, eps * eps, &lv.nodal.chi_dot(&nodal_gradient(mesh, psi)));
        w1 = Some(weighted_gradient_residual(mesh, phie, &u1, &weights));
    }

    let mut details = json!({
        "eps": eps,
        "cluster0": st.c0,
        "cluster_eps": st.ce,
        "psi": psis,
        "layer_residual": st.layer_residual,
        "alignment": pair.alignment,
    });
    if coarsest {
        let laws0 = projection_laws(mass, &al.basis, cfg.samples, cfg.seed)?;
        let laws_eps = projection_laws(mass, &pair.basis_eps, cfg.samples, cfg.seed)?;
        let mut resolvent: f64 = 0.0;
        for (v, &l) in st.c0.vectors.iter().zip(&st.c0.values) {
            resolvent = resolvent.max(resolvent_defect(&lv.sys0, v, l)?);
        }
        details["projection_laws"] = json!({ "homogenized": laws0, "oscillating": laws_eps, "resolvent": resolvent });
    }

    let mut fields = Vec::new();
    if finest && cfg.fields {
        fields.push(("mesh.txt".to_string(), write_mesh(mesh)));
        for j in 0..m {
            for (name, v) in [
                ("phi_eps", &pair.basis_eps[j]),
                ("phi0", &al.basis[j]),
                ("chi_grad", &chi_g[j]),
                ("psi", &psis[j].psi),
                ("v1", &al.v1[j]),
            ] {
                let tag = format!("{name}_{j}");
                fields.push((format!("{tag}.txt"), write_field(&NodalField::scalar(&tag, v))));
            }
        }
    }

    let layer_norm = al.v1.iter().map(|v| lv.sys0.mass_norm(v)).fold(0.0, f64::max);
    let converged = psi_health <= SOLVE_TOL
        && st.layer_residual <= SOLVE_TOL
        && st.c0.residuals.iter().chain(&st.ce.residuals).all(|r| *r <= cfg.tolerances.eigen);
    let row = Row {
        eps,
        h: mesh.h,
        unknowns: lv.sys0.free().len(),
        converged,
        wall_seconds: st.seconds + start.elapsed().as_secs_f64(),
        lambda_eps: Some(lambda_eps),
        lambda0: Some(lambda0),
        r0: Some((lambda_eps - lambda0).abs()),
        e0: Some(e0),
        e1: Some(e1),
        e2: Some(e2),
        projection: Some(projection),
        osborn: Some(osborn),
        w0,
        w1,
        layer_norm: Some(layer_norm),
        ..Row::default()
    };
    Ok(LevelResult {
        row,
        psi_health,
        details,
        fields,
    })
}

/// Runs the sweep. With `gradient` the report is of kind `gradient` and its
/// checks concern the weighted gradient residuals.
pub fn sweep_dirichlet(cfg: &ExperimentConfig, gradient: bool) -> Result<ExpansionReport, HarnessError> {
    cfg.validate(if gradient { Purpose::Gradient } else { Purpose::SweepDirichlet })?;
    let field = cfg.field()?;
    let cell = cell_correctors(cfg, &field)?;
    let cell: &dyn CellCorrectors = cell.as_ref();

    let stages: Vec<Stage> = par_map(cfg.workers, &cfg.eps, |&e| first_pass(cfg, &field, cell, e))
        .into_iter()
        .collect::<Result<_, _>>()?;
    let aligned = align_to_finest(&stages);
    let fine = stages.last().expect("validated eps list");
    let fine_al = aligned.last().expect("validated eps list");
    let fmass = &fine.level.sys0.mass;
    let m = fine_al.basis.len();
    let lambda0_fine = cluster_mean(&fine.c0.values).0;

    let mut estimates: Vec<KblEstimate> = Vec::new();
    for j in 0..m {
        let ladder: Vec<(f64, Vec<f64>)> = stages
            .iter()
            .zip(&aligned)
            .enumerate()
            .map(|(i, (st, al))| {
                let v = if i + 1 == stages.len() {
                    al.v1[j].clone()
                } else {
                    transfer(&st.level.mesh, &al.v1[j], &fine.level.mesh)
                };
                (st.level.eps, v)
            })
            .collect();
        estimates.push(estimate_kbl(&ladder, fmass)?);
    }
    let kbl: Vec<Vec<f64>> = estimates.iter().map(|e| e.field.clone()).collect();
    let theta = theta_from_pairing(fmass, &kbl, &fine_al.basis, lambda0_fine)?;
    let theta_error = lambda0_fine / m as f64 * estimates.iter().map(|e| e.error_bound).sum::<f64>();
    let rotation = theta_rotation_defect(fmass, &kbl, &fine_al.basis, lambda0_fine, &random_rotation(m, cfg.seed))?;

    let shared = Shared {
        cfg,
        kbl: &kbl,
    };
    let n = stages.len();
    let idx: Vec<usize> = (0..n).collect();
    let results: Vec<LevelResult> = par_map(cfg.workers, &idx, |&i| second_pass(&shared, fine, &stages[i], &aligned[i], i == 0, i + 1 == n))
        .into_iter()
        .collect::<Result<_, _>>()?;

    let kind = if gradient { "gradient" } else { "sweep-dirichlet" };
    let mut rep = ExpansionReport::new(&cfg.name, kind);
    let mut level_details = Vec::new();
    let mut psi_health: f64 = 0.0;
    let mut laws = serde_json::Value::Null;
    for mut r in results {
        let e = r.row.eps;
        let (le, l0) = (r.row.lambda_eps.unwrap_or(0.0), r.row.lambda0.unwrap_or(0.0));
        r.row.r1 = Some((le - l0 - e * theta).abs());
        psi_health = psi_health.max(r.psi_health);
        if let Some(l) = r.details.get("projection_laws") {
            laws = l.clone();
        }
        level_details.push(r.details);
        rep.fields.extend(r.fields);
        rep.rows.push(r.row);
    }
    rep.fit_slopes(&["r0", "r1", "e0", "e1", "e2", "projection", "osborn", "w0", "w1", "layer_norm"]);

    let diffs: Vec<(f64, f64)> = rep
        .rows
        .iter()
        .filter(|r| r.converged)
        .map(|r| (r.eps, r.lambda_eps.unwrap_or(0.0) - r.lambda0.unwrap_or(0.0)))
        .collect();
    let empirical = theta_fit(&diffs, cfg.remainder_exponent).ok();
    rep.theta = Some(ThetaReport {
        pairing: Some(theta),
        pairing_error: Some(theta_error),
        discrepancy: empirical.as_ref().map(|f| (f.theta - theta).abs()),
        empirical,
        empirical_truncated: None,
    });
    let layer_health = stages.iter().map(|s| s.layer_residual).fold(0.0, f64::max);

    let tol = cfg.tolerances;
    let slope = |n: &str| rep.slope(n);
    let mut checks = Vec::new();
    let kbl_slopes: Vec<Option<f64>> = estimates.iter().map(|e| e.slope).collect();
    checks.push(Check::recorded("kbl ladder slope", format!("pairwise-difference slopes {kbl_slopes:?}")));
    for name in ["r1", "e2", "projection"] {
        if let Some(f) = slope(name) {
            checks.push(Check::recorded(&format!("{name} measured slope"), format!("{:.3}", f.slope)));
        }
    }
    let health = vec![
        Check::new("psi solve residual", psi_health <= SOLVE_TOL, format!("{psi_health:.2e} <= {SOLVE_TOL:e}")),
        Check::new("layer solve residual", layer_health <= SOLVE_TOL, format!("{layer_health:.2e} <= {SOLVE_TOL:e}")),
    ];
    match (cfg.expect, gradient) {
        (Expectation::None, _) => {}
        (Expectation::Trivial, _) => {
            let worst = |f: fn(&Row) -> Option<f64>| rep.rows.iter().filter_map(f).fold(0.0, f64::max);
            let items: Vec<(&str, f64)> = vec![
                ("r0", worst(|r| r.r0)),
                ("e0", worst(|r| r.e0)),
                ("e1", worst(|r| r.e1)),
                ("e2", worst(|r| r.e2)),
                ("projection", worst(|r| r.projection)),
                ("w1", worst(|r| r.w1)),
                ("theta", theta.abs()),
            ];
            for (name, v) in items {
                checks.push(Check::new(&format!("trivial {name}"), v <= tol.trivial, format!("{v:.2e} <= {:e}", tol.trivial)));
            }
            checks.extend(health);
        }
        (Expectation::Rates, true) => {
            checks.push(Check::slope_margin("w1 improves on w0", slope("w1"), slope("w0"), 0.15, tol.fit));
            checks.extend(health);
        }
        (Expectation::Rates, false) => {
            checks.push(Check::slope_at_least("r0 rate", slope("r0"), 0.9, tol.fit));
            checks.push(Check::slope_margin("r1 improves on r0", slope("r1"), slope("r0"), 0.15, tol.fit));
            checks.push(Check::slope_at_least("e0 rate", slope("e0"), 0.9, tol.fit));
            checks.push(Check::slope_margin("e2 improves on e1", slope("e2"), slope("e1"), 0.15, tol.fit));
            checks.push(Check::slope_margin("projection improves on e0", slope("projection"), slope("e0"), 0.15, tol.fit));
            checks.push(Check::slope_at_least("osborn rate", slope("osborn"), 1.7, tol.fit));
            checks.push(match rep.theta.as_ref().and_then(|t| t.empirical.clone()) {
                Some(f) => {
                    let bar = (theta_error.powi(2) + f.error.powi(2)).sqrt();
                    let gap = (f.theta - theta).abs();
                    Check::new(
                        "theta agreement",
                        gap <= bar,
                        format!("pairing {theta:.4} +- {theta_error:.2e}, empirical {:.4} +- {:.2e}, gap {gap:.2e} <= {bar:.2e}", f.theta, f.error),
                    )
                }
                None => Check::inconclusive("theta agreement", "no empirical fit".into()),
            });
            checks.push(Check::new(
                "theta rotation invariance",
                rotation <= ALGEBRA_TOL,
                format!("{rotation:.2e} <= {ALGEBRA_TOL:e}"),
            ));
            checks.extend(health);
        }
    }
    if cfg.expect != Expectation::None && !laws.is_null() {
        let v = |a: &str, b: &str| laws[a][b].as_f64().unwrap_or(f64::INFINITY);
        let worst = [
            v("homogenized", "idempotence"),
            v("homogenized", "self_adjointness"),
            v("oscillating", "idempotence"),
            v("oscillating", "self_adjointness"),
            laws["resolvent"].as_f64().unwrap_or(f64::INFINITY),
        ]
        .into_iter()
        .fold(0.0, f64::max);
        let rank = v("homogenized", "rank_defect").max(v("oscillating", "rank_defect"));
        checks.push(Check::new(
            "projection laws",
            worst <= ALGEBRA_TOL && rank == 0.0,
            format!("max defect {worst:.2e} <= {ALGEBRA_TOL:e}, rank defect {rank}"),
        ));
    }
    rep.checks = checks;
    rep.details = json!({
        "multiplicity": m,
        "theta_rotation_defect": rotation,
        "kbl": estimates,
        "projection_laws": laws,
        "levels": level_details,
    });
    Ok(rep)
}
