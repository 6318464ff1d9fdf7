//! Acceptance run: one line per criterion.
//!
//! Honest failures are printed but do not fail `cargo test`; set
//! `TWOSCALE_ACCEPTANCE_STRICT=1` to turn any non-pass into a non-zero exit.
//! Errors while running an experiment always fail the target.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use faer::Mat;

use twoscale::cell::{chi_rhs, flux_rhs, homogenized_tensor, upsilon_rhs, CorrectorSet, SpectralGrid};
use twoscale::coeff::{make_family, Tensor};
use twoscale::fem::{assemble, mesh_domain, AssembleOptions, Bc, CoefSource, Domain};
use twoscale::harness::{
    correctors_report, h1_sweep, oracle1d_report, rate_fit, sweep_dirichlet, sweep_neumann, Check, ExpansionReport,
    ExperimentConfig, HarnessError, Status,
};
use twoscale::spectral::{eigen_cluster, ClusterOptions};

const J01_SQ: f64 = 5.783_185_962_946_784;
const DENSE_TOL: f64 = 1e-10;

struct Line {
    id: usize,
    status: Status,
    seconds: f64,
    detail: String,
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<ExperimentConfig, HarnessError> {
    let path = configs().join(name);
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn timed<T>(f: impl FnOnce() -> Result<T, HarnessError>) -> (Result<T, HarnessError>, f64) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed().as_secs_f64())
}

/// Worst status among the named checks of a report; a missing check fails.
fn pick(rep: &ExpansionReport, names: &[&str]) -> Vec<Check> {
    names
        .iter()
        .map(|n| {
            rep.checks
                .iter()
                .find(|c| c.name == *n)
                .cloned()
                .unwrap_or_else(|| Check::new(n, false, "check missing from report".into()))
        })
        .collect()
}

fn combine(checks: &[Check]) -> (Status, String) {
    let status = if checks.iter().any(|c| c.status == Status::Fail) {
        Status::Fail
    } else if checks.iter().any(|c| c.status == Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    let detail = checks
        .iter()
        .map(|c| format!("[{}] {}: {}", tag(c.status), c.name, c.detail))
        .collect::<Vec<_>>()
        .join("; ");
    (status, detail)
}

fn tag(s: Status) -> &'static str {
    match s {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::Inconclusive => "INCONCLUSIVE",
        Status::Recorded => "RECORDED",
    }
}

/// Adds the runtime budget as one more check.
fn line(id: usize, mut checks: Vec<Check>, seconds: f64, budget: Option<f64>) -> Line {
    if let Some(b) = budget {
        checks.push(Check::new("runtime", seconds < b, format!("{seconds:.1} s < {b} s")));
    }
    let (status, detail) = combine(&checks);
    Line { id, status, seconds, detail }
}

fn error_line(id: usize, e: &HarnessError, seconds: f64) -> Line {
    Line {
        id,
        status: Status::Fail,
        seconds,
        detail: format!("error: {e}"),
    }
}

/// Minimum-norm solution through the SVD of a dense matrix.
fn pinv_solve(m: &Mat<f64>, rhs: &[f64]) -> Vec<f64> {
    let svd = m.thin_svd().expect("dense svd");
    let (u, s, v) = (svd.U(), svd.S(), svd.V());
    let n = rhs.len();
    let smax = (0..n).map(|i| s[i]).fold(0.0, f64::max);
    let mut out = vec![0.0; n];
    for k in 0..n {
        if s[k] <= 1e-10 * smax {
            continue;
        }
        let c: f64 = (0..n).map(|i| u[(i, k)] * rhs[i]).sum::<f64>() / s[k];
        for (i, o) in out.iter_mut().enumerate() {
            *o += c * v[(i, k)];
        }
    }
    out
}

fn dense_of(len: usize, apply: impl Fn(&[f64]) -> Vec<f64>) -> Mat<f64> {
    let mut m = Mat::<f64>::zeros(len, len);
    for c in 0..len {
        let mut e = vec![0.0; len];
        e[c] = 1.0;
        for (r, v) in apply(&e).into_iter().enumerate() {
            m[(r, c)] = v;
        }
    }
    m
}

fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let num = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den = y.iter().map(|b| b * b).sum::<f64>().sqrt().max(1e-300);
    num / den
}

/// Largest relative gap between the iterative and dense χ, Υ and b on an 8² grid.
fn dense_gap() -> Result<f64, HarnessError> {
    let field = make_family("trig2d", &[1.0]).map_err(|e| HarnessError::Config(e.to_string()))?;
    let grid = SpectralGrid::new(2, 8);
    let a = grid.sample(&field);
    let set = CorrectorSet::compute(&field, 8, 1e-13)?;
    let op = dense_of(grid.len(), |u| grid.apply_operator(&a, u));
    let lap = dense_of(grid.len(), |u| grid.neg_laplacian(u));
    let solve = |m: &Mat<f64>, rhs: Vec<f64>| {
        let mut b = rhs;
        grid.project_range(&mut b);
        pinv_solve(m, &b)
    };
    let mut worst: f64 = 0.0;
    let chi: Vec<Vec<f64>> = (0..2).map(|j| solve(&op, chi_rhs(&grid, &a, j))).collect();
    for j in 0..2 {
        worst = worst.max(rel_err(&set.chi[j], &chi[j]));
    }
    let a_hat: Tensor = homogenized_tensor(&grid, &a, &chi)?;
    for i in 0..2 {
        for j in 0..2 {
            let r = solve(&op, upsilon_rhs(&grid, &a, &chi, &a_hat, i, j));
            worst = worst.max(rel_err(&set.upsilon[i * 2 + j], &r));
        }
    }
    // b_ijk = ∂_i f_jk − ∂_j f_ik with Δf_jk equal to the flux discrepancy.
    let mut f = vec![vec![]; 4];
    for j in 0..2 {
        for k in 0..2 {
            let g = flux_rhs(&grid, &a, &chi, &a_hat, j, k);
            f[j * 2 + k] = solve(&lap, g).into_iter().map(|v| -v).collect();
        }
    }
    for i in 0..2 {
        for j in 0..2 {
            if i == j {
                continue;
            }
            for k in 0..2 {
                let di = grid.derivative(&f[j * 2 + k], i);
                let dj = grid.derivative(&f[i * 2 + k], j);
                let b: Vec<f64> = di.iter().zip(&dj).map(|(x, y)| x - y).collect();
                worst = worst.max(rel_err(&set.b[(i * 2 + j) * 2 + k], &b));
            }
        }
    }
    Ok(worst)
}

fn criterion_1() -> Line {
    let (r, secs) = timed(|| {
        let gap = dense_gap()?;
        let field = make_family("trig1d", &[0.0]).map_err(|e| HarnessError::Config(e.to_string()))?;
        let set = CorrectorSet::compute(&field, 256, 1e-12)?;
        let g = set.grid();
        let chi_err = (0..g.len())
            .map(|p| (set.chi[0][p] - (2.0 * PI * g.point(p)[0]).sin() / (4.0 * PI)).abs())
            .fold(0.0, f64::max);
        let a_err = (set.a_hat[0][0] - 0.5).abs();
        Ok(vec![
            Check::new("dense 8x8 chi/upsilon/b", gap <= DENSE_TOL, format!("relative gap {gap:.2e} <= {DENSE_TOL:e}")),
            Check::new("trig1d chi closed form", chi_err <= 1e-8, format!("max error {chi_err:.2e} <= 1e-8")),
            Check::new("trig1d a_hat", a_err <= 1e-10, format!("|a_hat - 0.5| = {a_err:.2e} <= 1e-10")),
        ])
    });
    match r {
        Ok(c) => line(1, c, secs, Some(10.0)),
        Err(e) => error_line(1, &e, secs),
    }
}

fn criterion_2() -> Line {
    let (r, secs) = timed(|| correctors_report(&load("correctors_trig2d.toml")?));
    match r {
        Ok(rep) => line(2, pick(&rep, &["a_hat symmetry", "voigt-reuss bounds"]), secs, Some(30.0)),
        Err(e) => error_line(2, &e, secs),
    }
}

fn criterion_3() -> Line {
    let (r, secs) = timed(|| {
        let mut pts = Vec::new();
        let mut values = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let mesh = mesh_domain(&Domain::unit_disk(), h)?;
            let sys = assemble(&mesh, CoefSource::Constant([[1.0, 0.0], [0.0, 1.0]]), Bc::Dirichlet, AssembleOptions::default())?;
            let c = eigen_cluster(&sys, J01_SQ, 1, ClusterOptions::default())?;
            values.push(c.values[0]);
            pts.push((h, (c.values[0] - J01_SQ).abs()));
        }
        let fit = rate_fit(&pts)?;
        Ok((Check::slope_at_least("disk h-order", Some(&fit), 1.8, 0.5), values))
    });
    match r {
        Ok((mut c, values)) => {
            c.detail = format!("{}; lambda_h {values:.6?} vs {J01_SQ:.6}", c.detail);
            line(3, vec![c], secs, Some(120.0))
        }
        Err(e) => error_line(3, &e, secs),
    }
}

fn criterion_4() -> Line {
    let (r, secs) = timed(|| oracle1d_report(&load("oracle1d.toml")?));
    match r {
        Ok(rep) => line(4, pick(&rep, &["e1 rate", "e2 improves on e1", "r1 rate", "psi deflated solve"]), secs, Some(60.0)),
        Err(e) => error_line(4, &e, secs),
    }
}

/// Criteria 5, 6, 8 and 11 share the M = 1 sweep.
fn dirichlet_group() -> Vec<Line> {
    let (r, secs) = timed(|| {
        let m1 = sweep_dirichlet(&load("dirichlet_m1.toml")?, false)?;
        let id = sweep_dirichlet(&load("dirichlet_identity.toml")?, false)?;
        Ok((m1, id))
    });
    let (m1, id) = match r {
        Ok(x) => x,
        Err(e) => return [5, 6, 8, 11].into_iter().map(|i| error_line(i, &e, secs)).collect(),
    };
    let fit_tol = 0.5;
    let mut w = vec![Check::slope_margin("w1 improves on w0", m1.slope("w1"), m1.slope("w0"), 0.15, fit_tol)];
    w.extend(pick(&id, &["trivial w1"]));
    vec![
        line(5, pick(&m1, &["osborn rate"]), secs, Some(1800.0)),
        line(
            6,
            pick(
                &m1,
                &["r0 rate", "r1 improves on r0", "e0 rate", "e2 improves on e1", "projection improves on e0", "theta agreement"],
            ),
            secs,
            Some(1800.0),
        ),
        line(8, w, secs, Some(1800.0)),
        line(11, pick(&m1, &["projection laws"]), secs, None),
    ]
}

fn criterion_7() -> Line {
    let (r, secs) = timed(|| sweep_dirichlet(&load("dirichlet_m2.toml")?, false));
    match r {
        Ok(rep) => line(7, pick(&rep, &["r1 improves on r0", "theta rotation invariance", "projection laws"]), secs, Some(1800.0)),
        Err(e) => error_line(7, &e, secs),
    }
}

fn criterion_9() -> Line {
    let (r, secs) = timed(|| Ok((h1_sweep(&load("h1.toml")?)?, h1_sweep(&load("h1_identity.toml")?)?)));
    match r {
        Ok((rep, id)) => {
            let mut c = pick(&rep, &["h1 halving ratio"]);
            c.extend(pick(&id, &["trivial h1"]));
            line(9, c, secs, Some(600.0))
        }
        Err(e) => error_line(9, &e, secs),
    }
}

fn criterion_10() -> Line {
    let (r, secs) = timed(|| sweep_neumann(&load("neumann.toml")?));
    match r {
        Ok(rep) => line(
            10,
            pick(&rep, &["theta truncation stability", "r1 improves on r0", "neumann compatibility"]),
            secs,
            Some(1800.0),
        ),
        Err(e) => error_line(10, &e, secs),
    }
}

fn main() -> ExitCode {
    // Libtest flags such as --list or a name filter are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let mut lines = vec![criterion_1(), criterion_2(), criterion_3(), criterion_4()];
    lines.extend(dirichlet_group());
    lines.push(criterion_7());
    lines.push(criterion_9());
    lines.push(criterion_10());
    lines.sort_by_key(|l| l.id);
    for l in &lines {
        println!("criterion {:>2} {:<12} ({:.1} s) {}", l.id, tag(l.status), l.seconds, l.detail);
    }
    let errored = lines.iter().any(|l| l.detail.starts_with("error:"));
    let strict = std::env::var("TWOSCALE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let passed = lines.iter().filter(|l| l.status == Status::Pass).count();
    println!("acceptance: {passed}/{} criteria pass", lines.len());
    if errored || (strict && passed != lines.len()) {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
