//! Dirichlet boundary layers at scale ε, their small-ε limit, and Neumann
//! oscillating boundary data.
//!
//! A layer solve finds `v` with `−div(A(x/ε)∇v) = 0` in the domain and
//! oscillating Dirichlet data on the boundary. The first-order layer uses
//! `−χ_j(x/ε) ∂_j u₀`, the second-order layer `−Υ_ij(x/ε) ∂_ij u₀`.

use serde::Serialize;
use thiserror::Error;

use crate::cell::TrigInterpolant;
use crate::coeff::Tensor;
use crate::fem::{Bc, Csr, DiscreteSystem, FemError, Locator, Mesh, NodalCorrectors};

/// Smallest number of mesh edges per period accepted for a layer solve.
pub const MIN_RESOLUTION: f64 = 8.0;
/// Tolerance on the boundary integral of Neumann data, relative to its size.
pub const COMPATIBILITY_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum LayerError {
    #[error("mesh size {h} does not resolve eps = {eps} (need h <= eps/{})", MIN_RESOLUTION)]
    Resolution { h: f64, eps: f64 },
    #[error("layer system must carry Dirichlet conditions")]
    NotDirichlet,
    #[error("field length {got} does not match {expected} nodes")]
    Length { expected: usize, got: usize },
    #[error("ladder needs at least 3 levels with strictly decreasing eps, got {0}")]
    Ladder(usize),
    #[error("Neumann data not compatible: boundary integral {integral:e}")]
    Compatibility { integral: f64 },
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// One boundary-layer solve.
#[derive(Debug, Clone, Serialize)]
pub struct LayerSolve {
    pub eps: f64,
    #[serde(skip)]
    pub field: Vec<f64>,
    /// Nodal Dirichlet data (zero at interior nodes).
    #[serde(skip)]
    pub boundary_data: Vec<f64>,
    /// `‖(K v)_I‖ / ‖(K g)_I‖` over interior rows.
    pub residual: f64,
    /// Largest mismatch between the solution and the data on the boundary.
    pub trace_defect: f64,
    pub norm_l2: f64,
    pub boundary_max: f64,
    pub interior_max: f64,
}

fn check_resolution(mesh: &Mesh, eps: f64) -> Result<(), LayerError> {
    if mesh.h > eps / MIN_RESOLUTION * (1.0 + 1e-9) {
        return Err(LayerError::Resolution { h: mesh.h, eps });
    }
    Ok(())
}

/// Solves the homogeneous equation with boundary values taken from `data`.
pub fn solve_layer(system: &DiscreteSystem, data: &[f64], eps: f64) -> Result<LayerSolve, LayerError> {
    if system.bc != Bc::Dirichlet {
        return Err(LayerError::NotDirichlet);
    }
    let n = system.n_nodes();
    if data.len() != n {
        return Err(LayerError::Length { expected: n, got: data.len() });
    }
    let mut g = vec![0.0; n];
    for &i in system.fixed() {
        g[i] = data[i];
    }
    let v = system.solve_load(&vec![0.0; n], Some(&g))?;
    let kg = system.stiffness.matvec(&g);
    let kv = system.stiffness.matvec(&v);
    let norm = |x: &[f64]| system.free().iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt();
    let (rv, rg) = (norm(&kv), norm(&kg));
    let trace_defect = system.fixed().iter().map(|&i| (v[i] - g[i]).abs()).fold(0.0, f64::max);
    let boundary_max = g.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let interior_max = system.free().iter().map(|&i| v[i].abs()).fold(0.0, f64::max);
    Ok(LayerSolve {
        eps,
        norm_l2: system.mass_norm(&v),
        residual: if rg > 0.0 { rv / rg } else { rv },
        trace_defect,
        boundary_max,
        interior_max,
        field: v,
        boundary_data: g,
    })
}

/// First-order layer with data `−χ_j(x/ε) ∂_j u₀`; `u0_grad` is nodal.
pub fn v1_eps(mesh: &Mesh, system: &DiscreteSystem, correctors: &NodalCorrectors, u0_grad: &[[f64; 2]]) -> Result<LayerSolve, LayerError> {
    check_resolution(mesh, correctors.eps)?;
    let data: Vec<f64> = correctors.chi_dot(u0_grad).iter().map(|v| -v).collect();
    solve_layer(system, &data, correctors.eps)
}

/// Second-order layer with data `−Υ_ij(x/ε) ∂_ij u₀`; `u0_hessian` is nodal.
pub fn v2_eps(mesh: &Mesh, system: &DiscreteSystem, correctors: &NodalCorrectors, u0_hessian: &[Tensor]) -> Result<LayerSolve, LayerError> {
    check_resolution(mesh, correctors.eps)?;
    let data: Vec<f64> = correctors.upsilon_dot(u0_hessian).iter().map(|v| -v).collect();
    solve_layer(system, &data, correctors.eps)
}

/// Values of a nodal field on `from` at the nodes of `to`. Nodes of `to` lying
/// just outside the polygon of `from` are extrapolated from the nearest element.
pub fn transfer(from: &Mesh, values: &[f64], to: &Mesh) -> Vec<f64> {
    Locator::new(from).interpolate(values, &to.points)
}

/// Small-ε limit of a layer ladder, compared on a common mesh.
#[derive(Debug, Clone, Serialize)]
pub struct KblEstimate {
    pub eps_min: f64,
    /// The smallest-ε solve on the comparison mesh.
    #[serde(skip)]
    pub field: Vec<f64>,
    /// `‖v(ε_min) − v(2ε_min)‖`, or the last pairwise difference.
    pub error_bound: f64,
    /// `(larger ε of the pair, L² difference)` in ladder order.
    pub pairwise: Vec<(f64, f64)>,
    /// Log-log slope of the pairwise differences against ε.
    pub slope: Option<f64>,
    /// False when pairwise differences fail to decrease.
    pub homogenization_observed: bool,
}

/// `levels` holds `(ε, field)` in strictly decreasing ε, every field already
/// on the comparison mesh whose mass matrix is `mass`.
pub fn estimate_kbl(levels: &[(f64, Vec<f64>)], mass: &Csr) -> Result<KblEstimate, LayerError> {
    if levels.len() < 3 || levels.windows(2).any(|w| !(w[1].0 < w[0].0)) {
        return Err(LayerError::Ladder(levels.len()));
    }
    let n = mass.nrows;
    if let Some((_, f)) = levels.iter().find(|(_, f)| f.len() != n) {
        return Err(LayerError::Length { expected: n, got: f.len() });
    }
    let pairwise: Vec<(f64, f64)> = levels
        .windows(2)
        .map(|w| {
            let d: Vec<f64> = w[0].1.iter().zip(&w[1].1).map(|(a, b)| a - b).collect();
            (w[0].0, mass.inner(&d, &d).max(0.0).sqrt())
        })
        .collect();
    let (eps_min, field) = levels.last().map(|(e, f)| (*e, f.clone())).unwrap_or_default();
    let error_bound = levels
        .iter()
        .rev()
        .skip(1)
        .find(|(e, _)| (e / eps_min - 2.0).abs() < 1e-9)
        .map(|(_, f)| {
            let d: Vec<f64> = field.iter().zip(f).map(|(a, b)| a - b).collect();
            mass.inner(&d, &d).max(0.0).sqrt()
        })
        .unwrap_or(pairwise[pairwise.len() - 1].1);
    let homogenization_observed = pairwise.windows(2).all(|w| w[1].1 < w[0].1);
    let usable: Vec<(f64, f64)> = pairwise.iter().copied().filter(|p| p.1 > 0.0).collect();
    let slope = (usable.len() >= 2).then(|| {
        let k = usable.len() as f64;
        let (sx, sy) = usable.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0.ln(), b + p.1.ln()));
        let (mx, my) = (sx / k, sy / k);
        let sxy: f64 = usable.iter().map(|p| (p.0.ln() - mx) * (p.1.ln() - my)).sum();
        let sxx: f64 = usable.iter().map(|p| (p.0.ln() - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(KblEstimate {
        eps_min,
        field,
        error_bound,
        pairwise,
        slope,
        homogenization_observed,
    })
}

/// Neumann layer data `∂_t[b_12k(x/ε) ∂_k u₀]` on each boundary edge.
#[derive(Debug, Clone, Serialize)]
pub struct NeumannData {
    pub eps: f64,
    /// Boundary edges as node pairs, oriented counter-clockwise.
    #[serde(skip)]
    pub edges: Vec<[usize; 2]>,
    /// Edge-constant tangential derivative.
    #[serde(skip)]
    pub values: Vec<f64>,
    /// `∮ data ds`.
    pub integral: f64,
    pub norm_l2: f64,
}

/// `flux12` are the trigonometric interpolants of `b_121` and `b_122`. The
/// boundary integral telescopes to zero; a defect above tolerance is an error.
pub fn neumann_data(mesh: &Mesh, flux12: [&TrigInterpolant; 2], eps: f64, u0_grad: &[[f64; 2]]) -> Result<NeumannData, LayerError> {
    if u0_grad.len() != mesh.n_nodes() {
        return Err(LayerError::Length { expected: mesh.n_nodes(), got: u0_grad.len() });
    }
    let w = |i: usize| {
        let p = mesh.points[i];
        let y = [p[0] / eps, p[1] / eps];
        flux12[0].eval(&y) * u0_grad[i][0] + flux12[1].eval(&y) * u0_grad[i][1]
    };
    let c = mesh.domain.center();
    let edges: Vec<[usize; 2]> = mesh
        .boundary_edges()
        .into_iter()
        .map(|[a, b]| {
            let (pa, pb) = (mesh.points[a], mesh.points[b]);
            let cross = (pa[0] - c[0]) * (pb[1] - c[1]) - (pa[1] - c[1]) * (pb[0] - c[0]);
            if cross >= 0.0 {
                [a, b]
            } else {
                [b, a]
            }
        })
        .collect();
    let mut integral = 0.0;
    let mut sq = 0.0;
    let mut scale: f64 = 0.0;
    let values: Vec<f64> = edges
        .iter()
        .map(|&[a, b]| {
            let (pa, pb) = (mesh.points[a], mesh.points[b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            let (wa, wb) = (w(a), w(b));
            let d = (wb - wa) / len;
            integral += wb - wa;
            sq += d * d * len;
            scale = scale.max(wa.abs()).max(wb.abs());
            d
        })
        .collect();
    if integral.abs() > COMPATIBILITY_TOL * scale.max(1e-300) * edges.len() as f64 {
        return Err(LayerError::Compatibility { integral });
    }
    Ok(NeumannData {
        eps,
        edges,
        values,
        integral,
        norm_l2: sq.sqrt(),
    })
}
