//! Periodic cell problems: first- and second-order correctors, flux potentials,
//! auxiliary potentials and the homogenized tensor, by Fourier collocation.

mod dump;
mod grid;

pub use dump::{decode_correctors, encode_correctors, DumpError};
pub use grid::{SpectralGrid, TrigInterpolant};

use serde::Serialize;
use thiserror::Error;

use crate::coeff::{check_assumptions, Coefficient, Tensor};

#[derive(Debug, Error)]
pub enum CellError {
    #[error("grid size {0} must be a power of two >= 8")]
    BadGrid(usize),
    #[error("coefficient fails the standard assumptions (min eig {lambda_min:.3e}, symmetry defect {symmetry:.3e})")]
    Assumptions { lambda_min: f64, symmetry: f64 },
    #[error("CG did not converge in {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("right-hand side has mean {mean:.3e}, above tolerance {tol:.1e}")]
    NonZeroMean { mean: f64, tol: f64 },
    #[error("field has {got} samples, grid expects {expected}")]
    GridMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Dump(#[from] DumpError),
}

/// Outcome of one iterative cell solve.
#[derive(Debug, Clone, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn check_grid(n: usize) -> Result<(), CellError> {
    if n >= 8 && n.is_power_of_two() {
        Ok(())
    } else {
        Err(CellError::BadGrid(n))
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned CG for the collocation operator on the range of the
/// derivative operators. The preconditioner is the inverse Laplacian scaled
/// by the mean trace of the coefficient.
fn pcg(
    grid: &SpectralGrid,
    a: &[Tensor],
    rhs: &[f64],
    tol: f64,
) -> Result<(Vec<f64>, SolveStats), CellError> {
    let d = grid.dim();
    let mean_trace =
        a.iter().map(|t| (0..d).map(|k| t[k][k]).sum::<f64>()).sum::<f64>() / (a.len() * d) as f64;
    let pre = 1.0 / mean_trace;
    let mut b = rhs.to_vec();
    grid.project_range(&mut b);
    let bnorm = norm(&b);
    let mut x = vec![0.0; b.len()];
    if bnorm == 0.0 {
        return Ok((
            x,
            SolveStats {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let cap = 10 * grid.n() * d;
    let mut r = b.clone();
    let mut z = grid.inverse_neg_laplacian(&r, pre);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut it = 0;
    let mut rel = 1.0;
    while it < cap {
        it += 1;
        let ap = grid.apply_operator(a, &p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        grid.project_range(&mut x);
        grid.project_range(&mut r);
        rel = norm(&r) / bnorm;
        if rel <= tol {
            break;
        }
        z = grid.inverse_neg_laplacian(&r, pre);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..p.len() {
            p[i] = z[i] + beta * p[i];
        }
    }
    let ax = grid.apply_operator(a, &x);
    let true_res = norm(&b.iter().zip(&ax).map(|(u, v)| u - v).collect::<Vec<_>>()) / bnorm;
    if rel > tol && true_res > tol {
        return Err(CellError::NotConverged {
            iterations: it,
            residual: true_res,
        });
    }
    Ok((
        x,
        SolveStats {
            iterations: it,
            residual: true_res,
        },
    ))
}

/// Right-hand side of the first-order cell problem for direction `j`:
/// `Σ_k D_k a_kj`, so that `L χ_j = rhs` means `div(A(∇χ_j + e_j)) = 0`.
pub fn chi_rhs(grid: &SpectralGrid, a: &[Tensor], j: usize) -> Vec<f64> {
    let mut out = vec![0.0; a.len()];
    for k in 0..grid.dim() {
        let col: Vec<f64> = a.iter().map(|t| t[k][j]).collect();
        for (o, v) in out.iter_mut().zip(grid.derivative(&col, k)) {
            *o += v;
        }
    }
    out
}

/// First-order correctors `χ_j`, one per direction.
pub fn solve_chi(
    field: &dyn Coefficient,
    n: usize,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, Vec<SolveStats>), CellError> {
    check_grid(n)?;
    let report = check_assumptions(field, n.max(8), 1e-10);
    if !report.passed {
        return Err(CellError::Assumptions {
            lambda_min: report.lambda_min,
            symmetry: report.symmetry_defect,
        });
    }
    let grid = SpectralGrid::new(field.dim(), n);
    let a = grid.sample(field);
    let mut chis = Vec::new();
    let mut stats = Vec::new();
    for j in 0..grid.dim() {
        let (x, s) = pcg(&grid, &a, &chi_rhs(&grid, &a, j), tol)?;
        chis.push(x);
        stats.push(s);
    }
    Ok((chis, stats))
}

fn check_len(grid: &SpectralGrid, f: &[f64]) -> Result<(), CellError> {
    if f.len() != grid.len() {
        return Err(CellError::GridMismatch {
            expected: grid.len(),
            got: f.len(),
        });
    }
    Ok(())
}

/// `Â_ij = ⟨a_ij + a_ik ∂_k χ_j⟩` by the grid average.
pub fn homogenized_tensor(
    grid: &SpectralGrid,
    a: &[Tensor],
    chi: &[Vec<f64>],
) -> Result<Tensor, CellError> {
    let d = grid.dim();
    if a.len() != grid.len() {
        return Err(CellError::GridMismatch {
            expected: grid.len(),
            got: a.len(),
        });
    }
    for c in chi {
        check_len(grid, c)?;
    }
    let mut out = [[0.0; 2]; 2];
    for j in 0..d {
        let grads: Vec<Vec<f64>> = (0..d).map(|k| grid.derivative(&chi[j], k)).collect();
        for i in 0..d {
            let s: f64 = (0..a.len())
                .map(|p| a[p][i][j] + (0..d).map(|k| a[p][i][k] * grads[k][p]).sum::<f64>())
                .sum();
            out[i][j] = s / a.len() as f64;
        }
    }
    Ok(out)
}

/// Right-hand side of the second-order cell problem for `(i, j)`:
/// `a_ij + a_ik ∂_k χ_j − â_ij + ∂_k(a_ki χ_j)`.
pub fn upsilon_rhs(
    grid: &SpectralGrid,
    a: &[Tensor],
    chi: &[Vec<f64>],
    a_hat: &Tensor,
    i: usize,
    j: usize,
) -> Vec<f64> {
    let d = grid.dim();
    let len = a.len();
    let grads: Vec<Vec<f64>> = (0..d).map(|k| grid.derivative(&chi[j], k)).collect();
    let mut out: Vec<f64> = (0..len)
        .map(|p| {
            a[p][i][j] + (0..d).map(|k| a[p][i][k] * grads[k][p]).sum::<f64>() - a_hat[i][j]
        })
        .collect();
    for k in 0..d {
        let prod: Vec<f64> = (0..len).map(|p| a[p][k][i] * chi[j][p]).collect();
        for (o, v) in out.iter_mut().zip(grid.derivative(&prod, k)) {
            *o += v;
        }
    }
    out
}

/// Second-order correctors `Υ_ij`, stored at index `i·d + j`.
pub fn solve_upsilon(
    field: &dyn Coefficient,
    chi: &[Vec<f64>],
    a_hat: &Tensor,
    n: usize,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, Vec<SolveStats>), CellError> {
    check_grid(n)?;
    let grid = SpectralGrid::new(field.dim(), n);
    let a = grid.sample(field);
    for c in chi {
        check_len(&grid, c)?;
    }
    let d = grid.dim();
    let scale = a
        .iter()
        .flat_map(|t| t.iter().flatten())
        .fold(1.0, |m: f64, v| m.max(v.abs()));
    let mut out = Vec::new();
    let mut stats = Vec::new();
    for i in 0..d {
        for j in 0..d {
            let rhs = upsilon_rhs(&grid, &a, chi, a_hat, i, j);
            let mean = grid.mean(&rhs);
            if mean.abs() > tol * scale {
                return Err(CellError::NonZeroMean { mean, tol });
            }
            let (x, s) = pcg(&grid, &a, &rhs, tol)?;
            out.push(x);
            stats.push(s);
        }
    }
    Ok((out, stats))
}

/// Periodic potential with `−Δu = rhs`, mean zero.
pub fn solve_poisson_periodic(
    grid: &SpectralGrid,
    rhs: &[f64],
    tol: f64,
) -> Result<Vec<f64>, CellError> {
    check_len(grid, rhs)?;
    let mean = grid.mean(rhs);
    if mean.abs() > tol {
        return Err(CellError::NonZeroMean { mean, tol });
    }
    Ok(grid.inverse_neg_laplacian(rhs, 1.0))
}

/// Flux right-hand side `a_jk + a_jl ∂_l χ_k − â_jk`.
pub fn flux_rhs(
    grid: &SpectralGrid,
    a: &[Tensor],
    chi: &[Vec<f64>],
    a_hat: &Tensor,
    j: usize,
    k: usize,
) -> Vec<f64> {
    let d = grid.dim();
    let grads: Vec<Vec<f64>> = (0..d).map(|l| grid.derivative(&chi[k], l)).collect();
    (0..a.len())
        .map(|p| a[p][j][k] + (0..d).map(|l| a[p][j][l] * grads[l][p]).sum::<f64>() - a_hat[j][k])
        .collect()
}

/// Flux potentials `b_ijk = ∂_i f_jk − ∂_j f_ik` with `Δf_jk = a_jk + a_jl ∂_l χ_k − â_jk`,
/// stored at index `(i·d + j)·d + k`. Returns the fields and the maximum
/// divergence-identity residual.
pub fn solve_flux_potentials(
    field: &dyn Coefficient,
    chi: &[Vec<f64>],
    a_hat: &Tensor,
    n: usize,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, f64), CellError> {
    check_grid(n)?;
    let grid = SpectralGrid::new(field.dim(), n);
    let a = grid.sample(field);
    let d = grid.dim();
    let mut rhs = vec![vec![]; d * d];
    let mut f = vec![vec![]; d * d];
    for j in 0..d {
        for k in 0..d {
            let r = flux_rhs(&grid, &a, chi, a_hat, j, k);
            let mean = grid.mean(&r);
            if mean.abs() > tol {
                return Err(CellError::NonZeroMean { mean, tol });
            }
            // Δf = r  ⇔  −Δ(−f) = r
            let neg = solve_poisson_periodic(&grid, &r, tol)?;
            f[j * d + k] = neg.iter().map(|v| -v).collect();
            rhs[j * d + k] = r;
        }
    }
    let mut b = vec![vec![0.0; grid.len()]; d * d * d];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                if i == j {
                    continue;
                }
                let di = grid.derivative(&f[j * d + k], i);
                let dj = grid.derivative(&f[i * d + k], j);
                b[(i * d + j) * d + k] = di.iter().zip(&dj).map(|(x, y)| x - y).collect();
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            for k in 0..d {
                let upper = b[(j * d + i) * d + k].clone();
                b[(i * d + j) * d + k] = upper.iter().map(|v| -v).collect();
            }
        }
    }
    let mut residual: f64 = 0.0;
    for j in 0..d {
        for k in 0..d {
            let mut div = vec![0.0; grid.len()];
            for i in 0..d {
                for (o, v) in div.iter_mut().zip(grid.derivative(&b[(i * d + j) * d + k], i)) {
                    *o += v;
                }
            }
            let mut target = rhs[j * d + k].clone();
            grid.project_range(&mut target);
            for (x, y) in div.iter().zip(&target) {
                residual = residual.max((x - y).abs());
            }
        }
    }
    Ok((b, residual))
}

/// Residual summary for a full corrector set.
#[derive(Debug, Clone, Serialize, Default)]
pub struct CellResiduals {
    pub chi: Vec<SolveStats>,
    pub upsilon: Vec<SolveStats>,
    pub flux_divergence: f64,
    pub poisson: f64,
}

/// All periodic correctors for one coefficient field on an `n^d` grid.
#[derive(Debug, Clone)]
pub struct CorrectorSet {
    pub dim: usize,
    pub n: usize,
    pub tol: f64,
    pub chi: Vec<Vec<f64>>,
    /// `grad_chi[j][k] = ∂_k χ_j`
    pub grad_chi: Vec<Vec<Vec<f64>>>,
    /// `upsilon[i·d + j] = Υ_ij`
    pub upsilon: Vec<Vec<f64>>,
    /// `grad_upsilon[i·d + j][k] = ∂_k Υ_ij`
    pub grad_upsilon: Vec<Vec<Vec<f64>>>,
    /// `b[(i·d + j)·d + k] = b_ijk`
    pub b: Vec<Vec<f64>>,
    /// `big_b[l]` with `−ΔB_l = χ_l`
    pub big_b: Vec<Vec<f64>>,
    pub a_hat: Tensor,
    pub residuals: CellResiduals,
}

impl CorrectorSet {
    pub fn compute(field: &dyn Coefficient, n: usize, tol: f64) -> Result<Self, CellError> {
        let (chi, chi_stats) = solve_chi(field, n, tol)?;
        let grid = SpectralGrid::new(field.dim(), n);
        let a = grid.sample(field);
        let a_hat = homogenized_tensor(&grid, &a, &chi)?;
        let (upsilon, ups_stats) = solve_upsilon(field, &chi, &a_hat, n, tol)?;
        let (b, flux_divergence) = solve_flux_potentials(field, &chi, &a_hat, n, tol)?;
        let mut big_b = Vec::new();
        let mut poisson: f64 = 0.0;
        for c in &chi {
            let u = solve_poisson_periodic(&grid, c, tol.max(1e-12))?;
            let back = grid.neg_laplacian(&u);
            for (x, y) in back.iter().zip(c) {
                poisson = poisson.max((x - y).abs());
            }
            big_b.push(u);
        }
        let residuals = CellResiduals {
            chi: chi_stats,
            upsilon: ups_stats,
            flux_divergence,
            poisson,
        };
        Ok(Self::assemble(grid, tol, chi, upsilon, b, big_b, a_hat, residuals))
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        grid: SpectralGrid,
        tol: f64,
        chi: Vec<Vec<f64>>,
        upsilon: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        big_b: Vec<Vec<f64>>,
        a_hat: Tensor,
        residuals: CellResiduals,
    ) -> Self {
        let d = grid.dim();
        let grads = |f: &Vec<f64>| (0..d).map(|k| grid.derivative(f, k)).collect::<Vec<_>>();
        CorrectorSet {
            dim: d,
            n: grid.n(),
            tol,
            grad_chi: chi.iter().map(grads).collect(),
            grad_upsilon: upsilon.iter().map(grads).collect(),
            chi,
            upsilon,
            b,
            big_b,
            a_hat,
            residuals,
        }
    }

    pub fn grid(&self) -> SpectralGrid {
        SpectralGrid::new(self.dim, self.n)
    }

    /// Largest |mean| over all gauge-fixed fields.
    pub fn max_gauge_defect(&self) -> f64 {
        let g = self.grid();
        self.chi
            .iter()
            .chain(&self.upsilon)
            .chain(&self.big_b)
            .map(|f| g.mean(f).abs())
            .fold(0.0, f64::max)
    }
}
