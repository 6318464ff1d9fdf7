//! P1 assembly of stiffness and mass operators.

use std::sync::OnceLock;

use crate::coeff::{Coefficient, Tensor};

use super::mesh::{triangle_geometry, Mesh};
use super::sparse::{Csr, Factor};
use super::FemError;

/// Symmetric triangle quadrature: barycentric points and weights summing to 1.
pub fn triangle_rule(order: usize) -> Option<Vec<([f64; 3], f64)>> {
    let perms = |a: f64, b: f64, w: f64| {
        let c = 1.0 - a - b;
        vec![([a, b, c], w), ([b, c, a], w), ([c, a, b], w)]
    };
    match order {
        1 => Some(vec![([1.0 / 3.0; 3], 1.0)]),
        2 => Some(perms(2.0 / 3.0, 1.0 / 6.0, 1.0 / 3.0)),
        3 | 4 => {
            let mut r = perms(0.445_948_490_915_965, 0.445_948_490_915_965, 0.223_381_589_678_011);
            r.extend(perms(0.091_576_213_509_771, 0.091_576_213_509_771, 0.109_951_743_655_322));
            Some(r)
        }
        5 => {
            let mut r = vec![([1.0 / 3.0; 3], 0.225)];
            r.extend(perms(0.470_142_064_105_115, 0.470_142_064_105_115, 0.132_394_152_788_506));
            r.extend(perms(0.101_286_507_323_456, 0.101_286_507_323_456, 0.125_939_180_544_827));
            Some(r)
        }
        _ => None,
    }
}

/// Element average of `A(x/ε)` over a triangle by the given rule.
pub fn element_mean(field: &dyn Coefficient, corners: [[f64; 2]; 3], eps: f64, rule: &[([f64; 3], f64)]) -> Tensor {
    let mut out = [[0.0; 2]; 2];
    for (l, w) in rule {
        let x = [
            l[0] * corners[0][0] + l[1] * corners[1][0] + l[2] * corners[2][0],
            l[0] * corners[0][1] + l[1] * corners[1][1] + l[2] * corners[2][1],
        ];
        let a = field.sample(&[x[0] / eps, x[1] / eps]);
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] += w * a[r][c];
            }
        }
    }
    out
}

/// Boundary treatment of a discrete system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Bc {
    /// Boundary values eliminated; unknowns are interior nodes.
    Dirichlet,
    /// Natural condition; all nodes are unknowns.
    Neumann,
}

/// Coefficient used for assembly.
#[derive(Clone, Copy)]
pub enum CoefSource<'a> {
    /// `A(x/ε)` sampled by quadrature.
    Oscillating { field: &'a dyn Coefficient, eps: f64 },
    /// A constant tensor, e.g. the homogenized one.
    Constant(Tensor),
}

#[derive(Debug, Clone, Copy)]
pub struct AssembleOptions {
    pub quad_order: usize,
    /// Required ratio `ε/h` for oscillating coefficients.
    pub resolution: f64,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            quad_order: 4,
            resolution: 8.0,
        }
    }
}

/// Assembled P1 stiffness and mass with boundary information.
#[derive(Debug)]
pub struct DiscreteSystem {
    pub stiffness: Csr,
    pub mass: Csr,
    pub boundary: Vec<bool>,
    pub bc: Bc,
    pub quad_order: usize,
    free: Vec<usize>,
    fixed: Vec<usize>,
    k_ff: OnceLock<Csr>,
    m_ff: OnceLock<Csr>,
    k_factor: OnceLock<Result<Factor, String>>,
}

fn tensor_stiffness(grad: &[[f64; 2]; 3], a: &Tensor, area: f64) -> [[f64; 3]; 3] {
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        let ag = [
            a[0][0] * grad[i][0] + a[0][1] * grad[i][1],
            a[1][0] * grad[i][0] + a[1][1] * grad[i][1],
        ];
        for j in 0..3 {
            k[j][i] = area * (ag[0] * grad[j][0] + ag[1] * grad[j][1]);
        }
    }
    k
}

/// Per-element coefficient tensors for a mesh.
pub fn element_coefficients(mesh: &Mesh, coef: CoefSource<'_>, opts: AssembleOptions) -> Result<Vec<Tensor>, FemError> {
    match coef {
        CoefSource::Constant(a) => Ok(vec![a; mesh.triangles.len()]),
        CoefSource::Oscillating { field, eps } => {
            if opts.quad_order < 4 {
                return Err(FemError::Quadrature(opts.quad_order));
            }
            let required = eps / opts.resolution;
            if mesh.h > required * (1.0 + 1e-9) {
                return Err(FemError::Resolution { h: mesh.h, required });
            }
            let rule = triangle_rule(opts.quad_order).ok_or(FemError::Quadrature(opts.quad_order))?;
            Ok((0..mesh.triangles.len())
                .map(|t| element_mean(field, mesh.corners(t), eps, &rule))
                .collect())
        }
    }
}

/// Assembles stiffness for `−div(A∇·)` and the consistent mass matrix.
pub fn assemble(mesh: &Mesh, coef: CoefSource<'_>, bc: Bc, opts: AssembleOptions) -> Result<DiscreteSystem, FemError> {
    let coeffs = element_coefficients(mesh, coef, opts)?;
    Ok(assemble_with(mesh, &coeffs, bc, opts.quad_order))
}

/// Assembly from precomputed element tensors.
pub fn assemble_with(mesh: &Mesh, coeffs: &[Tensor], bc: Bc, quad_order: usize) -> DiscreteSystem {
    let n = mesh.n_nodes();
    let mut kt = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (area, grad) = triangle_geometry(mesh.corners(t));
        let ke = tensor_stiffness(&grad, &coeffs[t], area);
        for i in 0..3 {
            for j in 0..3 {
                kt.push((tri[i], tri[j], ke[i][j]));
                let m = if i == j { area / 6.0 } else { area / 12.0 };
                mt.push((tri[i], tri[j], m));
            }
        }
    }
    DiscreteSystem::new(
        Csr::from_triplets(n, n, kt),
        Csr::from_triplets(n, n, mt),
        mesh.boundary.clone(),
        bc,
        quad_order,
    )
}

impl DiscreteSystem {
    pub fn new(stiffness: Csr, mass: Csr, boundary: Vec<bool>, bc: Bc, quad_order: usize) -> Self {
        let (free, fixed): (Vec<usize>, Vec<usize>) = match bc {
            Bc::Dirichlet => (0..boundary.len()).partition(|&i| !boundary[i]),
            Bc::Neumann => ((0..boundary.len()).collect(), vec![]),
        };
        DiscreteSystem {
            stiffness,
            mass,
            boundary,
            bc,
            quad_order,
            free,
            fixed,
            k_ff: OnceLock::new(),
            m_ff: OnceLock::new(),
            k_factor: OnceLock::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.boundary.len()
    }

    /// Unknown node indices (interior nodes for Dirichlet, all nodes for Neumann).
    pub fn free(&self) -> &[usize] {
        &self.free
    }

    /// Eliminated node indices (boundary nodes for Dirichlet, none for Neumann).
    pub fn fixed(&self) -> &[usize] {
        &self.fixed
    }

    pub fn k_ff(&self) -> &Csr {
        self.k_ff.get_or_init(|| self.stiffness.select(&self.free, &self.free))
    }

    pub fn m_ff(&self) -> &Csr {
        self.m_ff.get_or_init(|| self.mass.select(&self.free, &self.free))
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Full nodal vector from free values, zero on eliminated nodes.
    pub fn extend(&self, free: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for (k, &i) in self.free.iter().enumerate() {
            out[i] = free[k];
        }
        out
    }

    /// `(u, v)` in the mass inner product.
    pub fn mass_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.inner(u, v)
    }

    pub fn mass_norm(&self, u: &[f64]) -> f64 {
        self.mass_inner(u, u).max(0.0).sqrt()
    }

    /// Factorization used by source solves: Cholesky of the interior stiffness
    /// (Dirichlet) or of the stiffness with node 0 pinned (Neumann).
    pub fn stiffness_factor(&self) -> Result<&Factor, FemError> {
        let res = self.k_factor.get_or_init(|| {
            let k = match self.bc {
                Bc::Dirichlet => self.k_ff().clone(),
                Bc::Neumann => {
                    let rest: Vec<usize> = (1..self.n_nodes()).collect();
                    self.stiffness.select(&rest, &rest)
                }
            };
            Factor::cholesky(&k).map_err(|e| e.to_string())
        });
        res.as_ref().map_err(|e| FemError::Factorization(e.clone()))
    }

    /// Solves `K u = load` on the free nodes with the given values on the
    /// eliminated nodes. For Neumann systems the load must integrate to zero;
    /// the result is returned with zero mass-weighted mean.
    pub fn solve_load(&self, load: &[f64], dirichlet: Option<&[f64]>) -> Result<Vec<f64>, FemError> {
        let f = self.stiffness_factor()?;
        match self.bc {
            Bc::Dirichlet => {
                let mut u = vec![0.0; self.n_nodes()];
                if let Some(g) = dirichlet {
                    for &i in &self.fixed {
                        u[i] = g[i];
                    }
                }
                let ku = self.stiffness.matvec(&u);
                let rhs: Vec<f64> = self.free.iter().map(|&i| load[i] - ku[i]).collect();
                let x = f.solve(&rhs);
                for (k, &i) in self.free.iter().enumerate() {
                    u[i] = x[k];
                }
                Ok(u)
            }
            Bc::Neumann => {
                let total: f64 = load.iter().sum();
                let scale = load.iter().map(|v| v.abs()).sum::<f64>().max(1e-300);
                if total.abs() > 1e-8 * scale {
                    return Err(FemError::NeumannIncompatible { mean: total });
                }
                let x = f.solve(&load[1..]);
                let mut u = vec![0.0; self.n_nodes()];
                u[1..].copy_from_slice(&x);
                self.remove_mean(&mut u);
                Ok(u)
            }
        }
    }

    /// Source solve with nodal source values `f`. Neumann sources are first
    /// made orthogonal to constants.
    pub fn solve_source(&self, f: &[f64], dirichlet: Option<&[f64]>) -> Result<Vec<f64>, FemError> {
        let mut f = f.to_vec();
        if self.bc == Bc::Neumann {
            self.remove_mean(&mut f);
        }
        let load = self.mass.matvec(&f);
        self.solve_load(&load, dirichlet)
    }

    /// Subtracts the mass-weighted mean.
    pub fn remove_mean(&self, u: &mut [f64]) {
        let ones = vec![1.0; u.len()];
        let m1 = self.mass.matvec(&ones);
        let vol: f64 = m1.iter().sum();
        let mean = u.iter().zip(&m1).map(|(a, b)| a * b).sum::<f64>() / vol;
        for v in u.iter_mut() {
            *v -= mean;
        }
    }
}

/// Element gradients of a nodal P1 field.
pub fn element_gradients(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    mesh.triangles
        .iter()
        .enumerate()
        .map(|(t, tri)| {
            let (_, g) = triangle_geometry(mesh.corners(t));
            let mut out = [0.0; 2];
            for k in 0..3 {
                out[0] += u[tri[k]] * g[k][0];
                out[1] += u[tri[k]] * g[k][1];
            }
            out
        })
        .collect()
}

/// Area-weighted average of element gradients at each node.
pub fn nodal_gradient(mesh: &Mesh, u: &[f64]) -> Vec<[f64; 2]> {
    let ge = element_gradients(mesh, u);
    let mut acc = vec![[0.0; 2]; mesh.n_nodes()];
    let mut w = vec![0.0; mesh.n_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (area, _) = triangle_geometry(mesh.corners(t));
        for &i in tri {
            acc[i][0] += area * ge[t][0];
            acc[i][1] += area * ge[t][1];
            w[i] += area;
        }
    }
    acc.iter()
        .zip(&w)
        .map(|(g, &a)| [g[0] / a, g[1] / a])
        .collect()
}

/// Recovered Hessian: nodal gradient of the recovered gradient, symmetrized.
pub fn nodal_hessian(mesh: &Mesh, u: &[f64]) -> Vec<Tensor> {
    let g = nodal_gradient(mesh, u);
    let gx: Vec<f64> = g.iter().map(|v| v[0]).collect();
    let gy: Vec<f64> = g.iter().map(|v| v[1]).collect();
    let hx = nodal_gradient(mesh, &gx);
    let hy = nodal_gradient(mesh, &gy);
    hx.iter()
        .zip(&hy)
        .map(|(a, b)| {
            let off = 0.5 * (a[1] + b[0]);
            [[a[0], off], [off, b[1]]]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeff::make_family;
    use crate::fem::mesher::{mesh_domain, mesh_periodic};
    use crate::fem::mesh::Domain;

    #[test]
    fn quadrature_exactness() {
        // Monomials x^a y^b on the reference triangle: ∫ = a! b! / (a+b+2)!
        let fact = |n: usize| (1..=n).product::<usize>() as f64;
        for order in [1usize, 2, 4, 5] {
            let rule = triangle_rule(order).unwrap();
            for a in 0..=order {
                for b in 0..=(order - a) {
                    let q: f64 = rule.iter().map(|(l, w)| w * 0.5 * l[1].powi(a as i32) * l[2].powi(b as i32)).sum();
                    let exact = fact(a) * fact(b) / fact(a + b + 2);
                    assert!((q - exact).abs() < 1e-13, "order {order}: x^{a} y^{b}");
                }
            }
        }
    }

    #[test]
    fn patch_test_linear_reproduced() {
        let m = mesh_domain(&Domain::unit_disk(), 0.1).unwrap();
        let sys = assemble(&m, CoefSource::Constant([[1.3, 0.2], [0.2, 0.9]]), Bc::Dirichlet, AssembleOptions::default()).unwrap();
        let g: Vec<f64> = m.points.iter().map(|p| p[0]).collect();
        let u = sys.solve_source(&vec![0.0; m.n_nodes()], Some(&g)).unwrap();
        let err = u.iter().zip(&g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn laplacian_disk_center_value() {
        let m = mesh_domain(&Domain::unit_disk(), 0.05).unwrap();
        let sys = assemble(&m, CoefSource::Constant([[1.0, 0.0], [0.0, 1.0]]), Bc::Dirichlet, AssembleOptions::default()).unwrap();
        let u = sys.solve_source(&vec![1.0; m.n_nodes()], None).unwrap();
        let c = (0..m.n_nodes())
            .min_by(|&a, &b| m.points[a][0].hypot(m.points[a][1]).total_cmp(&m.points[b][0].hypot(m.points[b][1])))
            .unwrap();
        // exact (1 − r²)/4
        let r2 = m.points[c][0].powi(2) + m.points[c][1].powi(2);
        assert!((u[c] - (1.0 - r2) / 4.0).abs() <= 0.01);
        assert!(u.iter().all(|v| v.is_finite()));
        let zero = sys.solve_source(&vec![0.0; m.n_nodes()], None).unwrap();
        assert!(zero.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn oscillating_assembly_checks() {
        let f = make_family("trig2d", &[1.0]).unwrap();
        let (m, _) = mesh_periodic(&Domain::unit_disk(), 0.125, 8.0).unwrap();
        let sys = assemble(&m, CoefSource::Oscillating { field: &f, eps: 0.125 }, Bc::Dirichlet, AssembleOptions::default()).unwrap();
        assert!(sys.stiffness.symmetry_defect() <= 1e-12 * sys.stiffness.max_abs());
        let err = assemble(&m, CoefSource::Oscillating { field: &f, eps: 0.06 }, Bc::Dirichlet, AssembleOptions::default());
        assert!(matches!(err, Err(FemError::Resolution { .. })));
        let bad = AssembleOptions { quad_order: 2, resolution: 8.0 };
        assert!(matches!(
            assemble(&m, CoefSource::Oscillating { field: &f, eps: 0.125 }, Bc::Dirichlet, bad),
            Err(FemError::Quadrature(2))
        ));
    }

    #[test]
    fn neumann_annihilates_constants_and_solves() {
        let m = mesh_domain(&Domain::unit_disk(), 0.1).unwrap();
        let sys = assemble(&m, CoefSource::Constant([[1.0, 0.0], [0.0, 1.0]]), Bc::Neumann, AssembleOptions::default()).unwrap();
        let k1 = sys.stiffness.matvec(&vec![1.0; m.n_nodes()]);
        assert!(k1.iter().all(|v| v.abs() < 1e-12));
        let f: Vec<f64> = m.points.iter().map(|p| p[0]).collect();
        let u = sys.solve_source(&f, None).unwrap();
        let mean: f64 = sys.mass.matvec(&u).iter().sum();
        assert!(mean.abs() < 1e-12);
        let bad: Vec<f64> = vec![1.0; m.n_nodes()];
        assert!(matches!(sys.solve_load(&bad, None), Err(FemError::NeumannIncompatible { .. })));
    }
}
