//! Discrete cell problems on the periodic skew lattice.
//!
//! The unit torus is triangulated by the `n_c × n_c` skew lattice
//! `(i + j/2, j)/n_c` split into two triangles per parallelogram. When an
//! `ε`-mesh is built by [`mesh_periodic`](super::mesher::mesh_periodic) with the
//! same `n_c`, its interior elements are scaled copies of these cell elements,
//! so the P1 correctors below are the exact discrete counterparts of the
//! interior problem.

use crate::coeff::{Coefficient, Tensor};

use super::assemble::{element_mean, triangle_rule};
use super::mesh::triangle_geometry;
use super::sparse::{Csr, Factor};
use super::FemError;

/// Evaluation of periodic correctors at torus points.
pub trait CellCorrectors: Send + Sync {
    fn a_hat(&self) -> Tensor;
    /// `χ_j(y)` and `∇_y χ_j(y)` for `j = 0, 1`.
    fn chi(&self, y: [f64; 2]) -> [(f64, [f64; 2]); 2];
    /// `Υ_ij(y)` at index `i·2 + j`.
    fn upsilon(&self, y: [f64; 2]) -> [f64; 4];
}

/// P1 correctors on the skew lattice.
#[derive(Debug, Clone)]
pub struct LatticeCell {
    pub nc: usize,
    pub a_hat: Tensor,
    /// Nodal values, node `(i, j)` at index `i + n_c·j`.
    pub chi: [Vec<f64>; 2],
    pub upsilon: [Vec<f64>; 4],
    pub residual: f64,
}

struct CellMesh {
    nc: usize,
    triangles: Vec<[usize; 3]>,
    corners: Vec<[[f64; 2]; 3]>,
}

impl CellMesh {
    fn new(nc: usize) -> Self {
        let s = 1.0 / nc as f64;
        let at = |i: i64, j: i64| [s * (i as f64 + 0.5 * j as f64), s * j as f64];
        let mut triangles = Vec::with_capacity(2 * nc * nc);
        let mut corners = Vec::with_capacity(2 * nc * nc);
        for j in 0..nc as i64 {
            for i in 0..nc as i64 {
                for t in [[(i, j), (i + 1, j), (i, j + 1)], [(i + 1, j), (i + 1, j + 1), (i, j + 1)]] {
                    triangles.push(t.map(|(a, b)| node_index(nc, a, b)));
                    corners.push(t.map(|(a, b)| at(a, b)));
                }
            }
        }
        CellMesh {
            nc,
            triangles,
            corners,
        }
    }

    fn n(&self) -> usize {
        self.nc * self.nc
    }
}

/// Torus node index of lattice point `(i, j)`. A shift of `n_c` in `j` is a
/// shift of `(1/2, 1)` in the cell, so it is compensated by `n_c/2` in `i`.
pub fn node_index(nc: usize, i: i64, j: i64) -> usize {
    let n = nc as i64;
    let k = j.div_euclid(n);
    let jp = j.rem_euclid(n);
    ((i + k * (n / 2)).rem_euclid(n) + n * jp) as usize
}

impl LatticeCell {
    /// Solves the first- and second-order cell problems with element-mean
    /// coefficients from the given quadrature order.
    pub fn compute(field: &dyn Coefficient, nc: usize, quad_order: usize) -> Result<Self, FemError> {
        if nc < 2 || nc % 2 != 0 {
            return Err(FemError::Domain(format!("lattice cell needs even n_c >= 2, got {nc}")));
        }
        let rule = triangle_rule(quad_order).ok_or(FemError::Quadrature(quad_order))?;
        let cm = CellMesh::new(nc);
        let n = cm.n();
        let coeffs: Vec<Tensor> = cm.corners.iter().map(|&c| element_mean(field, c, 1.0, &rule)).collect();
        let geo: Vec<(f64, [[f64; 2]; 3])> = cm.corners.iter().map(|&c| triangle_geometry(c)).collect();

        let mut trip = Vec::with_capacity(9 * cm.triangles.len());
        for (t, tri) in cm.triangles.iter().enumerate() {
            let (area, g) = geo[t];
            let a = coeffs[t];
            for p in 0..3 {
                for q in 0..3 {
                    let v = area * quad_form(&a, g[q], g[p]);
                    trip.push((tri[p], tri[q], v));
                }
            }
        }
        let k = Csr::from_triplets(n, n, trip);
        let rest: Vec<usize> = (1..n).collect();
        let factor = Factor::cholesky(&k.select(&rest, &rest))?;
        let solve = |rhs: &[f64]| -> Vec<f64> {
            let x = factor.solve(&rhs[1..]);
            let mut u = vec![0.0; n];
            u[1..].copy_from_slice(&x);
            let mean = u.iter().sum::<f64>() / n as f64;
            u.iter().map(|v| v - mean).collect()
        };

        let mut chi: [Vec<f64>; 2] = [vec![], vec![]];
        let mut residual: f64 = 0.0;
        for (j, out) in chi.iter_mut().enumerate() {
            let mut rhs = vec![0.0; n];
            for (t, tri) in cm.triangles.iter().enumerate() {
                let (area, g) = geo[t];
                let a = coeffs[t];
                for p in 0..3 {
                    rhs[tri[p]] -= area * (a[0][j] * g[p][0] + a[1][j] * g[p][1]);
                }
            }
            let x = solve(&rhs);
            residual = residual.max(pinned_residual(&k, &x, &rhs));
            *out = x;
        }

        let grad = |u: &[f64], t: usize| -> [f64; 2] {
            let g = geo[t].1;
            let tri = cm.triangles[t];
            let mut o = [0.0; 2];
            for p in 0..3 {
                o[0] += u[tri[p]] * g[p][0];
                o[1] += u[tri[p]] * g[p][1];
            }
            o
        };

        let mut a_hat = [[0.0; 2]; 2];
        for t in 0..cm.triangles.len() {
            let area = geo[t].0;
            let a = coeffs[t];
            let w: [[f64; 2]; 2] = [0, 1].map(|j| {
                let gc = grad(&chi[j], t);
                [(j == 0) as u8 as f64 + gc[0], (j == 1) as u8 as f64 + gc[1]]
            });
            for i in 0..2 {
                for j in 0..2 {
                    a_hat[i][j] += area * quad_form(&a, w[j], w[i]);
                }
            }
        }

        let mut upsilon: [Vec<f64>; 4] = Default::default();
        for i in 0..2 {
            for j in 0..2 {
                let mut rhs = vec![0.0; n];
                for (t, tri) in cm.triangles.iter().enumerate() {
                    let (area, g) = geo[t];
                    let a = coeffs[t];
                    let gc = grad(&chi[j], t);
                    let c = a[i][j] + a[i][0] * gc[0] + a[i][1] * gc[1] - a_hat[i][j];
                    let chi_mean = tri.iter().map(|&v| chi[j][v]).sum::<f64>() / 3.0;
                    for p in 0..3 {
                        rhs[tri[p]] += c * area / 3.0
                            - area * chi_mean * (a[0][i] * g[p][0] + a[1][i] * g[p][1]);
                    }
                }
                let x = solve(&rhs);
                residual = residual.max(pinned_residual(&k, &x, &rhs));
                upsilon[i * 2 + j] = x;
            }
        }

        Ok(LatticeCell {
            nc,
            a_hat,
            chi,
            upsilon,
            residual,
        })
    }

    /// Barycentric weights and node indices of the cell triangle containing
    /// torus point `y`, plus the gradient map from skew to cell coordinates.
    fn locate(&self, y: [f64; 2]) -> ([usize; 3], [f64; 3], [[f64; 2]; 3]) {
        let n = self.nc as f64;
        let v = n * y[1];
        let u = n * y[0] - 0.5 * v;
        let (fu, fv) = (u.floor(), v.floor());
        let (a, b) = (u - fu, v - fv);
        let (i, j) = (fu as i64, fv as i64);
        let idx = |di: i64, dj: i64| node_index(self.nc, i + di, j + dj);
        // Gradients of skew coordinates with respect to y: ∇u = n(1, −1/2), ∇v = n(0, 1).
        let gu = [n, -0.5 * n];
        let gv = [0.0, n];
        if a + b <= 1.0 {
            (
                [idx(0, 0), idx(1, 0), idx(0, 1)],
                [1.0 - a - b, a, b],
                [[-gu[0] - gv[0], -gu[1] - gv[1]], gu, gv],
            )
        } else {
            (
                [idx(1, 1), idx(1, 0), idx(0, 1)],
                [a + b - 1.0, 1.0 - b, 1.0 - a],
                [[gu[0] + gv[0], gu[1] + gv[1]], [-gv[0], -gv[1]], [-gu[0], -gu[1]]],
            )
        }
    }

    /// P1 value and gradient of a nodal cell field at torus point `y`.
    pub fn eval(&self, f: &[f64], y: [f64; 2]) -> (f64, [f64; 2]) {
        let (idx, w, g) = self.locate(y);
        let mut v = 0.0;
        let mut grad = [0.0; 2];
        for k in 0..3 {
            v += w[k] * f[idx[k]];
            grad[0] += g[k][0] * f[idx[k]];
            grad[1] += g[k][1] * f[idx[k]];
        }
        (v, grad)
    }
}

impl CellCorrectors for LatticeCell {
    fn a_hat(&self) -> Tensor {
        self.a_hat
    }

    fn chi(&self, y: [f64; 2]) -> [(f64, [f64; 2]); 2] {
        [self.eval(&self.chi[0], y), self.eval(&self.chi[1], y)]
    }

    fn upsilon(&self, y: [f64; 2]) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.eval(&self.upsilon[k], y).0)
    }
}

fn quad_form(a: &Tensor, u: [f64; 2], v: [f64; 2]) -> f64 {
    v[0] * (a[0][0] * u[0] + a[0][1] * u[1]) + v[1] * (a[1][0] * u[0] + a[1][1] * u[1])
}

/// Residual of `K x = rhs` relative to `‖rhs‖`, excluding the pinned row.
fn pinned_residual(k: &Csr, x: &[f64], rhs: &[f64]) -> f64 {
    let kx = k.matvec(x);
    let num: f64 = kx.iter().zip(rhs).skip(1).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = rhs.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::CorrectorSet;
    use crate::coeff::make_family;

    #[test]
    fn node_index_is_periodic() {
        let nc = 6;
        for j in -7i64..13 {
            for i in -7i64..13 {
                let y = [(i as f64 + 0.5 * j as f64) / nc as f64, j as f64 / nc as f64];
                let (i2, j2) = ((nc as f64 * (y[0].rem_euclid(1.0) - 0.5 * y[1].rem_euclid(1.0))).round() as i64, (nc as f64 * y[1].rem_euclid(1.0)).round() as i64);
                assert_eq!(node_index(nc, i, j), node_index(nc, i2, j2), "({i},{j})");
            }
        }
    }

    #[test]
    fn identity_has_trivial_correctors() {
        let c = LatticeCell::compute(&crate::coeff::CoefficientField::identity(2), 8, 4).unwrap();
        assert!((c.a_hat[0][0] - 1.0).abs() < 1e-12 && c.a_hat[0][1].abs() < 1e-12);
        assert!(c.chi.iter().chain(c.upsilon.iter()).flatten().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn trig2d_lattice_converges_to_spectral() {
        let f = make_family("trig2d", &[1.0]).unwrap();
        let reference = CorrectorSet::compute(&f, 64, 1e-12).unwrap().a_hat[0][0];
        let errs: Vec<f64> = [10, 20, 40]
            .iter()
            .map(|&nc| {
                let c = LatticeCell::compute(&f, nc, 4).unwrap();
                assert!(c.residual < 1e-10);
                assert!((c.a_hat[0][1] - c.a_hat[1][0]).abs() < 1e-12);
                (c.a_hat[0][0] - reference).abs()
            })
            .collect();
        assert!(errs[1] < errs[0] / 3.0 && errs[2] < errs[1] / 3.0, "{errs:?}");
    }

    #[test]
    fn eval_reproduces_nodes_and_is_continuous() {
        let f = make_family("trig2d", &[1.0]).unwrap();
        let c = LatticeCell::compute(&f, 10, 4).unwrap();
        for (i, j) in [(0i64, 0i64), (3, 7), (9, 9), (-1, 4)] {
            let y = [(i as f64 + 0.5 * j as f64) / 10.0, j as f64 / 10.0];
            let v = c.eval(&c.chi[0], y).0;
            assert!((v - c.chi[0][node_index(10, i, j)]).abs() < 1e-12);
        }
        let y = [0.237, 0.611];
        let (v, g) = c.eval(&c.chi[1], y);
        let d = 1e-7;
        let vx = c.eval(&c.chi[1], [y[0] + d, y[1]]).0;
        let vy = c.eval(&c.chi[1], [y[0], y[1] + d]).0;
        assert!(((vx - v) / d - g[0]).abs() < 1e-5);
        assert!(((vy - v) / d - g[1]).abs() < 1e-5);
        let (v1, _) = c.eval(&c.chi[1], [y[0] + 1.0, y[1] - 1.0]);
        assert!((v - v1).abs() < 1e-12);
    }
}
