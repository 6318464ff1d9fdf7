//! Evaluation of periodic cell fields at `x/ε` on a mesh.

use crate::cell::{CorrectorSet, TrigInterpolant};
use crate::coeff::Tensor;

use super::lattice::CellCorrectors;
use super::mesh::Mesh;

/// Trigonometric interpolants of a 2D spectral corrector set.
#[derive(Debug, Clone)]
pub struct SpectralCorrectors {
    a_hat: Tensor,
    chi: Vec<TrigInterpolant>,
    upsilon: Vec<TrigInterpolant>,
}

impl SpectralCorrectors {
    pub fn new(set: &CorrectorSet) -> Self {
        assert_eq!(set.dim, 2, "spectral correctors must be two-dimensional");
        let grid = set.grid();
        SpectralCorrectors {
            a_hat: set.a_hat,
            chi: set.chi.iter().map(|f| grid.interpolant(f)).collect(),
            upsilon: set.upsilon.iter().map(|f| grid.interpolant(f)).collect(),
        }
    }
}

impl CellCorrectors for SpectralCorrectors {
    fn a_hat(&self) -> Tensor {
        self.a_hat
    }

    fn chi(&self, y: [f64; 2]) -> [(f64, [f64; 2]); 2] {
        [self.chi[0].eval_with_grad(&y), self.chi[1].eval_with_grad(&y)]
    }

    fn upsilon(&self, y: [f64; 2]) -> [f64; 4] {
        [0, 1, 2, 3].map(|k| self.upsilon[k].eval(&y))
    }
}

/// Values `f(x/ε)` and gradients `∇_x[f(x/ε)] = ε⁻¹(∇_y f)(x/ε)` at the given points.
pub fn interpolate_two_scale(points: &[[f64; 2]], field: &TrigInterpolant, eps: f64) -> Vec<(f64, [f64; 2])> {
    points
        .iter()
        .map(|p| {
            let (v, g) = field.eval_with_grad(&[p[0] / eps, p[1] / eps]);
            (v, [g[0] / eps, g[1] / eps])
        })
        .collect()
}

/// Nodal values of `χ_j(x/ε)` and `Υ_ij(x/ε)` on a mesh.
#[derive(Debug, Clone)]
pub struct NodalCorrectors {
    pub eps: f64,
    pub chi: [Vec<f64>; 2],
    pub upsilon: [Vec<f64>; 4],
}

impl NodalCorrectors {
    pub fn new(mesh: &Mesh, cell: &dyn CellCorrectors, eps: f64) -> Self {
        let n = mesh.n_nodes();
        let mut chi = [vec![0.0; n], vec![0.0; n]];
        let mut upsilon: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; n]);
        for (i, p) in mesh.points.iter().enumerate() {
            let y = [p[0] / eps, p[1] / eps];
            let c = cell.chi(y);
            chi[0][i] = c[0].0;
            chi[1][i] = c[1].0;
            let u = cell.upsilon(y);
            for k in 0..4 {
                upsilon[k][i] = u[k];
            }
        }
        NodalCorrectors { eps, chi, upsilon }
    }

    /// Nodal `χ_j(x/ε) g_j(x)` for a nodal vector field `g`.
    pub fn chi_dot(&self, g: &[[f64; 2]]) -> Vec<f64> {
        (0..g.len())
            .map(|i| self.chi[0][i] * g[i][0] + self.chi[1][i] * g[i][1])
            .collect()
    }

    /// Nodal `Υ_ij(x/ε) H_ij(x)` for a nodal tensor field `H`.
    pub fn upsilon_dot(&self, h: &[Tensor]) -> Vec<f64> {
        (0..h.len())
            .map(|n| (0..4).map(|k| self.upsilon[k][n] * h[n][k / 2][k % 2]).sum())
            .collect()
    }
}
