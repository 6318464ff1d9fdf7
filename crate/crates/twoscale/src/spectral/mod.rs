//! Eigenclusters, spectral projections and first-order cluster corrections.

mod eigen;
mod psi;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fem::{Csr, DiscreteSystem, Factor, FemError};

pub use eigen::{eigen_cluster, ClusterOptions, EigenCluster};
pub use psi::{psi_bl_solve, PsiSolution};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("expected {expected} eigenvalues in the window, found {found:?}")]
    ClusterMismatch { expected: usize, found: Vec<f64> },
    #[error("eigenvalue {nearest} lies within 1.5x the window half-width {window}")]
    Separation { nearest: f64, window: f64 },
    #[error("eigen iteration did not converge after {iterations} steps (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("target must be positive, got {0}")]
    Target(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("dense eigen solver failed: {0}")]
    Dense(String),
    #[error("projected solve preconditioner: {0}")]
    Preconditioner(String),
    #[error("boundary trace missing or wrong length")]
    MissingTrace,
    #[error(transparent)]
    Fem(#[from] FemError),
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Arithmetic mean of the cluster values and mean of their reciprocals.
pub fn cluster_mean(values: &[f64]) -> (f64, f64) {
    let m = values.len() as f64;
    (
        values.iter().sum::<f64>() / m,
        values.iter().map(|v| 1.0 / v).sum::<f64>() / m,
    )
}

/// Mass-orthonormal bases of two cluster ranges with the second aligned to
/// the first.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    pub basis0: Vec<Vec<f64>>,
    /// `S_ε` basis after alignment to `basis0`.
    pub basis_eps: Vec<Vec<f64>>,
    /// Orthogonal `M × M` map applied to the raw `S_ε` basis.
    pub alignment: Vec<Vec<f64>>,
    pub lambda0: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    S0,
    SEps,
}

/// Orthogonal `R` maximizing `tr(Rᵀ Bᵀ M A)`, so that `B R ≈ A`.
pub fn procrustes(mass: &Csr, a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = a.len();
    let ma: Vec<Vec<f64>> = a.iter().map(|v| mass.matvec(v)).collect();
    // G = Bᵀ M A
    let g = Mat::<f64>::from_fn(m, m, |i, j| dot(&b[i], &ma[j]));
    let svd = g.svd().expect("svd of a small matrix");
    let (u, v) = (svd.U(), svd.V());
    (0..m)
        .map(|i| (0..m).map(|j| (0..m).map(|k| u[(i, k)] * v[(j, k)]).sum()).collect())
        .collect()
}

/// Linear combinations `B R` of basis vectors.
pub fn combine(basis: &[Vec<f64>], r: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = basis.len();
    (0..m)
        .map(|j| {
            let mut v = vec![0.0; basis[0].len()];
            for i in 0..m {
                for (a, b) in v.iter_mut().zip(&basis[i]) {
                    *a += r[i][j] * b;
                }
            }
            v
        })
        .collect()
}

impl ProjectionPair {
    pub fn new(mass: &Csr, cluster0: &EigenCluster, cluster_eps: &EigenCluster) -> Result<Self, SpectralError> {
        if cluster0.multiplicity() != cluster_eps.multiplicity() {
            return Err(SpectralError::Dimension {
                expected: cluster0.multiplicity(),
                got: cluster_eps.multiplicity(),
            });
        }
        let r = procrustes(mass, &cluster0.vectors, &cluster_eps.vectors);
        Ok(ProjectionPair {
            basis0: cluster0.vectors.clone(),
            basis_eps: combine(&cluster_eps.vectors, &r),
            alignment: r,
            lambda0: cluster_mean(&cluster0.values).0,
            values: cluster_eps.values.clone(),
        })
    }

    pub fn rank(&self) -> usize {
        self.basis0.len()
    }

    pub fn basis(&self, which: Which) -> &[Vec<f64>] {
        match which {
            Which::S0 => &self.basis0,
            Which::SEps => &self.basis_eps,
        }
    }

    pub fn project(&self, mass: &Csr, which: Which, f: &[f64]) -> Result<Vec<f64>, SpectralError> {
        project_onto(mass, self.basis(which), f)
    }
}

/// `Σ_j ⟨f, v_j⟩ v_j` in the mass inner product.
pub fn project_onto(mass: &Csr, basis: &[Vec<f64>], f: &[f64]) -> Result<Vec<f64>, SpectralError> {
    if basis.iter().any(|v| v.len() != f.len()) || mass.nrows != f.len() {
        return Err(SpectralError::Dimension {
            expected: mass.nrows,
            got: f.len(),
        });
    }
    let mf = mass.matvec(f);
    let mut out = vec![0.0; f.len()];
    for v in basis {
        let c = dot(v, &mf);
        for (o, x) in out.iter_mut().zip(v) {
            *o += c * x;
        }
    }
    Ok(out)
}

/// `θ = −(λ₀/M) Σ_j ⟨K^bl φ_j, φ_j⟩`.
pub fn theta_from_pairing(mass: &Csr, kbl_phi: &[Vec<f64>], phis: &[Vec<f64>], lambda0: f64) -> Result<f64, SpectralError> {
    if kbl_phi.len() != phis.len() || phis.is_empty() {
        return Err(SpectralError::Dimension {
            expected: phis.len(),
            got: kbl_phi.len(),
        });
    }
    let m = phis.len() as f64;
    let s: f64 = kbl_phi.iter().zip(phis).map(|(k, p)| dot(k, &mass.matvec(p))).sum();
    Ok(-lambda0 / m * s)
}

/// Random orthogonal `M × M` matrix (QR of a Gaussian-like matrix).
pub fn random_rotation(m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Mat::<f64>::from_fn(m, m, |_, _| rng.gen_range(-1.0..1.0));
    let q = a.qr().compute_Q();
    (0..m).map(|i| (0..m).map(|j| q[(i, j)]).collect()).collect()
}

/// Rotation by `angle` for a two-member basis.
pub fn plane_rotation(angle: f64) -> Vec<Vec<f64>> {
    let (s, c) = angle.sin_cos();
    vec![vec![c, -s], vec![s, c]]
}

/// `|θ(Φ) − θ(ΦR)|` using linearity of `K^bl`.
pub fn theta_rotation_defect(mass: &Csr, kbl_phi: &[Vec<f64>], phis: &[Vec<f64>], lambda0: f64, r: &[Vec<f64>]) -> Result<f64, SpectralError> {
    let t0 = theta_from_pairing(mass, kbl_phi, phis, lambda0)?;
    let t1 = theta_from_pairing(mass, &combine(kbl_phi, r), &combine(phis, r), lambda0)?;
    Ok((t0 - t1).abs())
}

/// `|μ̄_ε − μ₀ − M⁻¹ Σ_j ⟨(T_ε − T₀) φ_j, φ_j⟩|`.
pub fn osborn_diagnostic(
    mass: &Csr,
    t_eps: &dyn Fn(&[f64]) -> Result<Vec<f64>, FemError>,
    t_0: &dyn Fn(&[f64]) -> Result<Vec<f64>, FemError>,
    basis: &[Vec<f64>],
    mu_bar_eps: f64,
    mu0: f64,
) -> Result<f64, SpectralError> {
    let mut s = 0.0;
    for phi in basis {
        let a = t_eps(phi)?;
        let b = t_0(phi)?;
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        s += dot(&d, &mass.matvec(phi));
    }
    Ok((mu_bar_eps - mu0 - s / basis.len() as f64).abs())
}

/// Source-solve operator `T f = u`, `K u = M f`, for a system.
pub fn source_operator(system: &DiscreteSystem) -> impl Fn(&[f64]) -> Result<Vec<f64>, FemError> + '_ {
    move |f: &[f64]| system.solve_source(f, None)
}

/// Defects of the projection laws over random vectors.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProjectionLaws {
    pub idempotence: f64,
    pub self_adjointness: f64,
    /// `|rank − M|` as measured from the images of the random vectors.
    pub rank_defect: usize,
}

pub fn projection_laws(mass: &Csr, basis: &[Vec<f64>], samples: usize, seed: u64) -> Result<ProjectionLaws, SpectralError> {
    let n = mass.nrows;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fs: Vec<Vec<f64>> = (0..samples).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let sf: Vec<Vec<f64>> = fs.iter().map(|f| project_onto(mass, basis, f)).collect::<Result<_, _>>()?;
    let mut idem: f64 = 0.0;
    let mut adj: f64 = 0.0;
    for (i, f) in fs.iter().enumerate() {
        let ssf = project_onto(mass, basis, &sf[i])?;
        let d: Vec<f64> = ssf.iter().zip(&sf[i]).map(|(a, b)| a - b).collect();
        let nf = dot(f, &mass.matvec(f)).sqrt();
        idem = idem.max(dot(&d, &mass.matvec(&d)).sqrt() / nf);
        let g = &fs[(i + 1) % samples];
        let sg = &sf[(i + 1) % samples];
        let ng = dot(g, &mass.matvec(g)).sqrt();
        adj = adj.max((dot(&sf[i], &mass.matvec(g)) - dot(f, &mass.matvec(sg))).abs() / (nf * ng));
    }
    let gram = Mat::<f64>::from_fn(samples, samples, |i, j| dot(&sf[i], &mass.matvec(&sf[j])));
    let eig = gram
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| SpectralError::Dense(format!("{e:?}")))?;
    let s = eig.S().column_vector();
    let top = (0..samples).map(|i| s[i].abs()).fold(0.0, f64::max);
    let rank = (0..samples).filter(|&i| s[i].abs() > 1e-8 * top).count();
    Ok(ProjectionLaws {
        idempotence: idem,
        self_adjointness: adj,
        rank_defect: rank.abs_diff(basis.len()),
    })
}

/// Discrete resolvent identity: for `g` in the eigenspace with value `λ₀` and
/// `z = μ₀ + 1`, the solution of `(z − T₀) u = g` equals `g`. Solved as
/// `(z K − M) u = K g` on the free nodes. Returns `‖u − g‖ / ‖g‖` (mass norm).
pub fn resolvent_defect(system: &DiscreteSystem, g: &[f64], lambda0: f64) -> Result<f64, SpectralError> {
    let z = 1.0 / lambda0 + 1.0;
    let k = system.k_ff();
    let m = system.m_ff();
    let factor = Factor::lu(&k.axpby(z, m, -1.0))?;
    let gf = system.restrict(g);
    let u = system.extend(&factor.solve(&k.matvec(&gf)));
    let d: Vec<f64> = u.iter().zip(g).map(|(a, b)| a - b).collect();
    Ok(system.mass_norm(&d) / system.mass_norm(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, mesh_domain, AssembleOptions, Bc, CoefSource, Domain};

    const J01_SQ: f64 = 5.783_185_962_946_784; // 2.404825557695773²
    const J11_SQ: f64 = 14.681_970_642_123_9; // 3.831705970207512²
    const J11P_SQ: f64 = 3.389_957_716_671_89; // 1.841183781340659²

    fn laplacian(h: f64, bc: Bc) -> DiscreteSystem {
        let m = mesh_domain(&Domain::unit_disk(), h).unwrap();
        assemble(&m, CoefSource::Constant([[1.0, 0.0], [0.0, 1.0]]), bc, AssembleOptions::default()).unwrap()
    }

    #[test]
    fn bessel_constants_from_independent_root_finder() {
        // Series for J0, J1 and J1' with bisection; checks the hard-coded values.
        let j = |nu: i32, x: f64| {
            let mut term = (x / 2.0).powi(nu) / (1..=nu).map(|k| k as f64).product::<f64>();
            let mut s = 0.0;
            for k in 0..60 {
                s += term;
                term *= -(x * x / 4.0) / ((k + 1) as f64 * (k + 1 + nu) as f64);
            }
            s
        };
        let root = |f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64| {
            for _ in 0..100 {
                let c = 0.5 * (a + b);
                if f(a) * f(c) <= 0.0 {
                    b = c;
                } else {
                    a = c;
                }
            }
            0.5 * (a + b)
        };
        assert!((root(&|x| j(0, x), 2.0, 3.0).powi(2) - J01_SQ).abs() < 1e-10);
        assert!((root(&|x| j(1, x), 3.0, 4.5).powi(2) - J11_SQ).abs() < 1e-10);
        let dj1 = |x: f64| j(0, x) - j(1, x) / x;
        assert!((root(&dj1, 1.0, 2.5).powi(2) - J11P_SQ).abs() < 1e-10);
    }

    #[test]
    fn disk_dirichlet_ground_state() {
        let sys = laplacian(0.05, Bc::Dirichlet);
        let c = eigen_cluster(&sys, 5.8, 1, ClusterOptions::default()).unwrap();
        assert!((c.values[0] - J01_SQ).abs() < 0.05, "{:?}", c.values);
        assert!(c.orthonormality_defect < 1e-8);
        assert!(c.residuals[0] <= 1e-8);
    }

    #[test]
    fn disk_dirichlet_doublet_and_mismatch() {
        let sys = laplacian(0.05, Bc::Dirichlet);
        let opts = ClusterOptions {
            window: 1.0,
            ..Default::default()
        };
        let c = eigen_cluster(&sys, 14.7, 2, opts).unwrap();
        assert!(c.values.iter().all(|v| (v - J11_SQ).abs() < 0.15), "{:?}", c.values);
        let (mean, _) = cluster_mean(&c.values);
        assert!((mean - J11_SQ).abs() < 0.15);
        assert!(matches!(
            eigen_cluster(&sys, 14.7, 1, opts),
            Err(SpectralError::ClusterMismatch { .. }) | Err(SpectralError::Separation { .. })
        ));
    }

    #[test]
    fn disk_neumann_first_nonzero() {
        let sys = laplacian(0.05, Bc::Neumann);
        let opts = ClusterOptions {
            window: 0.5,
            ..Default::default()
        };
        let c = eigen_cluster(&sys, 3.4, 2, opts).unwrap();
        for (v, vec) in c.values.iter().zip(&c.vectors) {
            assert!((v - J11P_SQ).abs() < 0.03, "{v}");
            let mean: f64 = sys.mass.matvec(vec).iter().sum();
            assert!(mean.abs() < 1e-10);
        }
    }

    #[test]
    fn cluster_mean_arithmetic() {
        assert_eq!(cluster_mean(&[2.0]), (2.0, 0.5));
        let (m, mu) = cluster_mean(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((mu - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn projection_and_resolvent_laws() {
        let sys = laplacian(0.1, Bc::Dirichlet);
        let opts = ClusterOptions {
            window: 1.0,
            ..Default::default()
        };
        let c = eigen_cluster(&sys, 14.7, 2, opts).unwrap();
        let laws = projection_laws(&sys.mass, &c.vectors, 20, 3).unwrap();
        assert!(laws.idempotence < 1e-10 && laws.self_adjointness < 1e-10 && laws.rank_defect == 0);
        let p = project_onto(&sys.mass, &c.vectors, &c.vectors[0]).unwrap();
        assert!(p.iter().zip(&c.vectors[0]).all(|(a, b)| (a - b).abs() < 1e-10));
        for (v, g) in c.values.iter().zip(&c.vectors) {
            assert!(resolvent_defect(&sys, g, *v).unwrap() < 1e-8);
        }
        let kbl: Vec<Vec<f64>> = c.vectors.iter().map(|v| v.iter().map(|x| x * x).collect()).collect();
        assert!(theta_rotation_defect(&sys.mass, &kbl, &c.vectors, c.values[0], &plane_rotation(37f64.to_radians())).unwrap() < 1e-8);
        let zero = vec![vec![0.0; sys.n_nodes()]; 2];
        assert_eq!(theta_from_pairing(&sys.mass, &zero, &c.vectors, 14.7).unwrap(), 0.0);
    }

    #[test]
    fn procrustes_recovers_rotation() {
        let sys = laplacian(0.1, Bc::Dirichlet);
        let c = eigen_cluster(&sys, 14.7, 2, ClusterOptions { window: 1.0, ..Default::default() }).unwrap();
        let rot = random_rotation(2, 11);
        let b = combine(&c.vectors, &rot);
        let r = procrustes(&sys.mass, &c.vectors, &b);
        let back = combine(&b, &r);
        for (x, y) in back.iter().zip(&c.vectors) {
            assert!(x.iter().zip(y).all(|(a, b)| (a - b).abs() < 1e-10));
        }
    }
}
