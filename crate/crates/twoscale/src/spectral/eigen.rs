//! Block shift-invert subspace iteration for `K v = λ M v`.

use faer::{Mat, Side};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::fem::{Bc, DiscreteSystem, Factor};

use super::{dot, SpectralError};

/// Options for [`eigen_cluster`].
#[derive(Debug, Clone, Copy)]
pub struct ClusterOptions {
    /// Half-width of the acceptance window around the target.
    pub window: f64,
    /// Relative residual required of cluster members.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            window: 0.5,
            tol: 1e-10,
            max_iter: 300,
            seed: 7,
        }
    }
}

/// Mass-orthonormal eigenpairs near a target.
#[derive(Debug, Clone, Serialize)]
pub struct EigenCluster {
    /// Ascending.
    pub values: Vec<f64>,
    /// Full nodal vectors (zero on eliminated Dirichlet nodes).
    #[serde(skip)]
    pub vectors: Vec<Vec<f64>>,
    pub target: f64,
    pub window: f64,
    /// `‖K v − λ M v‖ / (λ ‖M v‖)` per member.
    pub residuals: Vec<f64>,
    pub orthonormality_defect: f64,
    /// Nearest eigenvalue outside the cluster found by the iteration.
    pub nearest_outside: f64,
    pub iterations: usize,
}

impl EigenCluster {
    pub fn multiplicity(&self) -> usize {
        self.values.len()
    }
}

/// Two passes of modified Gram–Schmidt in the mass inner product, optionally
/// against a fixed unit vector first. Collapsed columns are redrawn.
fn mass_orthonormalize(m: &crate::fem::Csr, cols: &mut [Vec<f64>], deflate: Option<&[f64]>, rng: &mut ChaCha8Rng) {
    let m_deflate = deflate.map(|c| m.matvec(c));
    for _ in 0..2 {
        let mut mcols: Vec<Vec<f64>> = Vec::with_capacity(cols.len());
        for j in 0..cols.len() {
            for _ in 0..3 {
                if let (Some(c), Some(mc)) = (deflate, &m_deflate) {
                    let a = dot(&cols[j], mc);
                    for (x, y) in cols[j].iter_mut().zip(c) {
                        *x -= a * y;
                    }
                }
                for (i, mi) in mcols.iter().enumerate() {
                    let a = dot(&cols[j], mi);
                    let (head, tail) = cols.split_at_mut(j);
                    for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                        *x -= a * y;
                    }
                }
                let mj = m.matvec(&cols[j]);
                let norm = dot(&cols[j], &mj).max(0.0).sqrt();
                if norm > 1e-200 {
                    cols[j].iter_mut().for_each(|x| *x /= norm);
                    mcols.push(mj.iter().map(|x| x / norm).collect());
                    break;
                }
                cols[j].iter_mut().for_each(|x| *x = rng.gen_range(-1.0..1.0));
            }
            if mcols.len() <= j {
                mcols.push(m.matvec(&cols[j]));
            }
        }
    }
}

/// Eigenpairs of the system nearest `target`. Exactly `expected` of them must
/// lie within `window` of the target, and the next one must lie beyond
/// `1.5 · window`. Neumann systems are restricted to mean-zero vectors.
pub fn eigen_cluster(
    system: &DiscreteSystem,
    target: f64,
    expected: usize,
    opts: ClusterOptions,
) -> Result<EigenCluster, SpectralError> {
    if !(target > 0.0) || expected == 0 {
        return Err(SpectralError::Target(target));
    }
    let k = system.k_ff();
    let m = system.m_ff();
    let n = k.nrows;
    let block = (expected + 3).min(n);
    if block <= expected {
        return Err(SpectralError::Dimension {
            expected: expected + 1,
            got: n,
        });
    }
    let mut shift = target;
    let factor = loop {
        match Factor::lu(&k.axpby(1.0, m, -shift)) {
            Ok(f) => break f,
            Err(_) if shift == target => shift = target * (1.0 + 1e-7),
            Err(e) => return Err(e.into()),
        }
    };
    let ones: Option<Vec<f64>> = (system.bc == Bc::Neumann).then(|| {
        let o = vec![1.0; n];
        let s = dot(&o, &m.matvec(&o)).sqrt();
        o.iter().map(|v| v / s).collect()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..block)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    mass_orthonormalize(m, &mut x, ones.as_deref(), &mut rng);

    let mut ritz: Vec<(f64, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;
    for it in 1..=opts.max_iter {
        iterations = it;
        let rhs: Vec<Vec<f64>> = x.iter().map(|v| m.matvec(v)).collect();
        let mut y = factor.solve_many(&rhs);
        mass_orthonormalize(m, &mut y, ones.as_deref(), &mut rng);
        let ky: Vec<Vec<f64>> = y.iter().map(|v| k.matvec(v)).collect();
        let kr = Mat::<f64>::from_fn(block, block, |i, j| 0.5 * (dot(&y[i], &ky[j]) + dot(&y[j], &ky[i])));
        let eig = kr
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| SpectralError::Dense(format!("{e:?}")))?;
        let s = eig.S().column_vector();
        let u = eig.U();
        ritz = (0..block)
            .map(|c| {
                let theta = s[c];
                let mut v = vec![0.0; n];
                for (r, yr) in y.iter().enumerate() {
                    let w = u[(r, c)];
                    for (a, b) in v.iter_mut().zip(yr) {
                        *a += w * b;
                    }
                }
                let kv = k.matvec(&v);
                let mv = m.matvec(&v);
                let num = kv.iter().zip(&mv).map(|(a, b)| (a - theta * b).powi(2)).sum::<f64>().sqrt();
                let den = theta.abs() * mv.iter().map(|b| b * b).sum::<f64>().sqrt();
                (theta, v, num / den.max(1e-300))
            })
            .collect();
        ritz.sort_by(|a, b| (a.0 - shift).abs().total_cmp(&(b.0 - shift).abs()));
        let members_ok = ritz[..expected].iter().all(|r| r.2 <= opts.tol);
        let next_ok = ritz[expected].2 <= 1e-6;
        x = ritz.iter().map(|r| r.1.clone()).collect();
        if members_ok && next_ok {
            break;
        }
    }
    let worst = ritz[..expected].iter().map(|r| r.2).fold(0.0, f64::max);
    if worst > opts.tol.max(1e-8) {
        return Err(SpectralError::NotConverged {
            iterations,
            residual: worst,
        });
    }
    let inside: Vec<f64> = ritz
        .iter()
        .filter(|r| r.2 <= 1e-6 && (r.0 - target).abs() <= opts.window)
        .map(|r| r.0)
        .collect();
    if inside.len() != expected {
        return Err(SpectralError::ClusterMismatch {
            expected,
            found: inside,
        });
    }
    let nearest_outside = ritz[expected].0;
    if (nearest_outside - target).abs() <= 1.5 * opts.window {
        return Err(SpectralError::Separation {
            nearest: nearest_outside,
            window: opts.window,
        });
    }
    let mut members: Vec<(f64, Vec<f64>, f64)> = ritz.into_iter().take(expected).collect();
    members.sort_by(|a, b| a.0.total_cmp(&b.0));
    let vectors: Vec<Vec<f64>> = members.iter().map(|r| system.extend(&r.1)).collect();
    let mut defect: f64 = 0.0;
    for i in 0..expected {
        let mi = system.mass.matvec(&vectors[i]);
        for j in 0..expected {
            let g = dot(&vectors[j], &mi);
            defect = defect.max((g - (i == j) as u8 as f64).abs());
        }
    }
    Ok(EigenCluster {
        values: members.iter().map(|r| r.0).collect(),
        residuals: members.iter().map(|r| r.2).collect(),
        vectors,
        target,
        window: opts.window,
        orthonormality_defect: defect,
        nearest_outside,
        iterations,
    })
}
