//! P1 elements on the unit interval, sharing [`DiscreteSystem`] with 2D.

use crate::coeff::Coefficient;

use super::assemble::{Bc, DiscreteSystem};
use super::sparse::Csr;

/// Gauss–Legendre nodes and weights on [0, 1], five points.
const GAUSS5: [(f64, f64); 5] = [
    (0.046_910_077_030_668_0, 0.118_463_442_528_094_5),
    (0.230_765_344_947_158_5, 0.239_314_335_249_683_2),
    (0.5, 0.284_444_444_444_444_4),
    (0.769_234_655_052_841_5, 0.239_314_335_249_683_2),
    (0.953_089_922_969_332_0, 0.118_463_442_528_094_5),
];

/// Uniform mesh of (0, 1) with `n_el` elements and stiffness for
/// `−(a(x/ε) u′)′` (or a constant coefficient when `eps` is `None`).
pub fn interval_system(n_el: usize, field: Option<(&dyn Coefficient, f64)>, constant: f64, bc: Bc) -> (Vec<f64>, DiscreteSystem) {
    let h = 1.0 / n_el as f64;
    let nodes: Vec<f64> = (0..=n_el).map(|i| i as f64 * h).collect();
    let mut kt = Vec::with_capacity(4 * n_el);
    let mut mt = Vec::with_capacity(4 * n_el);
    for e in 0..n_el {
        let a = match field {
            Some((f, eps)) => GAUSS5
                .iter()
                .map(|&(x, w)| w * f.sample(&[(nodes[e] + x * h) / eps])[0][0])
                .sum::<f64>(),
            None => constant,
        };
        let (i, j) = (e, e + 1);
        kt.extend([(i, i, a / h), (j, j, a / h), (i, j, -a / h), (j, i, -a / h)]);
        mt.extend([(i, i, h / 3.0), (j, j, h / 3.0), (i, j, h / 6.0), (j, i, h / 6.0)]);
    }
    let n = n_el + 1;
    let mut boundary = vec![false; n];
    boundary[0] = true;
    boundary[n_el] = true;
    let sys = DiscreteSystem::new(Csr::from_triplets(n, n, kt), Csr::from_triplets(n, n, mt), boundary, bc, 5);
    (nodes, sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn poisson_solution_exact_at_nodes() {
        // −u″ = 1, u(0) = u(1) = 0 has nodally exact P1 solution x(1−x)/2.
        let (x, sys) = interval_system(16, None, 1.0, Bc::Dirichlet);
        let load: Vec<f64> = (0..x.len()).map(|i| if i == 0 || i == 16 { 1.0 / 32.0 } else { 1.0 / 16.0 }).collect();
        let u = sys.solve_load(&load, None).unwrap();
        for (xi, ui) in x.iter().zip(&u) {
            assert!((ui - xi * (1.0 - xi) / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn mass_integrates_sine() {
        let (x, sys) = interval_system(400, None, 1.0, Bc::Dirichlet);
        let s: Vec<f64> = x.iter().map(|&t| (2.0f64).sqrt() * (PI * t).sin()).collect();
        assert!((sys.mass_inner(&s, &s) - 1.0).abs() < 1e-4);
    }
}
