//! Distance-weighted interior gradient residuals.

use crate::fem::mesh::triangle_geometry;
use crate::fem::{element_gradients, Mesh};

/// `∫_T δ²` per element with `δ` the exact distance to the domain boundary,
/// using the edge-midpoint rule.
pub fn delta_weights(mesh: &Mesh) -> Vec<f64> {
    (0..mesh.triangles.len())
        .map(|t| {
            let c = mesh.corners(t);
            let (area, _) = triangle_geometry(c);
            let s: f64 = [(0, 1), (1, 2), (2, 0)]
                .iter()
                .map(|&(a, b)| {
                    let m = [0.5 * (c[a][0] + c[b][0]), 0.5 * (c[a][1] + c[b][1])];
                    mesh.domain.distance(m).powi(2)
                })
                .sum();
            area * s / 3.0
        })
        .collect()
}

/// `‖δ ∇(u − v)‖` for nodal P1 fields, with `weights` from [`delta_weights`].
pub fn weighted_gradient_residual(mesh: &Mesh, u: &[f64], v: &[f64], weights: &[f64]) -> f64 {
    let d: Vec<f64> = u.iter().zip(v).map(|(a, b)| a - b).collect();
    element_gradients(mesh, &d)
        .iter()
        .zip(weights)
        .map(|(g, w)| (g[0] * g[0] + g[1] * g[1]) * w)
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{mesh_domain, Domain};

    #[test]
    fn weights_integrate_squared_distance() {
        let mesh = mesh_domain(&Domain::unit_disk(), 0.03).unwrap();
        // ∫ (1 − r)² over the unit disk = 2π ∫₀¹ (1 − r)² r dr = π/6.
        let total: f64 = delta_weights(&mesh).iter().sum();
        assert!((total - std::f64::consts::PI / 6.0).abs() < 5e-3, "{total}");
        assert!((mesh.domain.distance([0.0, 0.0]) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_difference_gives_weighted_norm() {
        let mesh = mesh_domain(&Domain::unit_disk(), 0.05).unwrap();
        let w = delta_weights(&mesh);
        let u: Vec<f64> = mesh.points.iter().map(|p| 3.0 * p[0] - 4.0 * p[1]).collect();
        let zero = vec![0.0; u.len()];
        let r = weighted_gradient_residual(&mesh, &u, &zero, &w);
        let expect = 5.0 * w.iter().sum::<f64>().sqrt();
        assert!((r - expect).abs() < 1e-12 * expect);
        assert_eq!(weighted_gradient_residual(&mesh, &u, &u, &w), 0.0);
    }
}
