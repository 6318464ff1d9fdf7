//! Point location in a triangulation and transfer of P1 fields.

use super::mesh::Mesh;

/// Uniform bucket grid over triangle bounding boxes.
#[derive(Debug, Clone)]
pub struct Locator<'a> {
    mesh: &'a Mesh,
    origin: [f64; 2],
    cell: f64,
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
}

/// Barycentric coordinates of `p` in triangle `c`.
pub fn barycentric(c: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = (c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]);
    let l1 = ((p[0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (p[1] - c[0][1])) / det;
    let l2 = ((c[1][0] - c[0][0]) * (p[1] - c[0][1]) - (p[0] - c[0][0]) * (c[1][1] - c[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

impl<'a> Locator<'a> {
    pub fn new(mesh: &'a Mesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in &mesh.points {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let cell = mesh.h.max(1e-12);
        let dims = [0, 1].map(|a| (((hi[a] - lo[a]) / cell).floor() as usize + 1).max(1));
        let mut buckets = vec![Vec::new(); dims[0] * dims[1]];
        let clamp = |v: f64, a: usize| ((v - lo[a]) / cell).floor().clamp(0.0, (dims[a] - 1) as f64) as usize;
        for t in 0..mesh.triangles.len() {
            let c = mesh.corners(t);
            let (x0, x1) = (c.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), c.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max));
            let (y0, y1) = (c.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min), c.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max));
            for by in clamp(y0, 1)..=clamp(y1, 1) {
                for bx in clamp(x0, 0)..=clamp(x1, 0) {
                    buckets[bx + dims[0] * by].push(t);
                }
            }
        }
        Locator {
            mesh,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    /// Triangle and barycentric weights for `p`. Points outside the mesh get
    /// the nearby triangle with the least negative weight, so evaluation
    /// extrapolates linearly.
    pub fn locate(&self, p: [f64; 2]) -> (usize, [f64; 3]) {
        let bx = ((p[0] - self.origin[0]) / self.cell).floor() as i64;
        let by = ((p[1] - self.origin[1]) / self.cell).floor() as i64;
        let mut best: Option<(f64, usize, [f64; 3])> = None;
        for ring in 0..(self.dims[0].max(self.dims[1]) as i64 + 1) {
            for dy in -ring..=ring {
                for dx in -ring..=ring {
                    if dx.abs() != ring && dy.abs() != ring {
                        continue;
                    }
                    let (x, y) = (bx + dx, by + dy);
                    if x < 0 || y < 0 || x >= self.dims[0] as i64 || y >= self.dims[1] as i64 {
                        continue;
                    }
                    for &t in &self.buckets[x as usize + self.dims[0] * y as usize] {
                        let w = barycentric(self.mesh.corners(t), p);
                        let score = w[0].min(w[1]).min(w[2]);
                        if score >= -1e-12 {
                            return (t, w);
                        }
                        if best.as_ref().is_none_or(|b| score > b.0) {
                            best = Some((score, t, w));
                        }
                    }
                }
            }
            if best.is_some() && ring >= 1 {
                break;
            }
        }
        let (_, t, w) = best.expect("mesh has at least one triangle");
        (t, w)
    }

    /// Evaluates a nodal P1 field at arbitrary points.
    pub fn interpolate(&self, values: &[f64], points: &[[f64; 2]]) -> Vec<f64> {
        points
            .iter()
            .map(|&p| {
                let (t, w) = self.locate(p);
                let tri = self.mesh.triangles[t];
                (0..3).map(|k| w[k] * values[tri[k]]).sum()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::Domain;
    use crate::fem::mesher::mesh_domain;

    #[test]
    fn linear_fields_transfer_exactly() {
        let fine = mesh_domain(&Domain::unit_disk(), 0.05).unwrap();
        let coarse = mesh_domain(&Domain::unit_disk(), 0.13).unwrap();
        let f = |p: [f64; 2]| 1.0 + 2.0 * p[0] - 0.5 * p[1];
        let vals: Vec<f64> = fine.points.iter().map(|&p| f(p)).collect();
        let loc = Locator::new(&fine);
        // Coarse boundary nodes lie outside the fine polygon; extrapolation keeps linears exact.
        for (p, v) in coarse.points.iter().zip(loc.interpolate(&vals, &coarse.points)) {
            assert!((v - f(*p)).abs() < 1e-10);
        }
    }

    #[test]
    fn finds_containing_triangle() {
        let m = mesh_domain(&Domain::unit_disk(), 0.1).unwrap();
        let loc = Locator::new(&m);
        for t in [0, 7, m.triangles.len() - 1] {
            let c = m.corners(t);
            let p = [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0];
            let (found, w) = loc.locate(p);
            assert_eq!(found, t);
            assert!(w.iter().all(|&x| (x - 1.0 / 3.0).abs() < 1e-9));
        }
    }
}
