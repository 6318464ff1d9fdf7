//! Triangle meshes of disks and ellipses.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

/// A smooth, strictly convex planar domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Disk {
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    /// Axis-aligned ellipse with semi-axes `a` (x) and `b` (y).
    Ellipse {
        a: f64,
        b: f64,
        #[serde(default)]
        center: [f64; 2],
    },
}

impl Domain {
    pub fn unit_disk() -> Self {
        Domain::Disk {
            radius: 1.0,
            center: [0.0, 0.0],
        }
    }

    pub fn center(&self) -> [f64; 2] {
        match *self {
            Domain::Disk { center, .. } | Domain::Ellipse { center, .. } => center,
        }
    }

    fn semi_axes(&self) -> (f64, f64) {
        match *self {
            Domain::Disk { radius, .. } => (radius, radius),
            Domain::Ellipse { a, b, .. } => (a, b),
        }
    }

    /// Smallest semi-axis.
    pub fn min_radius(&self) -> f64 {
        let (a, b) = self.semi_axes();
        a.min(b)
    }

    pub fn is_valid(&self) -> bool {
        let (a, b) = self.semi_axes();
        let c = self.center();
        a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0 && c.iter().all(|v| v.is_finite())
    }

    pub fn area(&self) -> f64 {
        let (a, b) = self.semi_axes();
        PI * a * b
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let (a, b) = self.semi_axes();
        let c = self.center();
        ([c[0] - a, c[1] - b], [c[0] + a, c[1] + b])
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let (a, b) = self.semi_axes();
        let c = self.center();
        let (x, y) = ((p[0] - c[0]) / a, (p[1] - c[1]) / b);
        x * x + y * y < 1.0
    }

    /// Nearest boundary point.
    pub fn project(&self, p: [f64; 2]) -> [f64; 2] {
        let c = self.center();
        let q = [p[0] - c[0], p[1] - c[1]];
        match *self {
            Domain::Disk { radius, .. } => {
                let r = q[0].hypot(q[1]);
                if r == 0.0 {
                    [c[0] + radius, c[1]]
                } else {
                    [c[0] + radius * q[0] / r, c[1] + radius * q[1] / r]
                }
            }
            Domain::Ellipse { a, b, .. } => {
                let z = closest_on_ellipse(a, b, q);
                [c[0] + z[0], c[1] + z[1]]
            }
        }
    }

    /// Euclidean distance to the boundary.
    pub fn distance(&self, p: [f64; 2]) -> f64 {
        match *self {
            Domain::Disk { radius, center } => {
                ((p[0] - center[0]).hypot(p[1] - center[1]) - radius).abs()
            }
            Domain::Ellipse { .. } => {
                let z = self.project(p);
                (p[0] - z[0]).hypot(p[1] - z[1])
            }
        }
    }

    /// Outward unit normal at a boundary point.
    pub fn normal(&self, p: [f64; 2]) -> [f64; 2] {
        let (a, b) = self.semi_axes();
        let c = self.center();
        let n = [(p[0] - c[0]) / (a * a), (p[1] - c[1]) / (b * b)];
        let l = n[0].hypot(n[1]);
        [n[0] / l, n[1] / l]
    }

    /// Points on the boundary, equally spaced in arc length, spacing at most `spacing`.
    pub fn boundary_points(&self, spacing: f64) -> Vec<[f64; 2]> {
        let (a, b) = self.semi_axes();
        let c = self.center();
        match *self {
            Domain::Disk { radius, .. } => {
                let n = ((2.0 * PI * radius / spacing).ceil() as usize).max(8);
                (0..n)
                    .map(|k| {
                        let t = 2.0 * PI * k as f64 / n as f64;
                        [c[0] + radius * t.cos(), c[1] + radius * t.sin()]
                    })
                    .collect()
            }
            Domain::Ellipse { .. } => {
                let samples = 20_000usize;
                let speed = |t: f64| (a * t.sin()).hypot(b * t.cos());
                let dt = 2.0 * PI / samples as f64;
                let mut cum = vec![0.0; samples + 1];
                for k in 0..samples {
                    let t0 = k as f64 * dt;
                    // Simpson on each sub-interval
                    cum[k + 1] = cum[k]
                        + dt / 6.0 * (speed(t0) + 4.0 * speed(t0 + 0.5 * dt) + speed(t0 + dt));
                }
                let perimeter = cum[samples];
                let n = ((perimeter / spacing).ceil() as usize).max(8);
                let mut out = Vec::with_capacity(n);
                let mut k = 0;
                for m in 0..n {
                    let target = perimeter * m as f64 / n as f64;
                    while cum[k + 1] < target {
                        k += 1;
                    }
                    let frac = (target - cum[k]) / (cum[k + 1] - cum[k]);
                    let t = (k as f64 + frac) * dt;
                    out.push([c[0] + a * t.cos(), c[1] + b * t.sin()]);
                }
                out
            }
        }
    }

    /// Residual of the implicit boundary equation at `p`.
    pub fn boundary_residual(&self, p: [f64; 2]) -> f64 {
        let (a, b) = self.semi_axes();
        let c = self.center();
        let (x, y) = ((p[0] - c[0]) / a, (p[1] - c[1]) / b);
        (x * x + y * y - 1.0).abs()
    }
}

/// Closest point on the ellipse `(x/a)² + (y/b)² = 1` to `q`, by bisection on
/// the Lagrange parameter.
fn closest_on_ellipse(a: f64, b: f64, q: [f64; 2]) -> [f64; 2] {
    if a < b {
        let z = closest_on_ellipse(b, a, [q[1], q[0]]);
        return [z[1], z[0]];
    }
    let (x0, y0) = (q[0].abs(), q[1].abs());
    let z = if y0 > 0.0 {
        if x0 > 0.0 {
            // Root t of F(t) = (a x0/(t+a²))² + (b y0/(t+b²))² − 1 on (−b² + b y0, ∞).
            let f = |t: f64| {
                let u = a * x0 / (t + a * a);
                let v = b * y0 / (t + b * b);
                u * u + v * v - 1.0
            };
            let mut lo = -b * b + b * y0;
            let mut hi = -b * b + (a * a * x0 * x0 + b * b * y0 * y0).sqrt();
            for _ in 0..200 {
                let t = 0.5 * (lo + hi);
                if t <= lo || t >= hi {
                    break;
                }
                if f(t) > 0.0 {
                    lo = t;
                } else {
                    hi = t;
                }
            }
            let t = 0.5 * (lo + hi);
            [a * a * x0 / (t + a * a), b * b * y0 / (t + b * b)]
        } else {
            [0.0, b]
        }
    } else {
        let denom = a * a - b * b;
        if x0 < denom / a {
            let xr = a * a * x0 / denom;
            let xr = xr.min(a);
            [xr, b * (1.0 - (xr / a).powi(2)).max(0.0).sqrt()]
        } else {
            [a, 0.0]
        }
    };
    [z[0].copysign(q[0]), z[1].copysign(q[1])]
}

/// A conforming triangulation with boundary flags.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub points: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: Vec<bool>,
    /// Outward unit normals at boundary vertices, zero elsewhere.
    pub normals: Vec<[f64; 2]>,
    /// Measured maximum edge length.
    pub h: f64,
    pub domain: Domain,
}

/// Signed area and barycentric gradients of a triangle.
pub fn triangle_geometry(p: [[f64; 2]; 3]) -> (f64, [[f64; 2]; 3]) {
    let d1 = [p[1][0] - p[0][0], p[1][1] - p[0][1]];
    let d2 = [p[2][0] - p[0][0], p[2][1] - p[0][1]];
    let det = d1[0] * d2[1] - d1[1] * d2[0];
    let g1 = [d2[1] / det, -d2[0] / det];
    let g2 = [-d1[1] / det, d1[0] / det];
    let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
    (0.5 * det, [g0, g1, g2])
}

fn angles_deg(p: [[f64; 2]; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let a = p[k];
        let b = p[(k + 1) % 3];
        let c = p[(k + 2) % 3];
        let u = [b[0] - a[0], b[1] - a[1]];
        let v = [c[0] - a[0], c[1] - a[1]];
        let cos = (u[0] * v[0] + u[1] * v[1]) / (u[0].hypot(u[1]) * v[0].hypot(v[1]));
        out[k] = cos.clamp(-1.0, 1.0).acos().to_degrees();
    }
    out
}

impl Mesh {
    pub fn from_parts(
        points: Vec<[f64; 2]>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
        domain: Domain,
    ) -> Self {
        let normals = points
            .iter()
            .zip(&boundary)
            .map(|(&p, &b)| if b { domain.normal(p) } else { [0.0, 0.0] })
            .collect();
        let mut mesh = Mesh {
            points,
            triangles,
            boundary,
            normals,
            h: 0.0,
            domain,
        };
        mesh.h = mesh.max_edge();
        mesh
    }

    pub fn n_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn corners(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.points[a], self.points[b], self.points[c]]
    }

    pub fn max_edge(&self) -> f64 {
        let mut h: f64 = 0.0;
        for t in 0..self.triangles.len() {
            let p = self.corners(t);
            for k in 0..3 {
                let (a, b) = (p[k], p[(k + 1) % 3]);
                h = h.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        h
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| triangle_geometry(self.corners(t)).0)
            .sum()
    }

    /// Smallest interior angle in degrees and the triangle where it occurs.
    pub fn min_angle(&self) -> (f64, usize) {
        let mut best = (180.0, 0);
        for t in 0..self.triangles.len() {
            let m = angles_deg(self.corners(t)).into_iter().fold(180.0, f64::min);
            if m < best.0 {
                best = (m, t);
            }
        }
        best
    }

    pub fn all_positively_oriented(&self) -> bool {
        (0..self.triangles.len()).all(|t| triangle_geometry(self.corners(t)).0 > 0.0)
    }

    pub fn boundary_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| self.boundary[i]).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| !self.boundary[i]).collect()
    }

    /// Boundary edges as ordered vertex pairs with the domain on the left.
    pub fn boundary_edges(&self) -> Vec<[usize; 2]> {
        use std::collections::HashMap;
        let mut count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = count.entry(key).or_insert((0, 0));
                e.0 += 1;
                e.1 = a;
            }
        }
        let mut out: Vec<[usize; 2]> = count
            .into_iter()
            .filter(|(_, (c, _))| *c == 1)
            .map(|((u, v), (_, first))| if first == u { [u, v] } else { [v, u] })
            .collect();
        out.sort();
        out
    }

    /// Distance of each node to the exact boundary.
    pub fn node_distance(&self) -> Vec<f64> {
        self.points
            .iter()
            .zip(&self.boundary)
            .map(|(&p, &b)| if b { 0.0 } else { self.domain.distance(p) })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn disk_distance_at_center() {
        assert_eq!(Domain::unit_disk().distance([0.0, 0.0]), 1.0);
    }

    #[test]
    fn ellipse_boundary_points_exact() {
        let d = Domain::Ellipse {
            a: 2.0,
            b: 1.0,
            center: [0.0, 0.0],
        };
        let pts = d.boundary_points(0.05);
        assert!(pts.iter().all(|&p| d.boundary_residual(p) < 1e-12));
        let max_gap = (0..pts.len())
            .map(|k| {
                let (a, b) = (pts[k], pts[(k + 1) % pts.len()]);
                (a[0] - b[0]).hypot(a[1] - b[1])
            })
            .fold(0.0, f64::max);
        assert!(max_gap <= 0.05);
    }

    proptest! {
        #[test]
        fn ellipse_projection_is_closest(x in -3.0f64..3.0, y in -2.0f64..2.0) {
            let d = Domain::Ellipse { a: 2.0, b: 1.0, center: [0.0, 0.0] };
            let z = d.project([x, y]);
            prop_assert!(d.boundary_residual(z) < 1e-9);
            let dist = (x - z[0]).hypot(y - z[1]);
            // brute-force oracle over a fine parameter sweep
            let brute = (0..20000).map(|k| {
                let t = 2.0 * PI * k as f64 / 20000.0;
                (x - 2.0 * t.cos()).hypot(y - t.sin())
            }).fold(f64::INFINITY, f64::min);
            prop_assert!(dist <= brute + 1e-9);
            prop_assert!(dist >= brute - 1e-3);
        }
    }
}
