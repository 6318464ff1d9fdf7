//! Lattice-based triangulation of convex domains.
//!
//! Interior vertices are taken from the skew lattice `s·(i + j/2, j)`, whose
//! Delaunay triangulation is unique (isosceles triangles, no co-circular
//! quadruples). Lattice points closer than `s/2` to the boundary are dropped and
//! replaced by vertices placed exactly on the boundary curve with spacing at
//! most `s`; the whole point set is then Delaunay-triangulated. For a convex
//! domain the hull is the inscribed boundary polygon.
//!
//! When `s = ε/n_c` with `n_c` even, the interior triangles are exactly the
//! `ε`-scaled triangles of an `n_c × n_c` periodic lattice cell, which lets
//! discrete cell problems be solved on the same element geometry.

use delaunator::{triangulate, Point};

use super::mesh::{triangle_geometry, Domain, Mesh};
use super::FemError;

/// Ratio between the longest lattice edge and the lattice spacing.
pub const LATTICE_EDGE_RATIO: f64 = 1.118_033_988_749_895; // √(5/4)

pub const MIN_ANGLE_DEG: f64 = 20.0;

/// Quasi-uniform mesh with lattice edge length `h_target`.
pub fn mesh_domain(domain: &Domain, h_target: f64) -> Result<Mesh, FemError> {
    if !domain.is_valid() {
        return Err(FemError::Domain(format!("{domain:?}")));
    }
    if !(h_target > 0.0) || h_target > domain.min_radius() / 4.0 {
        return Err(FemError::MeshTarget {
            h: h_target,
            max: domain.min_radius() / 4.0,
        });
    }
    lattice_mesh(domain, h_target / LATTICE_EDGE_RATIO)
}

/// Number of lattice intervals per period so that lattice edges are at most
/// `ε/resolution`. Always even.
pub fn cells_per_period(resolution: f64) -> usize {
    let raw = (LATTICE_EDGE_RATIO * resolution - 1e-9).ceil() as usize;
    (raw + raw % 2).max(2)
}

/// Mesh whose interior lattice is aligned with the `ε`-periodic cells.
pub fn mesh_periodic(domain: &Domain, eps: f64, resolution: f64) -> Result<(Mesh, usize), FemError> {
    if !domain.is_valid() {
        return Err(FemError::Domain(format!("{domain:?}")));
    }
    let nc = cells_per_period(resolution);
    let mesh = lattice_mesh(domain, eps / nc as f64)?;
    Ok((mesh, nc))
}

/// Triangulates `domain` from a skew lattice of spacing `s`.
pub fn lattice_mesh(domain: &Domain, s: f64) -> Result<Mesh, FemError> {
    let (lo, hi) = domain.bounding_box();
    let j0 = (lo[1] / s).floor() as i64 - 1;
    let j1 = (hi[1] / s).ceil() as i64 + 1;
    let mut points: Vec<[f64; 2]> = Vec::new();
    for j in j0..=j1 {
        let shift = 0.5 * j as f64;
        let i0 = (lo[0] / s - shift).floor() as i64 - 1;
        let i1 = (hi[0] / s - shift).ceil() as i64 + 1;
        for i in i0..=i1 {
            let p = [s * (i as f64 + shift), s * j as f64];
            if domain.contains(p) && domain.distance(p) >= 0.5 * s {
                points.push(p);
            }
        }
    }
    let n_interior = points.len();
    points.extend(domain.boundary_points(s));
    let mut boundary = vec![false; points.len()];
    for b in boundary.iter_mut().skip(n_interior) {
        *b = true;
    }
    let max_edge = LATTICE_EDGE_RATIO * s * (1.0 + 1e-9);
    let mut triangles = delaunay(&points, s);
    // Band triangles between the lattice and the boundary polygon can be
    // longer than the lattice edges; split their long edges at the midpoint.
    for _ in 0..8 {
        let mut splits: Vec<(usize, usize)> = Vec::new();
        for t in &triangles {
            for k in 0..3 {
                let (i, j) = (t[k].min(t[(k + 1) % 3]), t[k].max(t[(k + 1) % 3]));
                let (p, q) = (points[i], points[j]);
                if (p[0] - q[0]).hypot(p[1] - q[1]) > max_edge {
                    splits.push((i, j));
                }
            }
        }
        if splits.is_empty() {
            break;
        }
        splits.sort_unstable();
        splits.dedup();
        for (i, j) in splits {
            let (p, q) = (points[i], points[j]);
            points.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            boundary.push(false);
        }
        triangles = delaunay(&points, s);
    }
    let mesh = Mesh::from_parts(points, triangles, boundary, *domain);
    let (angle, at) = mesh.min_angle();
    if angle < MIN_ANGLE_DEG {
        let c = mesh.corners(at);
        return Err(FemError::MeshQuality {
            min_angle: angle,
            near: [
                (c[0][0] + c[1][0] + c[2][0]) / 3.0,
                (c[0][1] + c[1][1] + c[2][1]) / 3.0,
            ],
        });
    }
    Ok(mesh)
}

fn delaunay(points: &[[f64; 2]], s: f64) -> Vec<[usize; 3]> {
    let dpts: Vec<Point> = points.iter().map(|p| Point { x: p[0], y: p[1] }).collect();
    let tri = triangulate(&dpts);
    let area_floor = 1e-12 * s * s;
    let mut triangles = Vec::with_capacity(tri.triangles.len() / 3);
    for t in tri.triangles.chunks_exact(3) {
        let mut idx = [t[0], t[1], t[2]];
        let (area, _) = triangle_geometry([points[idx[0]], points[idx[1]], points[idx[2]]]);
        if area.abs() <= area_floor {
            continue;
        }
        if area < 0.0 {
            idx.swap(1, 2);
        }
        triangles.push(idx);
    }
    triangles
}
