//! P1 finite elements on triangulated convex domains.

pub mod assemble;
pub mod fem1d;
pub mod lattice;
pub mod locate;
pub mod mesh;
pub mod mesher;
pub mod meshio;
pub mod sparse;
pub mod twoscale;

use thiserror::Error;

pub use assemble::{assemble, element_gradients, nodal_gradient, nodal_hessian, AssembleOptions, Bc, CoefSource, DiscreteSystem};
pub use lattice::{CellCorrectors, LatticeCell};
pub use locate::Locator;
pub use mesh::{Domain, Mesh};
pub use mesher::{mesh_domain, mesh_periodic};
pub use sparse::{Csr, Factor};
pub use twoscale::{interpolate_two_scale, NodalCorrectors, SpectralCorrectors};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("mesh size {h} does not resolve the oscillation (need h <= {required})")]
    Resolution { h: f64, required: f64 },
    #[error("quadrature order {0} unsupported or too low for oscillating coefficients")]
    Quadrature(usize),
    #[error("mesh quality: minimum angle {min_angle:.2} deg near ({}, {})", near[0], near[1])]
    MeshQuality { min_angle: f64, near: [f64; 2] },
    #[error("mesh size {h} outside (0, {max}]")]
    MeshTarget { h: f64, max: f64 },
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("factorization failed: {0}")]
    Factorization(String),
    #[error("Neumann load not compatible: total {mean}")]
    NeumannIncompatible { mean: f64 },
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
