//! Two-scale expansions for periodic elliptic eigenvalue problems.

pub mod cell;
pub mod coeff;
pub mod fem;
pub mod harness;
pub mod layers;
pub mod oracle1d;
pub mod spectral;
