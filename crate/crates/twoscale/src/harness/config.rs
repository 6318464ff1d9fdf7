//! Experiment configuration (TOML).

use serde::{Deserialize, Serialize};

use crate::coeff::{make_family, Coefficient, CoefficientField};
use crate::fem::mesher::cells_per_period;
use crate::fem::{Bc, Domain};

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub family: String,
    #[serde(default)]
    pub params: Vec<f64>,
}

/// Which cell correctors enter the two-scale fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellMethod {
    /// P1 cell problems on the mesh lattice (consistent with the ε-mesh).
    #[default]
    Lattice,
    /// Fourier collocation correctors.
    Spectral,
}

/// What the sweep is expected to show; selects the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    /// Convergence rates for an oscillating coefficient.
    #[default]
    Rates,
    /// An ε-independent problem: every correction vanishes.
    Trivial,
    /// Report only.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    /// Expected location of the homogenized cluster.
    pub lambda: f64,
    /// Half-width of the acceptance window.
    pub window: f64,
    #[serde(default = "one")]
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative eigen-residual of cluster members.
    #[serde(default = "eigen_tol")]
    pub eigen: f64,
    /// Cell-solver tolerance.
    #[serde(default = "cell_tol")]
    pub cell: f64,
    /// Bound for quantities that must vanish in trivial runs.
    #[serde(default = "trivial_tol")]
    pub trivial: f64,
    /// Largest log-residual for which a rate fit counts as conclusive.
    #[serde(default = "fit_tol")]
    pub fit: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eigen: eigen_tol(),
            cell: cell_tol(),
            trivial: trivial_tol(),
            fit: fit_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    #[serde(default = "one")]
    pub mode: usize,
    /// Periods per unit length; `ε = 1/n`.
    pub periods: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub coefficient: CoefficientSpec,
    #[serde(default = "Domain::unit_disk")]
    pub domain: Domain,
    #[serde(default = "dirichlet")]
    pub bc: Bc,
    pub target: Option<TargetSpec>,
    /// Strictly decreasing.
    #[serde(default)]
    pub eps: Vec<f64>,
    /// Mesh edges per period.
    #[serde(default = "resolution")]
    pub resolution: f64,
    #[serde(default)]
    pub cell: CellMethod,
    /// Fourier grid per axis for spectral correctors.
    #[serde(default = "cell_grid")]
    pub cell_grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Largest allowed node count of any mesh in the sweep.
    #[serde(default = "max_unknowns")]
    pub max_unknowns: usize,
    #[serde(default = "seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    /// Constant source for the second-order source problem.
    #[serde(default = "one_f")]
    pub source: f64,
    /// Exponent `p` of the remainder in the empirical fit `λ̄ = λ₀ + θε + rε^p`.
    #[serde(default = "remainder_exponent")]
    pub remainder_exponent: f64,
    /// Random vectors per projection-law check.
    #[serde(default = "samples")]
    pub samples: usize,
    #[serde(default)]
    pub expect: Expectation,
    /// Write nodal fields of the finest level under `fields/`.
    #[serde(default)]
    pub fields: bool,
    pub oracle: Option<OracleSpec>,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn dirichlet() -> Bc {
    Bc::Dirichlet
}
fn resolution() -> f64 {
    8.0
}
fn cell_grid() -> usize {
    64
}
fn max_unknowns() -> usize {
    600_000
}
fn seed() -> u64 {
    7
}
fn remainder_exponent() -> f64 {
    1.25
}
fn samples() -> usize {
    20
}
fn eigen_tol() -> f64 {
    1e-10
}
fn cell_tol() -> f64 {
    1e-11
}
fn trivial_tol() -> f64 {
    1e-8
}
fn fit_tol() -> f64 {
    0.5
}

/// Which pipeline a configuration is validated for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Correctors,
    Oracle1d,
    SweepDirichlet,
    SweepNeumann,
    Gradient,
    H1,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn field(&self) -> Result<CoefficientField, HarnessError> {
        make_family(&self.coefficient.family, &self.coefficient.params).map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Lattice intervals per period implied by the resolution.
    pub fn cells_per_period(&self) -> usize {
        cells_per_period(self.resolution)
    }

    /// Node estimate `area / s²` for the lattice spacing `s = ε / n_c`.
    pub fn estimated_unknowns(&self, eps: f64) -> usize {
        let s = eps / self.cells_per_period() as f64;
        (self.domain.area() / (s * s)).ceil() as usize
    }

    pub fn validate(&self, purpose: Purpose) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        let field = self.field()?;
        if !self.domain.is_valid() {
            return bad(format!("invalid domain {:?}", self.domain));
        }
        if !(self.resolution >= 8.0) {
            return bad(format!("resolution {} below 8 edges per period", self.resolution));
        }
        if self.cell_grid < 8 || !self.cell_grid.is_power_of_two() {
            return bad(format!("cell_grid {} must be a power of two >= 8", self.cell_grid));
        }
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        match purpose {
            Purpose::Correctors => Ok(()),
            Purpose::Oracle1d => {
                let Some(o) = &self.oracle else {
                    return bad("missing [oracle] table".into());
                };
                if o.periods.len() < 3 || o.periods.windows(2).any(|w| w[1] <= w[0]) || o.periods[0] == 0 {
                    return bad("oracle periods must be at least 3 strictly increasing positive integers".into());
                }
                if o.mode == 0 {
                    return bad("oracle mode must be positive".into());
                }
                if self.coefficient.family != "trig1d" {
                    return bad("the 1D oracle needs the trig1d family".into());
                }
                Ok(())
            }
            _ => {
                if field.dim() != 2 {
                    return bad(format!("sweeps need a two-dimensional coefficient, got {}", field.name()));
                }
                let min_levels = if purpose == Purpose::SweepNeumann { 4 } else { 3 };
                if self.eps.len() < min_levels {
                    return bad(format!("need at least {min_levels} eps values, got {}", self.eps.len()));
                }
                if self.eps.iter().any(|e| !(*e > 0.0)) || self.eps.windows(2).any(|w| !(w[1] < w[0])) {
                    return bad(format!("eps list must be positive and strictly decreasing: {:?}", self.eps));
                }
                for &e in &self.eps {
                    let n = self.estimated_unknowns(e);
                    if n > self.max_unknowns {
                        return bad(format!("eps = {e} needs about {n} nodes, above max_unknowns = {}", self.max_unknowns));
                    }
                    if e > self.domain.min_radius() / 2.0 {
                        return bad(format!("eps = {e} too large for the domain"));
                    }
                }
                let expected_bc = match purpose {
                    Purpose::SweepNeumann => Bc::Neumann,
                    _ => Bc::Dirichlet,
                };
                if purpose != Purpose::H1 && self.bc != expected_bc {
                    return bad(format!("bc = {:?} does not match this sweep", self.bc));
                }
                if purpose == Purpose::H1 {
                    return Ok(());
                }
                let Some(t) = self.target else {
                    return bad("missing [target] table".into());
                };
                if !(t.lambda > 0.0) || !(t.window > 0.0) || t.multiplicity == 0 {
                    return bad(format!("invalid target {t:?}"));
                }
                if purpose == Purpose::Gradient && t.multiplicity != 1 {
                    return bad("the weighted gradient residual needs multiplicity 1".into());
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
name = "t"
coefficient = { family = "trig2d", params = [1.0] }
eps = [0.125, 0.0625, 0.03125]
target = { lambda = 11.2, window = 2.0 }
"#;

    #[test]
    fn defaults_and_roundtrip() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.domain, Domain::unit_disk());
        assert_eq!(c.bc, Bc::Dirichlet);
        assert_eq!(c.target.unwrap().multiplicity, 1);
        assert_eq!(c.cell, CellMethod::Lattice);
        c.validate(Purpose::SweepDirichlet).unwrap();
        let again = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{BASE}\nbogus = 1\n")).is_err());
        let t = BASE.replace("window = 2.0", "window = 2.0, extra = 3");
        assert!(ExperimentConfig::from_toml(&t).is_err());
    }

    #[test]
    fn validation_rules() {
        let mut c = ExperimentConfig::from_toml(BASE).unwrap();
        c.eps = vec![0.125, 0.125, 0.0625];
        assert!(c.validate(Purpose::SweepDirichlet).is_err());
        c.eps = vec![0.125, 0.0625, 0.03125];
        assert!(c.validate(Purpose::SweepNeumann).is_err());
        c.max_unknowns = 1000;
        assert!(c.validate(Purpose::SweepDirichlet).is_err());
        c.max_unknowns = 600_000;
        c.resolution = 4.0;
        assert!(c.validate(Purpose::SweepDirichlet).is_err());
        c.resolution = 8.0;
        c.target = Some(TargetSpec { lambda: 14.7, window: 1.0, multiplicity: 2 });
        assert!(c.validate(Purpose::Gradient).is_err());
        c.coefficient.family = "nope".into();
        assert!(c.validate(Purpose::SweepDirichlet).is_err());
    }

    #[test]
    fn budget_estimate_tracks_eps_squared() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        let r = c.estimated_unknowns(0.0625) as f64 / c.estimated_unknowns(0.125) as f64;
        assert!((r - 4.0).abs() < 0.01);
    }
}
