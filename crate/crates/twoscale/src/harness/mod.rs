//! Experiment orchestration: ε-sweeps, expansion residuals, rate fits and
//! reports.

mod config;
mod dirichlet;
mod gradient;
mod h1;
mod neumann;
mod oracle;
mod rate;
mod report;
mod suite;

use std::path::Path;
use std::time::Instant;

use thiserror::Error;

use crate::cell::CellError;
use crate::coeff::CoefficientField;
use crate::fem::{
    assemble, mesh_periodic, AssembleOptions, Bc, CellCorrectors, CoefSource, DiscreteSystem, FemError, LatticeCell, Mesh,
    NodalCorrectors, SpectralCorrectors,
};
use crate::layers::LayerError;
use crate::oracle1d::OracleError;
use crate::spectral::{eigen_cluster, ClusterOptions, EigenCluster, SpectralError};

pub use config::{CellMethod, CoefficientSpec, Expectation, ExperimentConfig, OracleSpec, Purpose, TargetSpec, Tolerances};
pub use dirichlet::sweep_dirichlet;
pub use gradient::{delta_weights, weighted_gradient_residual};
pub use h1::h1_sweep;
pub use neumann::sweep_neumann;
pub use oracle::{correctors_report, oracle1d_report};
pub use rate::{exit_code, rate_fit, theta_fit, Check, RateFit, Status, ThetaFit};
pub use report::{ExpansionReport, Row, ThetaReport, CSV_COLUMNS};
pub use suite::{run_suite, SuiteConfig, SuiteRun};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("rate fit needs at least 3 usable points, got {0}")]
    Fit(usize),
    #[error("eps = {eps}: mesh has {nodes} nodes, above max_unknowns = {max}")]
    Budget { eps: f64, nodes: usize, max: usize },
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Layer(#[from] LayerError),
    #[error(transparent)]
    Cell(#[from] CellError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// 4 for configuration and budget problems, 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Budget { .. } => 4,
            _ => 1,
        }
    }
}

/// CLI subcommands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Correctors,
    Oracle1d,
    SweepDirichlet,
    SweepNeumann,
    Gradient,
    H1,
    Report,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Correctors => "correctors",
            Command::Oracle1d => "oracle1d",
            Command::SweepDirichlet => "sweep-dirichlet",
            Command::SweepNeumann => "sweep-neumann",
            Command::Gradient => "gradient",
            Command::H1 => "h1",
            Command::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Command::Correctors,
            Command::Oracle1d,
            Command::SweepDirichlet,
            Command::SweepNeumann,
            Command::Gradient,
            Command::H1,
            Command::Report,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

/// Runs one experiment command on a parsed configuration.
pub fn run_experiment(command: Command, cfg: &ExperimentConfig) -> Result<ExpansionReport, HarnessError> {
    let start = Instant::now();
    let mut rep = match command {
        Command::Correctors => correctors_report(cfg)?,
        Command::Oracle1d => oracle1d_report(cfg)?,
        Command::SweepDirichlet => sweep_dirichlet(cfg, false)?,
        Command::Gradient => sweep_dirichlet(cfg, true)?,
        Command::SweepNeumann => sweep_neumann(cfg)?,
        Command::H1 => h1_sweep(cfg)?,
        Command::Report => return Err(HarnessError::Config("`report` takes a suite file".into())),
    };
    rep.config = serde_json::to_value(cfg).unwrap_or_default();
    rep.wall_seconds = start.elapsed().as_secs_f64();
    Ok(rep)
}

/// Reads the configuration at `path`, runs `command` and writes the outputs
/// into `out`.
pub fn run_command(command: Command, path: &Path, out: &Path) -> Result<ExpansionReport, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let rep = if command == Command::Report {
        run_suite(&SuiteConfig::from_toml(&text)?, path.parent().unwrap_or(Path::new(".")), out)?
    } else {
        run_experiment(command, &ExperimentConfig::from_toml(&text)?)?
    };
    rep.write(out)?;
    Ok(rep)
}

/// Applies `f` to every item on up to `workers` threads; results keep item order.
pub(crate) fn par_map<T: Sync, R: Send>(workers: usize, items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    let f = &f;
    let mut slots: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers.min(items.len()))
            .map(|w| {
                s.spawn(move || {
                    (w..items.len())
                        .step_by(workers)
                        .map(|i| (i, f(&items[i])))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every slot filled")).collect()
}

/// Cell correctors selected by the configuration.
pub(crate) fn cell_correctors(cfg: &ExperimentConfig, field: &CoefficientField) -> Result<Box<dyn CellCorrectors>, HarnessError> {
    Ok(match cfg.cell {
        CellMethod::Lattice => Box::new(LatticeCell::compute(field, cfg.cells_per_period(), AssembleOptions::default().quad_order)?),
        CellMethod::Spectral => {
            let set = crate::cell::CorrectorSet::compute(field, cfg.cell_grid, cfg.tolerances.cell)?;
            Box::new(SpectralCorrectors::new(&set))
        }
    })
}

/// Mesh, oscillating and homogenized systems, and nodal correctors at one ε.
pub(crate) struct Level {
    pub eps: f64,
    pub mesh: Mesh,
    pub sys_eps: DiscreteSystem,
    pub sys0: DiscreteSystem,
    pub nodal: NodalCorrectors,
}

pub(crate) fn build_level(
    cfg: &ExperimentConfig,
    field: &CoefficientField,
    cell: &dyn CellCorrectors,
    eps: f64,
    bc: Bc,
) -> Result<Level, HarnessError> {
    let (mesh, _) = mesh_periodic(&cfg.domain, eps, cfg.resolution)?;
    if mesh.n_nodes() > cfg.max_unknowns {
        return Err(HarnessError::Budget {
            eps,
            nodes: mesh.n_nodes(),
            max: cfg.max_unknowns,
        });
    }
    let opts = AssembleOptions {
        resolution: cfg.resolution,
        ..AssembleOptions::default()
    };
    let sys_eps = assemble(&mesh, CoefSource::Oscillating { field, eps }, bc, opts)?;
    let sys0 = assemble(&mesh, CoefSource::Constant(cell.a_hat()), bc, opts)?;
    let nodal = NodalCorrectors::new(&mesh, cell, eps);
    Ok(Level {
        eps,
        mesh,
        sys_eps,
        sys0,
        nodal,
    })
}

pub(crate) fn cluster(cfg: &ExperimentConfig, sys: &DiscreteSystem) -> Result<EigenCluster, HarnessError> {
    let t = cfg.target.ok_or_else(|| HarnessError::Config("missing [target] table".into()))?;
    let opts = ClusterOptions {
        window: t.window,
        tol: cfg.tolerances.eigen,
        seed: cfg.seed,
        ..ClusterOptions::default()
    };
    Ok(eigen_cluster(sys, t.lambda, t.multiplicity, opts)?)
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `a + s·b` in place.
pub(crate) fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    a.iter_mut().zip(b).for_each(|(x, y)| *x += s * y);
}
