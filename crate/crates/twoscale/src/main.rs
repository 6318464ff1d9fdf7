use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ::twoscale::harness::{run_command, Command, ExpansionReport, Status};

#[derive(Parser)]
#[command(name = "twoscale", version, about = "Two-scale expansion experiments for periodic eigenproblems")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Io {
    /// Experiment config (TOML); for `report`, a suite file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Cell correctors, homogenized tensor and its bounds.
    Correctors(Io),
    /// One-dimensional closed-form oracle suite.
    Oracle1d(Io),
    /// Dirichlet eigenvalue and eigenfunction sweep.
    SweepDirichlet(Io),
    /// Neumann eigenvalue sweep.
    SweepNeumann(Io),
    /// Distance-weighted gradient residual sweep.
    Gradient(Io),
    /// H1 residual of the second-order source expansion.
    H1(Io),
    /// Runs a suite of experiments.
    Report(Io),
}

fn print_checks(rep: &ExpansionReport) {
    for c in &rep.checks {
        let tag = match c.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Recorded => "RECORDED",
        };
        println!("{tag:>12}  {}: {}", c.name, c.detail);
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, io) = match cli.command {
        Cmd::Correctors(io) => (Command::Correctors, io),
        Cmd::Oracle1d(io) => (Command::Oracle1d, io),
        Cmd::SweepDirichlet(io) => (Command::SweepDirichlet, io),
        Cmd::SweepNeumann(io) => (Command::SweepNeumann, io),
        Cmd::Gradient(io) => (Command::Gradient, io),
        Cmd::H1(io) => (Command::H1, io),
        Cmd::Report(io) => (Command::Report, io),
    };
    match run_command(command, &io.config, &io.out) {
        Ok(rep) => {
            print_checks(&rep);
            println!("wrote {}", io.out.display());
            ExitCode::from(rep.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
