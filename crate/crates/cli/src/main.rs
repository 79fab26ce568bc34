//! `surfhodge` command-line driver.
//!
//! Exit codes: 0 success, 2 input error, 3 algorithmic failure, 4 solver
//! failure.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use surfhodge::Error;

#[derive(Parser)]
#[command(name = "surfhodge", version, about = "Hodge decomposition and pressure-free flow solvers on triangulated surfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Surface mesh (.off or .obj); overrides `mesh` from the config.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Polynomial degree of BDM^k.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Harmonic basis drop tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Directory for output files and manifest.json.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Counts and Betti numbers of a mesh.
    Topology {
        #[command(flatten)]
        common: Common,
    },
    /// Builds an orthonormal basis of the discrete harmonic fields.
    Harmonic {
        #[command(flatten)]
        common: Common,
    },
    /// Splits a BDM field into rot, harmonic and gradient parts.
    Decompose {
        #[command(flatten)]
        common: Common,
        /// `random` or three expressions `fx; fy; fz` over x, y, z.
        #[arg(long, conflicts_with = "psi", allow_hyphen_values = true)]
        field: Option<String>,
        /// Use the rot of this stream function expression as input.
        #[arg(long, allow_hyphen_values = true)]
        psi: Option<String>,
        /// Stored harmonic basis to use instead of building one.
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Stationary Stokes solve in streamfunction form.
    Stokes {
        #[command(flatten)]
        common: Common,
        /// Also solve the velocity-pressure system and report the difference.
        #[arg(long)]
        compare_saddle: bool,
    },
    /// Time-dependent Navier–Stokes run.
    Nse {
        #[command(flatten)]
        common: Common,
    },
    /// Dimension and invariant checks on a mesh or a directory of meshes.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::MaxAttemptsExceeded { .. } | Error::NotDivergenceFree(_) | Error::NanDetected(_) => 3,
        Error::SingularMatrix | Error::NotSpd | Error::SolverFailure(_) | Error::SingularSchur | Error::SingularOperator(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let r = match cli.command {
        Command::Topology { common } => commands::topology(&common),
        Command::Harmonic { common } => commands::harmonic(&common),
        Command::Decompose { common, field, psi, basis } => commands::decompose(&common, field.as_deref(), psi.as_deref(), basis.as_deref()),
        Command::Stokes { common, compare_saddle } => commands::stokes(&common, compare_saddle),
        Command::Nse { common } => commands::nse(&common),
        Command::Verify { common } => commands::verify(&common),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
