//! `nlsgraph`: bound states of the supercritical NLS equation on metric
//! graphs from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "nlsgraph", version, about = "Mass-constrained NLS bound states on metric graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the solver subcommands.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Graph description file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Nonlinearity exponent, must exceed 6.
    #[arg(long, default_value_t = 8.0)]
    pub p: f64,
    /// Prescribed mass. Defaults depend on the subcommand.
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub rho: f64,
    /// Mesh spacing target; defaults to the shortest edge over 64.
    #[arg(long)]
    pub h: Option<f64>,
    /// Solver tolerance; each subcommand has its own default.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for CSVs and the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Lowest Kirchhoff eigenpairs.
    Eig {
        #[command(flatten)]
        common: Common,
        /// Number of eigenpairs, the zero mode included.
        #[arg(long, default_value_t = 6)]
        k: usize,
    },
    /// Mass threshold below which the constant state is a local minimizer.
    Threshold {
        #[command(flatten)]
        common: Common,
    },
    /// The constant state of the given mass.
    SolveConstant {
        #[command(flatten)]
        common: Common,
    },
    /// Normalized gradient flow from the constant state kicked along the
    /// second eigenfunction.
    Minimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1e-2)]
        kick: f64,
        #[arg(long, default_value_t = 20_000)]
        max_iters: usize,
    },
    /// Mountain-pass solution; the mass defaults to half the threshold.
    MountainPass {
        #[command(flatten)]
        common: Common,
    },
    /// Continuation in ρ or μ, written as a trace directory.
    Continue {
        #[command(flatten)]
        common: Common,
        /// `rho:FROM:TO:STEP`, `mu:HALVINGS` or `descent:HALVINGS`.
        #[arg(long)]
        schedule: String,
        /// Skip Morse indices along the trace.
        #[arg(long)]
        no_morse: bool,
    },
    /// Blow-up diagnostics for every state of a trace directory.
    Blowup {
        /// Trace directory written by `continue`.
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Window radius in units of `λ^{−1/2}`.
        #[arg(long, default_value_t = 15.0)]
        window: f64,
        /// Interior/vertex regime cutoff on `dist(P, V)·λ^{1/2}`.
        #[arg(long, default_value_t = 10.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 2.0)]
        c1: f64,
        #[arg(long, default_value_t = 0.25)]
        c2: f64,
    },
    /// Checks a function CSV against the equation and the identities.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Function CSV (`edge,s,value`).
        #[arg(long)]
        state: PathBuf,
        /// Multiplier; defaults to the best-fit value.
        #[arg(long)]
        lambda: Option<f64>,
    },
}

/// Failure classes, mapped to exit codes 2 and 1.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Solver(String),
}

impl From<nlsgraph::Error> for CliError {
    fn from(e: nlsgraph::Error) -> Self {
        use nlsgraph::Error::*;
        match e {
            DisconnectedGraph { .. }
            | NonPositiveLength { .. }
            | DanglingVertexReference { .. }
            | InvalidParameter(_)
            | Parse { .. }
            | ConflictingVertexValues { .. }
            | InvalidCoordinate(_)
            | MassMismatch { .. }
            | Dimension(_) => CliError::Config(e.to_string()),
            _ => CliError::Solver(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Solver(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
