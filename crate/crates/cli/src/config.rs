use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

/// Largest `--max-depth` accepted.
pub const HARD_DEPTH_CAP: u32 = 40;

const AFTER_HELP: &str = "\
Every option can also be set through an environment variable named
HOMTREE_<OPTION> (for example HOMTREE_Q, HOMTREE_ALPHA, HOMTREE_SEED).
Command-line flags take precedence over the environment.

Exit codes:
  0  success
  1  a verified inequality or invariant was violated
  2  usage error
  3  malformed input document
  4  precondition failure (for example lambda at or below ||f||_1 / mu(X))
  5  file input/output error";

#[derive(Debug, Parser)]
#[command(name = "homtree", version, about = "Harmonic analysis on homogeneous trees", after_help = AFTER_HELP)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalArgs {
    /// Branching number; each vertex has q + 1 neighbours. Defaults to the
    /// input document's value, else 2.
    #[arg(long, global = true, env = "HOMTREE_Q")]
    pub q: Option<u32>,

    /// Measure exponent, mu(x) = q^(-alpha |x|). Defaults to the input
    /// document's value, else 2.
    #[arg(long, global = true, env = "HOMTREE_ALPHA")]
    pub alpha: Option<f64>,

    /// Largest depth any computation may index.
    #[arg(long, global = true, env = "HOMTREE_MAX_DEPTH", default_value_t = 16)]
    pub max_depth: u32,

    #[arg(long, global = true, env = "HOMTREE_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Write the report here instead of standard output.
    #[arg(long, short, global = true, env = "HOMTREE_OUTPUT")]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, env = "HOMTREE_FORMAT", value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Add a wall-clock timestamp to JSON reports.
    #[arg(long, global = true, env = "HOMTREE_TIMESTAMP")]
    pub timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Random samples per suite or sweep cell.
    #[arg(long, env = "HOMTREE_SAMPLES")]
    pub samples: Option<usize>,

    /// Good-lambda levels, as multiples of ||f||_1 / mu(X).
    #[arg(long, env = "HOMTREE_LAMBDAS", value_delimiter = ',')]
    pub lambdas: Option<Vec<f64>>,

    #[arg(long, env = "HOMTREE_GAMMAS", value_delimiter = ',')]
    pub gammas: Option<Vec<f64>>,

    /// Exponents for the Fefferman-Stein and L^p checks.
    #[arg(long, env = "HOMTREE_PS", value_delimiter = ',')]
    pub ps: Option<Vec<f64>>,

    /// Exponents for the BMO inboxing check.
    #[arg(long, env = "HOMTREE_RS", value_delimiter = ',')]
    pub rs: Option<Vec<f64>>,

    /// Number of radii in the doubling grid.
    #[arg(long, env = "HOMTREE_RADII")]
    pub radii: Option<usize>,

    /// Largest boundary depth of sampled functions.
    #[arg(long, env = "HOMTREE_FUNCTION_DEPTH")]
    pub function_depth: Option<u32>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Total mass, doubling constants and the I_m table up to --max-depth.
    Info,
    /// Calderon-Zygmund decomposition of a function at level --lambda.
    Cz {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        lambda: f64,
    },
    /// Dyadic Hardy-Littlewood maximal function.
    Maximal {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Dyadic sharp maximal function.
    Sharp {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// BMO_r norm and mean oscillation.
    Bmo {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
    },
    /// Martingale atomic decomposition into (1, inf)-atoms.
    Atoms {
        #[arg(long, short)]
        input: PathBuf,
    },
    /// Pairing of a function with an atom, against the BMO_{p'} bound.
    Pairing {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long)]
        atom: PathBuf,
    },
    /// Hormander constant of a kernel, with a witness.
    Hormander {
        #[arg(long, short)]
        kernel: PathBuf,
    },
    /// Apply the integral operator of a kernel to a function.
    Apply {
        #[arg(long, short)]
        kernel: PathBuf,
        #[arg(long, short)]
        input: PathBuf,
    },
    /// L^2 operator norm by power iteration.
    Opnorm {
        #[arg(long, short)]
        kernel: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iterations: usize,
    },
    /// Empirical H^1 -> L^1 and L^p behaviour of a kernel (a probe, not a proof).
    Probe {
        #[arg(long, short)]
        kernel: PathBuf,
        /// Report-only constant c in c (||K||_2 + H).
        #[arg(long, default_value_t = 1.0)]
        reference_constant: f64,
        /// Relative excess over the reference flagged by the L^p sweep.
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Run a verification suite; exits with 1 on any violation.
    Verify {
        /// geometry, doubling, dyadic, weak11, czd, goodlambda,
        /// feffermanstein, inboxing, duality, supS, atoms, operators,
        /// reference, or all.
        #[arg(long, env = "HOMTREE_SUITE")]
        suite: String,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Weak (1,1), good-lambda and Fefferman-Stein quotients over a grid.
    ///
    /// CSV columns: q, alpha, sample, check (weak11 | goodlambda |
    /// feffermanstein), lambda, gamma, p, value, bound, holds. For weak11
    /// value is mu(Mf > lambda) and bound ||f||_1 / lambda; for goodlambda
    /// value is mu(Mf > 2 lambda, M#f < gamma lambda) and bound
    /// C gamma mu(Mf > lambda); for feffermanstein value is
    /// ||f||_p / ||M#f||_p and bound N_p. Unused parameters are empty.
    Sweep {
        #[arg(long = "qs", env = "HOMTREE_QS", value_delimiter = ',', default_value = "2,3")]
        qs: Vec<u32>,
        #[arg(long = "alphas", env = "HOMTREE_ALPHAS", value_delimiter = ',', default_value = "1.5,2,3")]
        alphas: Vec<f64>,
        #[command(flatten)]
        grid: GridArgs,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Info => "info",
            Command::Cz { .. } => "cz",
            Command::Maximal { .. } => "maximal",
            Command::Sharp { .. } => "sharp",
            Command::Bmo { .. } => "bmo",
            Command::Atoms { .. } => "atoms",
            Command::Pairing { .. } => "pairing",
            Command::Hormander { .. } => "hormander",
            Command::Apply { .. } => "apply",
            Command::Opnorm { .. } => "opnorm",
            Command::Probe { .. } => "probe",
            Command::Verify { .. } => "verify",
            Command::Sweep { .. } => "sweep",
        }
    }
}

/// The configuration a report was produced with.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub q: u32,
    pub alpha: f64,
    pub max_depth: u32,
    pub seed: u64,
    pub format: Format,
    pub inputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<serde_json::Value>,
}
