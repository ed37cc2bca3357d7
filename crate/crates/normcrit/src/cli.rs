//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "normcrit", version, about = "Normalized solutions of Sobolev-critical coupled Schrödinger systems")]
pub struct Cli {
    /// Worker threads for independent solves; NORMCRIT_JOBS takes precedence.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON run configuration; built-in defaults when absent.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form constants of the local-minimum geometry.
    Constants(Common),
    /// Local minimizer inside the kinetic ball.
    SolveMin {
        #[command(flatten)]
        common: Common,
        /// CSV dump of the fields (r,u,v).
        #[arg(long)]
        fields: Option<PathBuf>,
    },
    /// Mountain-pass solution starting from a saved local minimizer.
    SolveMp {
        #[command(flatten)]
        common: Common,
        /// Result document written by solve-min.
        #[arg(long)]
        min: PathBuf,
        #[arg(long)]
        fields: Option<PathBuf>,
        /// CSV of the deformed path levels (index,level).
        #[arg(long)]
        path: Option<PathBuf>,
    },
    /// Truncated-bubble test functions H_n against the level bound.
    LevelBound {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        min: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "4,16,64,256,1024,4096")]
        n: Vec<f64>,
        /// Prefix for per-n curves written as <prefix>_n<n>.csv with columns t,H.
        #[arg(long)]
        curves: Option<PathBuf>,
    },
    /// Expansion orders of the truncated-bubble norms.
    BubbleOrders {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64")]
        n: Vec<f64>,
    },
    /// ν → 0 sweep of minimizers and mountain-pass solutions; --out is the CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Full JSON records; defaults to the CSV path with a .json extension.
        #[arg(long)]
        records: Option<PathBuf>,
    },
    /// Numerical Gagliardo–Nirenberg constant for the configured exponents.
    GnEstimate(Common),
}
