use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Verification harness for the nested-strip construction.
///
/// Exit status: 0 when every check passes, 1 on usage or input errors,
/// 2 when a check fails.
#[derive(Debug, Parser)]
#[command(name = "unrect", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Strip schedule (JSON).
    #[arg(long, global = true, env = "UNRECT_SCHEDULE")]
    pub schedule: Option<PathBuf>,
    /// Truncation depth; defaults to every stage of the schedule.
    #[arg(long, global = true, env = "UNRECT_DEPTH")]
    pub depth: Option<usize>,
    /// Grid resolution per axis.
    #[arg(long, global = true, env = "UNRECT_GRID", default_value_t = 16)]
    pub grid: usize,
    /// Number of equally spaced detector directions (strip directions are
    /// always added).
    #[arg(long, global = true, env = "UNRECT_DIRS", default_value_t = 16)]
    pub dirs: usize,
    /// Smallest chord length used by the detectors.
    #[arg(long, global = true, env = "UNRECT_EPS_FLOOR", default_value_t = 1e-3)]
    pub eps_floor: f64,
    /// Output file (directory for martingale-report); stdout when absent.
    #[arg(long, global = true, env = "UNRECT_OUT")]
    pub out: Option<PathBuf>,
    /// Worker threads; 0 picks one per core.
    #[arg(long, global = true, env = "UNRECT_JOBS", default_value_t = 0)]
    pub jobs: usize,
    #[arg(long, global = true, env = "UNRECT_SEED", default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a schedule and write it back with its certificate.
    Validate,
    /// Generate a schedule, validate it and write it out.
    Build {
        #[arg(long, env = "UNRECT_ETA", default_value_t = 0.04)]
        eta: f64,
        #[arg(long, env = "UNRECT_EPS0", default_value_t = 4.0)]
        eps0: f64,
    },
    /// Membership proxies and detector values on a grid.
    NondiffMap {
        /// Level threshold for the candidate flag.
        #[arg(long, default_value_t = 1)]
        min_level: u32,
        /// Also write the chord witnesses of every grid point here (JSON).
        #[arg(long)]
        witnesses: Option<PathBuf>,
    },
    /// Geometry, filtration and martingale checks for a batch of curves.
    CurveReport {
        #[command(flatten)]
        curves: CurveArgs,
    },
    /// Slope-ratio process and its checks, two CSV files per curve.
    MartingaleReport {
        #[command(flatten)]
        curves: CurveArgs,
    },
    /// Random strip witnesses for the stage functions and the partial sum.
    Witness {
        /// Samples per stage.
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Values, gradients, signs and levels at the grid cell centres.
    EvalGrid,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    /// Curve files: one curve spec or an array of them per file. The
    /// built-in suite is used when none are given.
    pub curves: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Atoms::LevelSet)]
    pub atoms: Atoms,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Atoms {
    /// Atoms are whole level sets of the strip counters.
    LevelSet,
    /// Atoms are maximal parameter intervals.
    Interval,
}
