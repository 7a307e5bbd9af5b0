mod curves;
mod grid;
mod schedule;
mod witness;

use crate::cli::{Cli, Command};
use crate::config::RunConfig;

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = RunConfig::from_args(&cli.global)?;
    cfg.init_pool()?;
    match &cli.command {
        Command::Validate => schedule::validate(&mut cfg),
        Command::Build { eta, eps0 } => schedule::build(&cfg, *eta, *eps0),
        Command::NondiffMap { min_level, witnesses } => grid::nondiff_map(&mut cfg, *min_level, witnesses.as_deref()),
        Command::CurveReport { curves } => curves::curve_report(&mut cfg, curves),
        Command::MartingaleReport { curves } => curves::martingale_report(&mut cfg, curves),
        Command::Witness { samples } => witness::witness(&mut cfg, *samples),
        Command::EvalGrid => grid::eval_grid(&mut cfg),
    }
}
