use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use unrect::construction::{validate_schedule, Construction, ConstructionError, StripSchedule};
use unrect::curves::{Curve, CurveSpec, PRECONDITION_GRID};
use unrect::Window;

use crate::cli::GlobalArgs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags or unreadable input.
    #[error("{0}")]
    Usage(String),
    /// Input was fine but a check did not pass.
    #[error("{0}")]
    Failed(String),
}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    CliError::Usage(msg.into()).into()
}

pub fn failed(msg: impl Into<String>) -> anyhow::Error {
    CliError::Failed(msg.into()).into()
}

/// Largest tolerated deviation from unit speed for ingested curves.
pub const UNIT_SPEED_TOL: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub schedule: Option<PathBuf>,
    pub depth: Option<usize>,
    pub window: Window,
    pub grid: usize,
    pub dirs: usize,
    pub eps_floor: f64,
    pub out: Option<PathBuf>,
    pub jobs: usize,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_args(g: &GlobalArgs) -> anyhow::Result<Self> {
        if g.grid < 2 {
            return Err(usage(format!("--grid must be at least 2, got {}", g.grid)));
        }
        if g.dirs < 8 {
            return Err(usage(format!("--dirs must be at least 8, got {}", g.dirs)));
        }
        if !(g.eps_floor > 0.0 && g.eps_floor.is_finite()) {
            return Err(usage("--eps-floor must be positive"));
        }
        Ok(RunConfig {
            schedule: g.schedule.clone(),
            depth: g.depth,
            window: Window::unit(),
            grid: g.grid,
            dirs: g.dirs,
            eps_floor: g.eps_floor,
            out: g.out.clone(),
            jobs: g.jobs,
            seed: g.seed,
        })
    }

    /// Parse the schedule and cut it to `--depth`. Certificates on disk are
    /// dropped; they are always recomputed.
    pub fn load_schedule(&mut self) -> anyhow::Result<StripSchedule> {
        let path = self.schedule.as_ref().ok_or_else(|| usage("--schedule is required"))?;
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let s = StripSchedule::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        self.window = s.window;
        match self.depth {
            Some(d) => s.truncated(d).map_err(|e| usage(e.to_string())),
            None => Ok(StripSchedule { certificate: None, ..s }),
        }
    }

    /// Build and validate the schedule; commands that assume a valid
    /// construction fail with exit 2 otherwise.
    pub fn construction(&mut self) -> anyhow::Result<Construction> {
        let s = self.load_schedule()?;
        let (c, cert) = validate_schedule(&s).map_err(construction_error)?;
        let cert = cert.certificate.expect("validator attaches a certificate");
        if !cert.valid {
            let v = &cert.violations[0];
            return Err(failed(format!(
                "schedule is not valid: {} violation(s), first at condition ({}) index {}",
                cert.violations.len(),
                v.condition,
                v.index
            )));
        }
        Ok(c)
    }

    pub fn depth_of(&self, c: &Construction) -> usize {
        self.depth.unwrap_or(c.depth()).min(c.depth())
    }

    pub fn init_pool(&self) -> anyhow::Result<()> {
        if self.jobs > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(self.jobs)
                .build_global()
                .context("starting the worker pool")?;
        }
        Ok(())
    }

    /// Write `bytes` to `--out`, or to stdout.
    pub fn emit(&self, bytes: &[u8]) -> anyhow::Result<()> {
        match &self.out {
            Some(p) => write_file(p, bytes),
            None => {
                let mut out = io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(())
            }
        }
    }
}

pub fn write_file(p: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    fs::write(p, bytes).with_context(|| format!("writing {}", p.display()))
}

/// Generation and build errors are check failures; schedule shape errors
/// are input errors.
pub fn construction_error(e: ConstructionError) -> anyhow::Error {
    match e {
        ConstructionError::Schedule(_) | ConstructionError::Depth { .. } => usage(e.to_string()),
        _ => failed(e.to_string()),
    }
}

/// Curves from files: each holds one spec or an array of specs.
pub fn load_curves(paths: &[PathBuf]) -> anyhow::Result<Vec<Curve>> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(CurveSpec),
        Many(Vec<CurveSpec>),
    }
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
        let specs = match serde_json::from_str::<OneOrMany>(&text) {
            Ok(OneOrMany::One(s)) => vec![s],
            Ok(OneOrMany::Many(v)) => v,
            Err(e) => return Err(usage(format!("{}: not a curve spec: {e}", p.display()))),
        };
        for s in specs {
            let curve = Curve::from_spec(&s).map_err(|e| usage(format!("{}: curve {}: {e}", p.display(), s.name)))?;
            ingest(&curve)?;
            out.push(curve);
        }
    }
    Ok(out)
}

pub fn ingest(curve: &Curve) -> anyhow::Result<()> {
    let d = curve.unit_speed_defect(PRECONDITION_GRID);
    if d > UNIT_SPEED_TOL {
        return Err(usage(format!(
            "curve {}: unit-speed defect {d:e} exceeds {UNIT_SPEED_TOL:e}",
            curve.name()
        )));
    }
    Ok(())
}
