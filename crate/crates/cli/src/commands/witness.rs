use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use unrect::construction::Construction;
use unrect::detectors::{admissible_direction, nondiff_witness_h, nondiff_witness_phi, DetectorError, WitnessRow};
use unrect::real::real;
use unrect::report::{fmt_f64, CheckRow};
use unrect::{UnitVector, Vec2};

use crate::config::{failed, RunConfig};

/// Attempts per requested sample before a stage is reported short.
const TRIES: usize = 50;

/// Admissible `(z, v)` pairs in strip `k`, unguarded, drawn in order so the
/// set depends on the seed only.
fn sample_stage(c: &Construction, k: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec2, UnitVector)> {
    let st = c.stage(k);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n * TRIES {
        if out.len() == n {
            break;
        }
        let t: f64 = rng.gen_range(0.02..0.98);
        let off: f64 = rng.gen_range(-0.95..0.95);
        let ang: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let Some(z) = c.strip_point(k, t, off) else { continue };
        let v = UnitVector::from_angle(ang);
        if !st.strip.contains(z) || st.guarded(z) || !admissible_direction(c, v) {
            continue;
        }
        out.push((z, v));
    }
    out
}

struct Outcome {
    rows: Vec<WitnessRow>,
    failures: Vec<CheckRow>,
    skipped: usize,
}

fn evaluate(c: &Construction, depth: usize, eps: f64, k: usize, z: Vec2, v: UnitVector) -> Outcome {
    let mut o = Outcome {
        rows: Vec::new(),
        failures: Vec::new(),
        skipped: 0,
    };
    match nondiff_witness_phi(c, k, z, v) {
        Ok(w) => {
            o.failures.extend(w.checks.into_iter().filter(|r| !r.pass));
            o.rows.push(w.witness.row(&format!("phi_{k}"), k));
        }
        Err(_) => o.skipped += 1,
    }
    if 2 * k >= depth {
        match nondiff_witness_h(c, z, depth, None, v, real(eps)) {
            Ok(w) => {
                o.failures.extend(w.checks().into_iter().filter(|r| !r.pass));
                o.rows.push(w.witness.row("h", depth));
            }
            // no usable tail stage at this point; not a failure
            Err(DetectorError::NoStage(_) | DetectorError::Guarded(_) | DetectorError::OutsideStrip(_)) => {
                o.skipped += 1
            }
            Err(e) => {
                log::warn!("h witness at stage {k}: {e}");
                o.skipped += 1;
            }
        }
    }
    o
}

pub fn witness(cfg: &mut RunConfig, samples: usize) -> anyhow::Result<()> {
    let c = cfg.construction()?;
    let depth = cfg.depth_of(&c);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut jobs = Vec::new();
    for k in 1..=depth {
        let got = sample_stage(&c, k, samples, &mut rng);
        if got.len() < samples {
            log::warn!("stage {k}: only {} of {samples} admissible samples", got.len());
        }
        jobs.extend(got.into_iter().map(|(z, v)| (k, z, v)));
    }
    let outcomes: Vec<Outcome> = jobs
        .par_iter()
        .map(|&(k, z, v)| evaluate(&c, depth, cfg.eps_floor, k, z, v))
        .collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut skipped = 0;
    for o in outcomes {
        rows.extend(o.rows);
        failures.extend(o.failures);
        skipped += o.skipped;
    }
    let mut text = serde_json::to_string_pretty(&rows)?;
    text.push('\n');
    cfg.emit(text.as_bytes())?;
    eprintln!(
        "{} witnesses, {} skipped, {} failed checks",
        rows.len(),
        skipped,
        failures.len()
    );
    if let Some(r) = failures.first() {
        return Err(failed(format!(
            "{} witness check(s) failed, first {}: lhs {} rhs {}",
            failures.len(),
            r.id,
            fmt_f64(r.lhs),
            fmt_f64(r.rhs)
        )));
    }
    Ok(())
}
