use unrect::construction::{generate_schedule, validate_schedule, GeneratorConfig};

use crate::config::{construction_error, failed, RunConfig};

pub fn validate(cfg: &mut RunConfig) -> anyhow::Result<()> {
    let s = cfg.load_schedule()?;
    let (_, out) = validate_schedule(&s).map_err(construction_error)?;
    let mut text = out.to_json();
    text.push('\n');
    cfg.emit(text.as_bytes())?;
    let cert = out.certificate.as_ref().expect("certificate attached");
    if cert.valid {
        log::info!("schedule valid: {} checks", cert.checks.len());
        return Ok(());
    }
    for v in &cert.violations {
        eprintln!(
            "violation: condition ({}) at index {}: lhs {:e} rhs {:e}",
            v.condition, v.index, v.lhs, v.rhs
        );
    }
    Err(failed(format!("{} violation(s)", cert.violations.len())))
}

/// Default build depth: deep enough to exercise level increments, cheap
/// enough for an interactive run.
pub const BUILD_DEPTH: usize = 6;

pub fn build(cfg: &RunConfig, eta: f64, eps0: f64) -> anyhow::Result<()> {
    let depth = cfg.depth.unwrap_or(BUILD_DEPTH);
    let gen = GeneratorConfig {
        eps0,
        ..GeneratorConfig::default()
    };
    let s = generate_schedule(eta, depth, cfg.seed, cfg.window, &gen).map_err(construction_error)?;
    let (_, out) = validate_schedule(&s).map_err(construction_error)?;
    let mut text = out.to_json();
    text.push('\n');
    cfg.emit(text.as_bytes())?;
    let cert = out.certificate.as_ref().expect("certificate attached");
    if !cert.valid {
        return Err(failed(format!(
            "generated schedule has {} violation(s)",
            cert.violations.len()
        )));
    }
    Ok(())
}
