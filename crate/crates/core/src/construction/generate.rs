use log::debug;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{theta_for, Construction};
use super::kinks::{axis_crossings, clearance};
use super::schedule::{radical_inverse, StageSpec, StripSchedule};
use super::validate::{certify, PRECISION_FLOOR};
use super::ConstructionError;
use crate::geometry::{Strip, UnitVector, Window};
use crate::real::{dyadic_floor, pow2, real, rmin, to_f64};

#[derive(Clone, Debug)]
pub struct GeneratorConfig {
    pub w: [f64; 2],
    pub eps0: f64,
    /// Width of the first strip.
    pub rho_first: f64,
    /// Ratio bound between consecutive widths; also the assumed
    /// continuation ratio.
    pub ratio: f64,
    /// Fraction of the cone half-angle used for directions.
    pub spread: f64,
    /// Centre margin inside the window, as a fraction of its side.
    pub margin: f64,
    pub line_cap: usize,
    pub delta_budget: f64,
    /// Candidates tried per stage before giving up.
    pub attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            w: [1.0, 0.0],
            eps0: 4.0,
            rho_first: 2f64.powi(-10),
            ratio: 2f64.powi(-10),
            spread: 0.8,
            margin: 0.1,
            line_cap: 6000,
            delta_budget: 1.0,
            attempts: 32,
        }
    }
}

/// Generate a `depth`-stage schedule on `window`.
///
/// Centres and directions follow a shifted Halton sequence (bases 2, 3, 5)
/// so they fill `window x cone` as the depth grows. For each candidate the
/// guard radius is `4^-k / (1 + |S_k|)` and the width is the largest dyadic
/// below `ratio * rho_{k-1}`, half the guard radius and `theta_k c_k / 2`.
/// Candidates that fall under the precision floor or the line cap are
/// skipped; when none is left the error reports how far it got.
pub fn generate_schedule(
    eta: f64,
    depth: usize,
    seed: u64,
    window: Window,
    cfg: &GeneratorConfig,
) -> Result<StripSchedule, ConstructionError> {
    if !(eta > 0.0 && eta <= 1.0 - std::f64::consts::FRAC_1_SQRT_2) {
        return Err(ConstructionError::Schedule(format!(
            "eta must lie in (0, {:.4}]",
            1.0 - std::f64::consts::FRAC_1_SQRT_2
        )));
    }
    let w = UnitVector::from_f64(cfg.w[0], cfg.w[1]).map_err(|_| ConstructionError::Schedule("zero w".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    let half = (1.0 - eta).acos() * cfg.spread;

    let header = StripSchedule {
        w: cfg.w,
        eta,
        depth: 0,
        stages: Vec::new(),
        eps0: cfg.eps0,
        window,
        tail_ratio: cfg.ratio,
        delta_budget: cfg.delta_budget,
        line_cap: cfg.line_cap,
        certificate: None,
    };
    let mut c = Construction::start(&header)?;
    let eta_r = real(eta);
    let mut index = 1u64;
    let mut prev_rho = real(cfg.rho_first) / real(cfg.ratio);

    for k in 1..=depth {
        let mut chosen = None;
        let mut last_reason = String::from("no candidate tried");
        for _ in 0..cfg.attempts {
            let i = index;
            index += 1;
            let u = |b: u64, s: f64| (radical_inverse(i, b) + s).fract();
            let m = cfg.margin;
            let x = [
                window.min[0] + (m + (1.0 - 2.0 * m) * u(2, shift[0])) * (window.max[0] - window.min[0]),
                window.min[1] + (m + (1.0 - 2.0 * m) * u(3, shift[1])) * (window.max[1] - window.min[1]),
            ];
            let ang = w.angle() + (2.0 * u(5, shift[2]) - 1.0) * half;
            let e = [ang.cos(), ang.sin()];
            let dir = UnitVector::from_f64(e[0], e[1]).expect("unit");

            let probe = Strip::new(crate::geometry::Vec2::from_f64(x[0], x[1]), dir, real(0.0));
            let cross = axis_crossings(c.lines_at(k - 1), &probe, &window);
            let delta = dyadic_floor(pow2(-2 * k as i32) / real(1.0 + cross.len() as f64));
            let clear = clearance(c.lines_at(k - 1), &probe, &window, &cross, delta * 0.5);
            let theta = theta_for(k, eta_r);
            let mut rho = rmin(prev_rho * cfg.ratio, delta * 0.5);
            if clear.is_finite() {
                rho = rmin(rho, theta * clear * 0.5);
            }
            let rho = dyadic_floor(rho);
            if rho < real(PRECISION_FLOOR) {
                last_reason = format!("stage {k}: width {:e} under the precision floor", to_f64(rho));
                continue;
            }
            let spec = StageSpec {
                x,
                e,
                rho: to_f64(rho),
                delta: to_f64(delta),
            };
            match c.plan_stage(&spec) {
                Ok(plan) => {
                    chosen = Some((plan, spec));
                    break;
                }
                Err(err @ ConstructionError::LineCap { .. }) => last_reason = err.to_string(),
                Err(err) => return Err(err),
            }
        }
        let Some((plan, spec)) = chosen else {
            return Err(ConstructionError::Infeasible {
                reached: k - 1,
                requested: depth,
                reason: last_reason,
            });
        };
        debug!("stage {k}: rho {:e}, {} lines", spec.rho, plan.line_count());
        prev_rho = real(spec.rho);
        c.commit(plan, spec);
    }

    let mut out = c.schedule().clone();
    let cert = certify(&c);
    if !cert.valid {
        let v = &cert.violations[0];
        return Err(ConstructionError::Infeasible {
            reached: depth,
            requested: depth,
            reason: format!(
                "condition {} fails at {}: {:e} vs {:e}",
                v.condition, v.index, v.lhs, v.rhs
            ),
        });
    }
    out.certificate = Some(cert);
    Ok(out)
}
