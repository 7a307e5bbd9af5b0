//! Shared fixtures for the criterion benches.

use unrect::construction::{generate_schedule, Construction, GeneratorConfig};
use unrect::curves::{Curve, Segment};
use unrect::{UnitVector, Vec2, Window};

pub const ETA: f64 = 0.04;
pub const SEED: u64 = 1;

pub fn construction(depth: usize) -> Construction {
    let s = generate_schedule(ETA, depth, SEED, Window::unit(), &GeneratorConfig::default()).expect("schedule");
    Construction::build(&s).expect("build")
}

/// Deterministic points: `n` along the axis of every stage, at
/// mid-width, followed by a coarse lattice.
pub fn points(c: &Construction, n: usize) -> Vec<Vec2> {
    let mut out = Vec::new();
    for k in 1..=c.depth() {
        for i in 0..n {
            let t = (i as f64 + 0.5) / n as f64;
            out.extend(c.strip_point(k, t, 0.5));
        }
    }
    for i in 0..n {
        for j in 0..n {
            out.push(Vec2::from_f64((i as f64 + 0.5) / n as f64, (j as f64 + 0.5) / n as f64));
        }
    }
    out
}

/// Gentle S-curve across the window with tangents near `w`.
pub fn s_curve(c: &Construction) -> Curve {
    let w = c.w();
    let lift = |t: f64| UnitVector::from_angle(w.angle() + t).v() * 0.9;
    Curve::new(
        "s",
        vec![Segment::Hermite {
            p0: Vec2::from_f64(0.05, 0.42),
            m0: lift(0.2),
            p1: Vec2::from_f64(0.95, 0.58),
            m1: lift(-0.15),
        }],
    )
    .expect("curve")
}
