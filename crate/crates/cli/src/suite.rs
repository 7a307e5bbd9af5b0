//! Built-in curve suite, laid out relative to the schedule direction `w`.

use unrect::construction::Construction;
use unrect::curves::{Curve, Segment};
use unrect::real::real;
use unrect::{UnitVector, Vec2};

fn line(name: &str, mid: Vec2, dir: UnitVector, half: f64) -> Curve {
    let d = dir.v() * half;
    Curve::new(
        name,
        vec![Segment::Line {
            from: mid - d,
            to: mid + d,
        }],
    )
    .expect("suite line")
}

/// Lines, a Hermite arc and a circular arc with tangents near `w`, plus
/// one steep line outside the cone.
pub fn default_suite(c: &Construction) -> Vec<Curve> {
    let w = c.w();
    let n = w.perp();
    let a = w.angle();
    let win = c.window();
    let mid = Vec2::from_f64(0.5 * (win.min[0] + win.max[0]), 0.5 * (win.min[1] + win.max[1]));
    let at = |s: f64, o: f64| mid + w.v() * s + n.v() * o;
    let rot = |t: f64| UnitVector::from_angle(a + t);

    let arc_r = 3.0;
    let arc = Curve::new(
        "arc",
        vec![Segment::Arc {
            center: at(0.0, 0.05) - n.v() * arc_r,
            radius: real(arc_r),
            start: real(n.angle() + 0.15),
            sweep: real(-0.3),
        }],
    )
    .expect("suite arc");
    let hermite = Curve::new(
        "hermite",
        vec![Segment::Hermite {
            p0: at(-0.45, -0.08),
            m0: rot(0.2).v() * 0.9,
            p1: at(0.45, 0.06),
            m1: rot(-0.15).v() * 0.9,
        }],
    )
    .expect("suite hermite");
    vec![
        line("line-axis", mid, w, 0.45),
        line("line-up", at(-0.1, 0.05), rot(0.15), 0.4),
        line("line-down", at(0.1, -0.05), rot(-0.2), 0.4),
        hermite,
        arc,
        line("steep", mid, rot(1.0), 0.3),
    ]
}
