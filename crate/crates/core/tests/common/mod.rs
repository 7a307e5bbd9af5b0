#![allow(dead_code)]

use std::sync::OnceLock;

use unrect::construction::{generate_schedule, Construction, GeneratorConfig, StripSchedule};
use unrect::real::{pow2, real, Real};
use unrect::{Line, Vec2, Window};

pub const DEPTH: usize = 6;

pub fn schedule() -> &'static StripSchedule {
    static S: OnceLock<StripSchedule> = OnceLock::new();
    S.get_or_init(|| generate_schedule(0.04, DEPTH, 3, Window::unit(), &GeneratorConfig::default()).expect("generator"))
}

pub fn construction() -> &'static Construction {
    static C: OnceLock<Construction> = OnceLock::new();
    C.get_or_init(|| Construction::build(schedule()).expect("build"))
}

/// Point at signed offset `off` (in units of the strip width) from the axis
/// of stage `k`, at parameter `t` in [0, 1] along its chord of the window.
pub fn near_strip(c: &Construction, k: usize, t: f64, off: f64) -> Vec2 {
    let st = c.stage(k);
    let d = st.strip.dir.v();
    let n = st.strip.dir.perp().v();
    let (lo, hi) = c.window().clip(st.strip.center, d).expect("axis meets window");
    let s = lo + (hi - lo) * real(t);
    st.strip.center + d * s + n * (st.rho() * off)
}

// Brute-force reference evaluations. They only read the raw schedule and the
// line lists, never the engine's per-point recursion.

pub fn offset(s: &StripSchedule, k: usize, z: Vec2) -> Real {
    let spec = &s.stages[k - 1];
    let e = spec.dir().unwrap();
    (z - spec.center()).dot(e.perp().v())
}

pub fn in_strip(s: &StripSchedule, k: usize, z: Vec2) -> bool {
    offset(s, k, z).abs() < real(s.stages[k - 1].rho)
}

pub fn ramp_ref(s: &StripSchedule, k: usize, z: Vec2) -> (Real, Vec2) {
    let spec = &s.stages[k - 1];
    let e = spec.dir().unwrap();
    let ew = e.dot(s.w_dir().v());
    let rho = real(spec.rho);
    let o = offset(s, k, z);
    let v = (o + rho) / ew;
    let top = rho * 2.0 / ew;
    if v <= real(0.0) {
        (real(0.0), Vec2::ZERO)
    } else if v >= top {
        (top, Vec2::ZERO)
    } else {
        (v, e.perp().v() * (real(1.0) / ew))
    }
}

pub fn phi_ref(c: &Construction, k: usize, z: Vec2) -> (Real, Vec2) {
    let (rv, rg) = ramp_ref(c.schedule(), k, z);
    let mut best: Option<&Line> = None;
    for l in c.lines_at(k - 1) {
        if best.is_none_or(|b| l.eval(z).abs() < b.eval(z).abs()) {
            best = Some(l);
        }
    }
    match best {
        Some(l) if l.eval(z).abs() * pow2(-(k as i32)) < rv => {
            let s = if l.eval(z) >= real(0.0) {
                pow2(-(k as i32))
            } else {
                -pow2(-(k as i32))
            };
            (l.eval(z).abs() * pow2(-(k as i32)), l.normal.v() * s)
        }
        _ => (rv, rg),
    }
}

pub fn sigma_ref(s: &StripSchedule, k: usize, z: Vec2) -> i8 {
    let hits = (1..=k).filter(|&j| in_strip(s, j, z)).count();
    if hits % 2 == 1 {
        1
    } else {
        -1
    }
}

pub struct HRef {
    pub h: Vec<Real>,
    pub dh: Vec<Vec2>,
    pub m: Vec<u32>,
}

/// `h_k`, `Dh_k` and `m_k` for `k = 0..=depth` by direct summation.
pub fn h_ref(c: &Construction, z: Vec2, depth: usize) -> HRef {
    let s = c.schedule();
    let mut out = HRef {
        h: vec![real(0.0)],
        dh: vec![Vec2::ZERO],
        m: vec![0],
    };
    let mut last_jump = 0usize;
    for k in 1..=depth {
        let (pv, pg) = phi_ref(c, k, z);
        let sig = if k == 1 { -1 } else { sigma_ref(s, k - 1, z) };
        let coef = pow2(-(out.m[k - 1] as i32)) * f64::from(sig);
        out.h.push(out.h[k - 1] + pv * coef);
        out.dh.push(out.dh[k - 1] + pg * coef);
        let on = c.lines_at(k).iter().any(|l| l.eval(z).abs() <= real(1e-29));
        let eps = s.eps_of(out.m[last_jump]);
        let grow = !on && (out.dh[k] - out.dh[last_jump]).norm() > eps;
        out.m.push(out.m[k - 1] + grow as u32);
        if grow {
            last_jump = k;
        }
    }
    out
}

/// Same strips with `eps0 = 1/20`, so level increments actually happen.
pub fn eager() -> &'static Construction {
    static C: OnceLock<Construction> = OnceLock::new();
    C.get_or_init(|| {
        let mut s = schedule().clone();
        s.eps0 = 0.05;
        Construction::build(&s).expect("build")
    })
}

pub fn both() -> [&'static Construction; 2] {
    [construction(), eager()]
}

/// Point at offsets `a rho_j` and `b rho_k` from the axes of stages `j` and
/// `k`, if the axes cross inside the window.
pub fn in_two_strips(c: &Construction, j: usize, k: usize, a: f64, b: f64) -> Option<Vec2> {
    if j == k {
        return None;
    }
    let (sj, sk) = (c.stage(j), c.stage(k));
    let lj = sj.strip.axis().shifted(sj.rho() * a);
    let lk = sk.strip.axis().shifted(sk.rho() * b);
    let z = lj.intersect(&lk)?;
    c.window().contains(z).then_some(z)
}
