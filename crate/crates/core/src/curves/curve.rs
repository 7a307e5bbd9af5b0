use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::CurveError;
use crate::geometry::{Cone, UnitVector, Vec2, Window};
use crate::real::{real, to_f64, Real};

/// Segment as written in a curve file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentSpec {
    Line {
        from: [f64; 2],
        to: [f64; 2],
    },
    /// Consecutive points must be collinear: corners are rejected, not
    /// smoothed.
    Polyline {
        points: Vec<[f64; 2]>,
    },
    /// Angles in radians; a positive sweep runs counter-clockwise.
    Arc {
        center: [f64; 2],
        radius: f64,
        start: f64,
        sweep: f64,
    },
    /// Cubic Hermite on `u` in `[0, 1]`; `m0`, `m1` are `dp/du` at the ends.
    Hermite {
        p0: [f64; 2],
        m0: [f64; 2],
        p1: [f64; 2],
        m1: [f64; 2],
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveSpec {
    pub name: String,
    pub segments: Vec<SegmentSpec>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Segment {
    Line {
        from: Vec2,
        to: Vec2,
    },
    Arc {
        center: Vec2,
        radius: Real,
        start: Real,
        sweep: Real,
    },
    Hermite {
        p0: Vec2,
        m0: Vec2,
        p1: Vec2,
        m1: Vec2,
    },
}

fn v2(p: [f64; 2]) -> Vec2 {
    Vec2::from_f64(p[0], p[1])
}

impl Segment {
    pub fn point(&self, u: Real) -> Vec2 {
        match *self {
            Segment::Line { from, to } => from + (to - from) * u,
            Segment::Arc {
                center,
                radius,
                start,
                sweep,
            } => {
                let (s, c) = (start + sweep * u).sin_cos();
                center + Vec2::new(c, s) * radius
            }
            Segment::Hermite { p0, m0, p1, m1 } => {
                let u2 = u * u;
                let u3 = u2 * u;
                let h00 = u3 * 2.0 - u2 * 3.0 + 1.0;
                let h10 = u3 - u2 * 2.0 + u;
                let h01 = u2 * 3.0 - u3 * 2.0;
                let h11 = u3 - u2;
                p0 * h00 + m0 * h10 + p1 * h01 + m1 * h11
            }
        }
    }

    /// `dp/du`.
    pub fn deriv(&self, u: Real) -> Vec2 {
        match *self {
            Segment::Line { from, to } => to - from,
            Segment::Arc {
                radius, start, sweep, ..
            } => {
                let (s, c) = (start + sweep * u).sin_cos();
                Vec2::new(-s, c) * (radius * sweep)
            }
            Segment::Hermite { p0, m0, p1, m1 } => {
                let u2 = u * u;
                let a = u2 * 6.0 - u * 6.0;
                p0 * a + m0 * (u2 * 3.0 - u * 4.0 + 1.0) - p1 * a + m1 * (u2 * 3.0 - u * 2.0)
            }
        }
    }

    fn second(&self, u: Real) -> Vec2 {
        match *self {
            Segment::Line { .. } => Vec2::ZERO,
            Segment::Arc { center, sweep, .. } => (center - self.point(u)) * (sweep * sweep),
            Segment::Hermite { p0, m0, p1, m1 } => {
                let a = u * 12.0 - 6.0;
                p0 * a + m0 * (u * 6.0 - 4.0) - p1 * a + m1 * (u * 6.0 - 2.0)
            }
        }
    }

    /// Upper bounds on `|p'|` and `|p''|` over `[0, 1]`.
    pub fn bounds(&self) -> (Real, Real) {
        match *self {
            Segment::Line { from, to } => ((to - from).norm(), Real::ZERO),
            Segment::Arc { radius, sweep, .. } => {
                let v = radius * sweep.abs();
                (v, v * sweep.abs())
            }
            Segment::Hermite { .. } => {
                // p'' is affine in u, so its norm peaks at an end
                let a = self.second(Real::ZERO).norm().max(self.second(Real::ONE).norm());
                let v = self.deriv(Real::ZERO).norm().min(self.deriv(Real::ONE).norm()) + a;
                (v, a)
            }
        }
    }

    fn constant_speed(&self) -> bool {
        !matches!(self, Segment::Hermite { .. })
    }
}

/// Gauss-Legendre rule with 8 nodes on `[-1, 1]`, computed in double-double.
fn gauss_legendre() -> &'static [(Real, Real); 8] {
    static RULE: OnceLock<[(Real, Real); 8]> = OnceLock::new();
    RULE.get_or_init(|| {
        const N: usize = 8;
        let legendre = |x: Real| {
            let (mut p0, mut p1) = (Real::ONE, x);
            for k in 1..N {
                let k = k as f64;
                let p2 = (x * p1 * (2.0 * k + 1.0) - p0 * k) / (k + 1.0);
                p0 = p1;
                p1 = p2;
            }
            // P_N and its derivative
            (p1, (x * p1 - p0) * N as f64 / (x * x - 1.0))
        };
        let mut out = [(Real::ZERO, Real::ZERO); N];
        for (i, slot) in out.iter_mut().enumerate() {
            let mut x = real((std::f64::consts::PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos());
            for _ in 0..8 {
                let (p, dp) = legendre(x);
                x -= p / dp;
            }
            let (_, dp) = legendre(x);
            *slot = (x, real(2.0) / ((Real::ONE - x * x) * dp * dp));
        }
        out
    })
}

/// `int_a^b f(u) du` by one Gauss-Legendre panel.
pub(crate) fn gl_panel(a: Real, b: Real, f: &mut impl FnMut(Real) -> Real) -> Real {
    let half = (b - a) * 0.5;
    let mid = (a + b) * 0.5;
    let mut acc = Real::ZERO;
    for &(x, w) in gauss_legendre() {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Cumulative arc length at `u = i/n`, for segments without constant speed.
#[derive(Clone, Debug, PartialEq)]
struct ArcTable {
    cum: Vec<Real>,
}

impl ArcTable {
    fn cells(&self) -> usize {
        self.cum.len() - 1
    }
}

/// Parameter position on a curve: segment index and local parameter.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct CurvePos {
    pub seg: usize,
    pub u: Real,
}

/// Arc-length parametrized C1 curve.
///
/// Positions are located by `(segment, u)`; the arc-length coordinate `t`
/// of a position is the length of the curve before it. Lengths of short
/// pieces are integrated directly rather than taken as differences of `t`,
/// so they stay accurate relative to the piece.
#[derive(Clone, Debug)]
pub struct Curve {
    name: String,
    segs: Vec<Segment>,
    tables: Vec<Option<ArcTable>>,
    offsets: Vec<Real>,
    bounds: Vec<(Real, Real)>,
    quad_err: f64,
}

const JOIN_GAP: f64 = 1e-12;
const JOIN_TURN: f64 = 1e-9;
const QUAD_TOL: f64 = 1e-12;

impl Curve {
    pub fn new(name: impl Into<String>, segs: Vec<Segment>) -> Result<Self, CurveError> {
        if segs.is_empty() {
            return Err(CurveError::Empty);
        }
        for (i, s) in segs.iter().enumerate() {
            check_segment(i, s)?;
        }
        for i in 1..segs.len() {
            let (a, b) = (&segs[i - 1], &segs[i]);
            let gap = to_f64((a.point(Real::ONE) - b.point(Real::ZERO)).norm());
            let ta =
                UnitVector::new(a.deriv(Real::ONE)).map_err(|_| CurveError::Degenerate(i - 1, "zero speed".into()))?;
            let tb =
                UnitVector::new(b.deriv(Real::ZERO)).map_err(|_| CurveError::Degenerate(i, "zero speed".into()))?;
            let turn = to_f64((ta.v() - tb.v()).norm());
            if gap > JOIN_GAP || turn > JOIN_TURN {
                return Err(CurveError::NotC1 { join: i, gap, turn });
            }
        }
        let mut tables = Vec::with_capacity(segs.len());
        let mut offsets = vec![Real::ZERO];
        let mut quad_err = 0.0;
        for s in &segs {
            let (len, table, err) = if s.constant_speed() {
                (s.deriv(Real::ZERO).norm(), None, 0.0)
            } else {
                let (t, err) = build_table(s);
                (*t.cum.last().unwrap(), Some(t), err)
            };
            quad_err += err;
            tables.push(table);
            offsets.push(*offsets.last().unwrap() + len);
        }
        let bounds = segs.iter().map(Segment::bounds).collect();
        Ok(Curve {
            name: name.into(),
            segs,
            tables,
            offsets,
            bounds,
            quad_err,
        })
    }

    pub fn from_spec(spec: &CurveSpec) -> Result<Self, CurveError> {
        let mut segs = Vec::new();
        for s in &spec.segments {
            match s {
                SegmentSpec::Line { from, to } => segs.push(Segment::Line {
                    from: v2(*from),
                    to: v2(*to),
                }),
                SegmentSpec::Polyline { points } => {
                    if points.len() < 2 {
                        return Err(CurveError::Degenerate(segs.len(), "polyline needs two points".into()));
                    }
                    for w in points.windows(2) {
                        segs.push(Segment::Line {
                            from: v2(w[0]),
                            to: v2(w[1]),
                        });
                    }
                }
                SegmentSpec::Arc {
                    center,
                    radius,
                    start,
                    sweep,
                } => segs.push(Segment::Arc {
                    center: v2(*center),
                    radius: real(*radius),
                    start: real(*start),
                    sweep: real(*sweep),
                }),
                SegmentSpec::Hermite { p0, m0, p1, m1 } => segs.push(Segment::Hermite {
                    p0: v2(*p0),
                    m0: v2(*m0),
                    p1: v2(*p1),
                    m1: v2(*m1),
                }),
            }
        }
        Curve::new(spec.name.clone(), segs)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segs
    }

    pub fn length(&self) -> Real {
        *self.offsets.last().unwrap()
    }

    /// Estimated arc-length quadrature error, summed over segments.
    pub fn quad_err(&self) -> f64 {
        self.quad_err
    }

    /// `(max |p'|, max |p''|)` bounds of segment `i`.
    pub fn seg_bounds(&self, i: usize) -> (Real, Real) {
        self.bounds[i]
    }

    pub fn start(&self) -> CurvePos {
        CurvePos { seg: 0, u: Real::ZERO }
    }

    pub fn end(&self) -> CurvePos {
        CurvePos {
            seg: self.segs.len() - 1,
            u: Real::ONE,
        }
    }

    pub fn point_at(&self, p: CurvePos) -> Vec2 {
        self.segs[p.seg].point(p.u)
    }

    /// Unit tangent.
    pub fn tangent_at(&self, p: CurvePos) -> Vec2 {
        let d = self.segs[p.seg].deriv(p.u);
        d * (Real::ONE / d.norm())
    }

    /// Arc length of segment `seg` between local parameters `a <= b`.
    fn seg_length(&self, seg: usize, a: Real, b: Real) -> Real {
        let s = &self.segs[seg];
        match &self.tables[seg] {
            None => s.deriv(Real::ZERO).norm() * (b - a),
            Some(t) => {
                let n = t.cells();
                let speed = &mut |u: Real| s.deriv(u).norm();
                let ia = cell_of(a, n);
                let ib = cell_of(b, n);
                if ia == ib {
                    return gl_panel(a, b, speed);
                }
                let node = |i: usize| real(i as f64 / n as f64);
                gl_panel(a, node(ia + 1), speed) + (t.cum[ib] - t.cum[ia + 1]) + gl_panel(node(ib), b, speed)
            }
        }
    }

    /// Arc-length coordinate of a position.
    pub fn t_of(&self, p: CurvePos) -> Real {
        self.offsets[p.seg] + self.seg_length(p.seg, Real::ZERO, p.u)
    }

    /// Length of the curve between two positions (`a` before `b`).
    pub fn between(&self, a: CurvePos, b: CurvePos) -> Real {
        if a.seg == b.seg {
            return self.seg_length(a.seg, a.u, b.u);
        }
        let mut acc = self.seg_length(a.seg, a.u, Real::ONE);
        for s in a.seg + 1..b.seg {
            acc += self.offsets[s + 1] - self.offsets[s];
        }
        acc + self.seg_length(b.seg, Real::ZERO, b.u)
    }

    /// Position at arc length `t`, clamped to the curve.
    pub fn locate(&self, t: Real) -> CurvePos {
        if t <= Real::ZERO {
            return self.start();
        }
        if t >= self.length() {
            return self.end();
        }
        let seg = self
            .offsets
            .partition_point(|o| *o <= t)
            .saturating_sub(1)
            .min(self.segs.len() - 1);
        let local = t - self.offsets[seg];
        let s = &self.segs[seg];
        let u = match &self.tables[seg] {
            None => local / s.deriv(Real::ZERO).norm(),
            Some(tab) => {
                let n = tab.cells();
                let i = tab.cum.partition_point(|c| *c <= local).saturating_sub(1).min(n - 1);
                let (mut lo, mut hi) = (real(i as f64 / n as f64), real((i + 1) as f64 / n as f64));
                let base = tab.cum[i];
                let mut u = lo + (hi - lo) * ((local - base) / (tab.cum[i + 1] - base));
                for _ in 0..100 {
                    let f = base + gl_from(s, real(i as f64 / n as f64), u) - local;
                    if f > Real::ZERO {
                        hi = u;
                    } else {
                        lo = u;
                    }
                    let mut next = u - f / s.deriv(u).norm();
                    if !(next > lo && next < hi) {
                        next = (lo + hi) * 0.5;
                    }
                    if (next - u).abs() <= real(1e-31) || hi - lo <= real(1e-31) {
                        u = next;
                        break;
                    }
                    u = next;
                }
                u
            }
        };
        CurvePos {
            seg,
            u: u.max(Real::ZERO).min(Real::ONE),
        }
    }

    pub fn point(&self, t: Real) -> Vec2 {
        self.point_at(self.locate(t))
    }

    pub fn tangent(&self, t: Real) -> Vec2 {
        self.tangent_at(self.locate(t))
    }

    /// `n` equally spaced parameters per segment, both ends included.
    pub fn grid(&self, n: usize) -> Vec<CurvePos> {
        let mut out = Vec::with_capacity(self.segs.len() * (n + 1));
        for seg in 0..self.segs.len() {
            for i in 0..=n {
                out.push(CurvePos {
                    seg,
                    u: real(i as f64 / n as f64),
                });
            }
        }
        out
    }

    /// First grid position whose tangent leaves the cone, as arc length.
    pub fn cone_violation(&self, cone: &Cone, n: usize) -> Option<Real> {
        if cone.two_sided {
            // continuity forces one sheet of the double cone
            let first = self.tangent_at(self.start());
            let sign = if cone.axis.dot(first) >= Real::ZERO { 1.0 } else { -1.0 };
            let axis = if sign > 0.0 { cone.axis } else { -cone.axis };
            return self.cone_violation(&Cone::new(axis, cone.width, false), n);
        }
        self.grid(n)
            .into_iter()
            .find(|p| cone.axis.dot(self.tangent_at(*p)) < Real::ONE - cone.width)
            .map(|p| self.t_of(p))
    }

    /// Smallest `<gamma', v>` over the grid.
    pub fn min_dot(&self, v: UnitVector, n: usize) -> (Real, Real) {
        self.grid(n)
            .into_iter()
            .map(|p| (v.dot(self.tangent_at(p)), p))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(d, p)| (d, self.t_of(p)))
            .unwrap()
    }

    /// Largest deviation of `|gamma(t+h) - gamma(t-h)| / 2h` from 1 over `n`
    /// arc-length samples (`h = 1e-7`).
    pub fn unit_speed_defect(&self, n: usize) -> f64 {
        let len = self.length();
        let h = real(1e-7).min(len * 0.25);
        let mut worst = 0.0f64;
        for i in 0..=n {
            let t = (h + (len - h * 2.0) * (i as f64 / n as f64)).min(len - h);
            let d = (self.point(t + h) - self.point(t - h)).norm() / (h * 2.0);
            worst = worst.max(to_f64((d - 1.0).abs()));
        }
        worst
    }

    /// Axis-aligned box around the curve, padded by `pad`.
    pub fn bounds(&self, pad: f64) -> Window {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for (i, s) in self.segs.iter().enumerate() {
            let (v, _) = self.bounds[i];
            let n = 64;
            for j in 0..=n {
                let p = s.point(real(j as f64 / n as f64)).to_f64();
                for a in 0..2 {
                    lo[a] = lo[a].min(p[a]);
                    hi[a] = hi[a].max(p[a]);
                }
            }
            // points between samples are within v/(2n) of one
            let slack = to_f64(v) / (2.0 * n as f64);
            for a in 0..2 {
                lo[a] -= slack;
                hi[a] += slack;
            }
        }
        Window::new([lo[0] - pad, lo[1] - pad], [hi[0] + pad, hi[1] + pad]).expect("finite curve")
    }

    /// `int f(gamma(t), gamma'(t)) dt` between two positions, with `panels`
    /// Gauss-Legendre panels per segment piece.
    pub fn integrate(&self, a: CurvePos, b: CurvePos, panels: usize, f: &mut impl FnMut(Vec2, Vec2) -> Real) -> Real {
        let mut acc = Real::ZERO;
        for seg in a.seg..=b.seg {
            let ua = if seg == a.seg { a.u } else { Real::ZERO };
            let ub = if seg == b.seg { b.u } else { Real::ONE };
            if !(ub > ua) {
                continue;
            }
            let s = &self.segs[seg];
            let step = (ub - ua) / panels as f64;
            for i in 0..panels {
                let lo = ua + step * i as f64;
                let hi = if i + 1 == panels { ub } else { lo + step };
                acc += gl_panel(lo, hi, &mut |u| {
                    let d = s.deriv(u);
                    let sp = d.norm();
                    f(s.point(u), d * (Real::ONE / sp)) * sp
                });
            }
        }
        acc
    }
}

fn gl_from(s: &Segment, a: Real, b: Real) -> Real {
    gl_panel(a, b, &mut |u| s.deriv(u).norm())
}

fn cell_of(u: Real, n: usize) -> usize {
    ((u.hi() * n as f64).floor().max(0.0) as usize).min(n - 1)
}

fn check_segment(i: usize, s: &Segment) -> Result<(), CurveError> {
    let bad = |m: &str| Err(CurveError::Degenerate(i, m.into()));
    match *s {
        Segment::Line { from, to } => {
            if !(from.is_finite() && to.is_finite()) || (to - from).norm() == Real::ZERO {
                return bad("zero-length line");
            }
        }
        Segment::Arc { radius, sweep, .. } => {
            if !(radius > Real::ZERO) || sweep == Real::ZERO || !sweep.is_finite() || !radius.is_finite() {
                return bad("arc needs positive radius and nonzero sweep");
            }
            if sweep.abs() > real(2.0 * std::f64::consts::PI) {
                return bad("arc sweeps more than a full turn");
            }
        }
        Segment::Hermite { .. } => {
            // speed must stay away from zero: sampled minimum minus the
            // Lipschitz slack of p' between samples
            let (_, a) = s.bounds();
            let n = 512;
            let min = (0..=n)
                .map(|j| s.deriv(real(j as f64 / n as f64)).norm())
                .fold(real(f64::INFINITY), Real::min);
            if !(min - a / (2.0 * n as f64) > real(1e-9)) {
                return bad("hermite speed vanishes or nearly vanishes");
            }
        }
    }
    Ok(())
}

/// Arc-length table for a Hermite segment, refined until splitting each cell
/// in half changes the total by at most `QUAD_TOL`.
fn build_table(s: &Segment) -> (ArcTable, f64) {
    let speed = &mut |u: Real| s.deriv(u).norm();
    let mut n = 16usize;
    loop {
        let mut cum = vec![Real::ZERO];
        let mut err = 0.0;
        for i in 0..n {
            let a = real(i as f64 / n as f64);
            let b = real((i + 1) as f64 / n as f64);
            let m = (a + b) * 0.5;
            let coarse = gl_panel(a, b, speed);
            let fine = gl_panel(a, m, speed) + gl_panel(m, b, speed);
            err += to_f64((coarse - fine).abs());
            // single panels, so partial cells and full cells agree
            cum.push(*cum.last().unwrap() + coarse);
        }
        if err <= QUAD_TOL || n >= 4096 {
            return (ArcTable { cum }, err);
        }
        n *= 2;
    }
}
