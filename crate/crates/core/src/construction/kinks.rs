//! Lines across which the stage function `min(ramp, 2^-k dist(., T))`
//! changes its affine piece.
//!
//! Each candidate line is tested on its own: along the line every relevant
//! quantity is affine in the parameter, so "this candidate is a kink
//! somewhere in the window" reduces to an interval minus a union of
//! intervals being non-empty.

use rayon::prelude::*;

use crate::geometry::{Line, Strip, UnitVector, Vec2, Window};
use crate::real::{pow2, real, Real};

/// Closed interval, empty when `lo > hi`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Iv {
    pub lo: Real,
    pub hi: Real,
}

impl Iv {
    fn all() -> Iv {
        Iv {
            lo: real(f64::NEG_INFINITY),
            hi: real(f64::INFINITY),
        }
    }

    fn empty() -> Iv {
        Iv {
            lo: real(1.0),
            hi: real(-1.0),
        }
    }

    fn meet(self, o: Iv) -> Iv {
        Iv {
            lo: self.lo.max(o.lo),
            hi: self.hi.min(o.hi),
        }
    }

    fn is_empty(&self) -> bool {
        !(self.lo <= self.hi)
    }
}

/// `{ t : p t <= q }`.
fn half(p: Real, q: Real) -> Iv {
    if p > Real::ZERO {
        Iv {
            lo: real(f64::NEG_INFINITY),
            hi: q / p,
        }
    } else if p < Real::ZERO {
        Iv {
            lo: q / p,
            hi: real(f64::INFINITY),
        }
    } else if q >= Real::ZERO {
        Iv::all()
    } else {
        Iv::empty()
    }
}

/// `a + b t`.
#[derive(Clone, Copy, Debug)]
struct Lin {
    a: Real,
    b: Real,
}

/// Line restricted to a parametrised carrier `p + t d`.
fn along(l: &Line, p: Vec2, d: Vec2) -> Lin {
    Lin {
        a: l.eval(p),
        b: l.normal.dot(d),
    }
}

/// `{ t : |l(t)| <= bound(t) }`.
fn within(l: Lin, bound: Lin) -> Iv {
    half(l.b - bound.b, bound.a - l.a).meet(half(-l.b - bound.b, l.a + bound.a))
}

/// True when `base` minus the union of `holes` keeps a piece longer than
/// `min_len`.
fn survives(base: Iv, mut holes: Vec<Iv>, min_len: Real) -> bool {
    if base.is_empty() || base.hi - base.lo <= min_len {
        return false;
    }
    holes.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut cur = base.lo;
    for h in holes {
        if h.lo - cur > min_len {
            return true;
        }
        if h.hi > cur {
            cur = h.hi;
        }
        if cur >= base.hi {
            return false;
        }
    }
    base.hi - cur > min_len
}

/// Stage geometry needed by the analysis.
pub(crate) struct StageShape<'a> {
    pub k: usize,
    pub strip: &'a Strip,
    /// `<e_k, w>`
    pub ew: Real,
    /// Height of the ramp, `2 rho / <e_k, w>`.
    pub top: Real,
    pub window: &'a Window,
}

impl<'a> StageShape<'a> {
    fn scale(&self) -> Real {
        pow2(-(self.k as i32))
    }

    /// Distance at which `2^-k dist` reaches the ramp top.
    fn reach(&self) -> Real {
        self.top * pow2(self.k as i32)
    }

    fn offset_along(&self, p: Vec2, d: Vec2) -> Lin {
        let n = self.strip.dir.perp();
        Lin {
            a: self.strip.signed_offset(p),
            b: n.dot(d),
        }
    }

    fn min_len(&self) -> Real {
        (self.strip.half_width * 1e-6).max(real(1e-30))
    }
}

fn carrier(l: &Line, w: &Window) -> Option<(Vec2, Vec2, Iv)> {
    w.clip_line(l).map(|(p, d, lo, hi)| (p, d, Iv { lo, hi }))
}

fn holes_from(lines: &[Line], skip: &[usize], p: Vec2, d: Vec2, bound: Lin, base: Iv) -> Vec<Iv> {
    let mut out = Vec::new();
    for (l, line) in lines.iter().enumerate() {
        if skip.contains(&l) {
            continue;
        }
        let iv = within(along(line, p, d), bound).meet(base);
        if !iv.is_empty() {
            out.push(iv);
        }
    }
    out
}

/// Offset lines `{sigma l_i = reach}` above the strip where `l_i` is the
/// strictly nearest line.
fn offset_kinks(prev: &[Line], st: &StageShape) -> Vec<Line> {
    let r = st.reach();
    let rho = st.strip.half_width;
    (0..prev.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            for sign in [1.0, -1.0] {
                let li = prev[i];
                let cand = if sign > 0.0 {
                    Line::new(li.normal, li.offset + r)
                } else {
                    Line::new(-li.normal, -li.offset + r)
                };
                let Some((p, d, clip)) = carrier(&cand, st.window) else {
                    continue;
                };
                let o = st.offset_along(p, d);
                let base = clip.meet(half(-o.b, o.a - rho));
                if base.is_empty() {
                    continue;
                }
                let holes = holes_from(prev, &[i], p, d, Lin { a: r, b: Real::ZERO }, base);
                if survives(base, holes, st.min_len()) {
                    out.push(cand);
                }
            }
            out
        })
        .collect()
}

/// Lines where `2^-k sigma l_i` meets the ramp inside the strip.
fn coincidence_kinks(prev: &[Line], st: &StageShape) -> Vec<Line> {
    let rho = st.strip.half_width;
    let nk = st.strip.dir.perp();
    let c0 = (rho - nk.dot(st.strip.center)) / st.ew;
    let s = st.scale();
    (0..prev.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            for sign in [1.0, -1.0] {
                let li = prev[i];
                let a = li.normal.v() * (s * sign) - nk.v() * (real(1.0) / st.ew);
                let b = li.offset * (s * sign) + c0;
                let Ok(cand) = Line::from_coeffs(a, b) else {
                    continue;
                };
                let Some((p, d, clip)) = carrier(&cand, st.window) else {
                    continue;
                };
                let o = st.offset_along(p, d);
                let base = clip.meet(half(o.b, rho - o.a)).meet(half(-o.b, rho + o.a));
                if base.is_empty() {
                    continue;
                }
                let di = along(&li, p, d);
                let bound = Lin {
                    a: di.a * sign,
                    b: di.b * sign,
                };
                let holes = holes_from(prev, &[i], p, d, bound, base);
                if survives(base, holes, st.min_len()) {
                    out.push(cand);
                }
            }
            out
        })
        .collect()
}

#[derive(Clone, Copy)]
struct LineF {
    n: [f64; 2],
    b: f64,
}

fn to_f(l: &Line) -> LineF {
    let [x, y] = l.normal.v().to_f64();
    LineF {
        n: [x, y],
        b: crate::real::to_f64(l.offset),
    }
}

/// Cheap necessary test for "somewhere in the window above the strip's
/// lower edge, both lines are closer than `r`".
fn pair_may_matter(a: &LineF, b: &LineF, r: f64, win: &Window, strip_n: [f64; 2], strip_c: f64, rho: f64) -> bool {
    let slack = 1e-12;
    let c = [0.5 * (win.min[0] + win.max[0]), 0.5 * (win.min[1] + win.max[1])];
    let half_diag = 0.5 * win.diameter();
    // |l_a - s l_b| < 2r is needed for either sign
    let mut any = false;
    for s in [1.0, -1.0] {
        let dn = [a.n[0] - s * b.n[0], a.n[1] - s * b.n[1]];
        let at_c = (dn[0] * c[0] + dn[1] * c[1]) - (a.b - s * b.b);
        let lower = at_c.abs() - dn[0].hypot(dn[1]) * half_diag;
        if lower <= 2.0 * r + slack {
            any = true;
        }
    }
    if !any {
        return false;
    }
    let det = a.n[0] * b.n[1] - a.n[1] * b.n[0];
    if det.abs() < 1e-9 {
        return true;
    }
    let px = (a.b * b.n[1] - b.b * a.n[1]) / det;
    let py = (a.n[0] * b.b - b.n[0] * a.b) / det;
    let reach = 2.0 * r / det.abs() + 1e-14 / det.abs() + slack;
    let dx = (win.min[0] - px).max(px - win.max[0]).max(0.0);
    let dy = (win.min[1] - py).max(py - win.max[1]).max(0.0);
    if dx.hypot(dy) > reach {
        return false;
    }
    let o = strip_n[0] * px + strip_n[1] * py - strip_c;
    o > -rho - reach
}

/// Bisectors `{l_i = +-l_j}` where the pair is the nearest one and the
/// distance term is the active branch of the minimum.
fn bisector_kinks(prev: &[Line], st: &StageShape) -> Vec<Line> {
    let r = st.reach();
    let rf = crate::real::to_f64(r);
    let lf: Vec<LineF> = prev.iter().map(to_f).collect();
    let nk = st.strip.dir.perp();
    let nkf = nk.v().to_f64();
    let ckf = crate::real::to_f64(nk.dot(st.strip.center));
    let rhof = crate::real::to_f64(st.strip.half_width);
    let rho = st.strip.half_width;
    let s = st.scale();
    (0..prev.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut out = Vec::new();
            for j in i + 1..prev.len() {
                if !pair_may_matter(&lf[i], &lf[j], rf, st.window, nkf, ckf, rhof) {
                    continue;
                }
                let (li, lj) = (prev[i], prev[j]);
                for sgn in [1.0, -1.0] {
                    let nrm = li.normal.v() - lj.normal.v() * sgn;
                    if nrm.norm2() <= real(1e-60) {
                        continue;
                    }
                    let Ok(cand) = Line::from_coeffs(nrm, li.offset - lj.offset * sgn) else {
                        continue;
                    };
                    let Some((p, d, clip)) = carrier(&cand, st.window) else {
                        continue;
                    };
                    let o = st.offset_along(p, d);
                    let di = along(&li, p, d);
                    let mut hit = false;
                    for side in [1.0, -1.0] {
                        // piece where sign(l_i) == side, distance = side * l_i
                        let dist = Lin {
                            a: di.a * side,
                            b: di.b * side,
                        };
                        let piece = half(-dist.b, dist.a);
                        // 2^-k dist < ramp  and  dist < reach
                        let act = half(dist.b * s - o.b / st.ew, (o.a + rho) / st.ew - dist.a * s)
                            .meet(half(dist.b, r - dist.a));
                        let base = clip.meet(piece).meet(act);
                        if base.is_empty() || base.hi - base.lo <= st.min_len() {
                            continue;
                        }
                        let holes = holes_from(prev, &[i, j], p, d, dist, base);
                        if survives(base, holes, st.min_len()) {
                            hit = true;
                            break;
                        }
                    }
                    if hit {
                        out.push(cand);
                    }
                }
            }
            out
        })
        .collect()
}

/// Lines that `T_k` adds to `T_{k-1}`: both strip edges plus every kink
/// line of the stage function. Not deduplicated.
pub(crate) fn new_lines(prev: &[Line], st: &StageShape) -> Vec<Line> {
    let mut out: Vec<Line> = st.strip.boundaries().to_vec();
    if prev.is_empty() {
        return out;
    }
    out.extend(offset_kinks(prev, st));
    out.extend(coincidence_kinks(prev, st));
    out.extend(bisector_kinks(prev, st));
    out
}

/// Points where the strip axis meets earlier lines inside the window.
pub(crate) fn axis_crossings(prev: &[Line], strip: &Strip, window: &Window) -> Vec<(Real, Vec2)> {
    let dir = strip.dir;
    let Some((lo, hi)) = window.clip(strip.center, dir.v()) else {
        return Vec::new();
    };
    let mut out: Vec<(Real, Vec2)> = Vec::new();
    for l in prev {
        let g = l.normal.dot(dir.v());
        if g == Real::ZERO {
            continue;
        }
        let t = -l.eval(strip.center) / g;
        if t >= lo && t <= hi {
            out.push((t, strip.center + dir.v() * t));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// `inf { dist(y, T) : y on the axis inside the window, outside the guard
/// balls of radius `guard` around the crossings }`.
pub(crate) fn clearance(
    prev: &[Line],
    strip: &Strip,
    window: &Window,
    crossings: &[(Real, Vec2)],
    guard: Real,
) -> Real {
    if prev.is_empty() {
        return real(f64::INFINITY);
    }
    let dir: UnitVector = strip.dir;
    let Some((lo, hi)) = window.clip(strip.center, dir.v()) else {
        return real(f64::INFINITY);
    };
    // allowed parameter pieces along the axis
    let mut allowed: Vec<Iv> = Vec::new();
    let mut cur = lo;
    for (t, _) in crossings {
        let a = *t - guard;
        if a > cur {
            allowed.push(Iv { lo: cur, hi: a.min(hi) });
        }
        cur = cur.max(*t + guard);
    }
    if cur < hi {
        allowed.push(Iv { lo: cur, hi });
    }
    let mut best = real(f64::INFINITY);
    for l in prev {
        let f = along(l, strip.center, dir.v());
        for iv in &allowed {
            let v = if f.b == Real::ZERO {
                f.a.abs()
            } else {
                let z = -f.a / f.b;
                if z >= iv.lo && z <= iv.hi {
                    Real::ZERO
                } else {
                    (f.a + f.b * iv.lo).abs().min((f.a + f.b * iv.hi).abs())
                }
            };
            if v < best {
                best = v;
            }
        }
    }
    best
}
