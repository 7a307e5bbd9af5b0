use super::curve::{Curve, CurvePos};
use super::CurveError;
use crate::geometry::{diam_v, Cone, Line, Strip, UnitVector, Vec2, Window};
use crate::real::{real, to_f64, Real};
use crate::report::CheckRow;

/// Tangent samples per segment for cone and monotonicity preconditions.
pub const PRECONDITION_GRID: usize = 256;

/// Zero set of a boundary function `F`; regions are sublevel sets.
#[derive(Clone, Debug, PartialEq)]
pub enum Boundary {
    /// `F = l(z)`.
    Line(Line),
    /// `F = |z - center|^2 - radius^2`.
    Circle { center: Vec2, radius: Real },
}

impl Boundary {
    pub fn value(&self, z: Vec2) -> Real {
        match self {
            Boundary::Line(l) => l.eval(z),
            Boundary::Circle { center, radius } => (z - *center).norm2() - *radius * *radius,
        }
    }

    fn grad(&self, z: Vec2) -> Vec2 {
        match self {
            Boundary::Line(l) => l.normal.v(),
            Boundary::Circle { center, .. } => (z - *center) * 2.0,
        }
    }

    /// Bound on `|grad F|` within distance `r` of `z`.
    fn grad_bound(&self, z: Vec2, r: Real) -> Real {
        match self {
            Boundary::Line(_) => Real::ONE,
            Boundary::Circle { center, .. } => ((z - *center).norm() + r) * 2.0,
        }
    }

    fn hess_bound(&self) -> Real {
        match self {
            Boundary::Line(_) => Real::ZERO,
            Boundary::Circle { .. } => real(2.0),
        }
    }
}

/// Open convex region.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// `{z : l(z) < 0}` for every side `l`.
    Convex {
        sides: Vec<Line>,
    },
    Ball {
        center: Vec2,
        radius: Real,
    },
}

impl Region {
    pub fn strip(s: &Strip) -> Self {
        let n = s.dir.perp();
        let c = n.dot(s.center);
        Region::Convex {
            sides: vec![Line::new(n, c + s.half_width), Line::new(-n, -c + s.half_width)],
        }
    }

    /// Convex polygon from its vertices in either orientation.
    pub fn polygon(vertices: &[Vec2]) -> Result<Self, CurveError> {
        let n = vertices.len();
        if n < 3 {
            return Err(CurveError::Polygon("needs three vertices".into()));
        }
        let turn = |i: usize| {
            let (a, b, c) = (vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            (b - a).cross(c - b)
        };
        let ccw = turn(0) > Real::ZERO;
        let mut sides = Vec::with_capacity(n);
        for i in 0..n {
            let t = turn(i);
            if t == Real::ZERO || (t > Real::ZERO) != ccw {
                return Err(CurveError::Polygon(format!(
                    "not strictly convex at vertex {}",
                    (i + 1) % n
                )));
            }
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            let d = UnitVector::new(b - a).map_err(|_| CurveError::Polygon("repeated vertex".into()))?;
            // interior lies left of a ccw edge
            let out = if ccw { -d.perp() } else { d.perp() };
            sides.push(Line::new(out, out.dot(a)));
        }
        Ok(Region::Convex { sides })
    }

    pub fn contains(&self, z: Vec2) -> bool {
        match self {
            Region::Convex { sides } => sides.iter().all(|l| l.eval(z) < Real::ZERO),
            Region::Ball { center, radius } => (z - *center).norm() < *radius,
        }
    }

    pub fn boundaries(&self) -> Vec<Boundary> {
        match self {
            Region::Convex { sides } => sides.iter().copied().map(Boundary::Line).collect(),
            Region::Ball { center, radius } => vec![Boundary::Circle {
                center: *center,
                radius: *radius,
            }],
        }
    }

    /// Vertices of the closure intersected with `clip`.
    pub fn clipped(&self, clip: &Window) -> Vec<Vec2> {
        match self {
            Region::Convex { sides } => {
                let mut poly = clip.corners().to_vec();
                for l in sides {
                    poly = clip_polygon(&poly, l);
                    if poly.is_empty() {
                        break;
                    }
                }
                poly
            }
            Region::Ball { center, radius } => {
                let c = clip.corners();
                let inside = c.iter().any(|p| (*p - *center).norm() <= *radius) || clip.contains(*center);
                if inside {
                    c.to_vec()
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// `diam_v` of the region intersected with `clip`. The window only
    /// matters for unbounded regions; pass one containing the curve.
    pub fn diam_v(&self, v: UnitVector, clip: &Window) -> Real {
        match self {
            Region::Ball { radius, .. } => *radius * 2.0,
            Region::Convex { .. } => diam_v(&self.clipped(clip), v).unwrap_or(Real::ZERO),
        }
    }
}

/// Sutherland-Hodgman step keeping `{l <= 0}`.
pub fn clip_polygon(poly: &[Vec2], l: &Line) -> Vec<Vec2> {
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let (fa, fb) = (l.eval(a), l.eval(b));
        if fa <= Real::ZERO {
            out.push(a);
        }
        if (fa < Real::ZERO && fb > Real::ZERO) || (fa > Real::ZERO && fb < Real::ZERO) {
            out.push(a + (b - a) * (fa / (fa - fb)));
        }
    }
    out
}

/// Twice the signed area, computed relative to the first vertex.
pub fn polygon_area2(poly: &[Vec2]) -> Real {
    if poly.len() < 3 {
        return Real::ZERO;
    }
    let o = poly[0];
    (1..poly.len() - 1).map(|i| (poly[i] - o).cross(poly[i + 1] - o)).sum()
}

#[derive(Clone, Copy, Debug)]
pub struct CrossingConfig {
    /// Abort when a curve crosses the boundaries more often than this.
    pub cap: usize,
    /// Parameter width below which an undecided interval is a tangency.
    pub min_step: f64,
    /// Crossings with `|<gamma', normal>|` below this are counted as near
    /// tangent.
    pub tangency: f64,
}

impl Default for CrossingConfig {
    fn default() -> Self {
        CrossingConfig {
            cap: 100_000,
            min_step: 1e-24,
            tangency: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub pos: CurvePos,
    pub boundary: usize,
    /// `|<gamma', grad F>| / |grad F|` at the crossing.
    pub transversality: f64,
}

/// All sign changes of the boundary functions along the curve.
///
/// Each segment is subdivided in its own parameter. On `[a, b]` with
/// midpoint `m` and half-width `h`, Taylor's bound
/// `|g(u) - g(m) - g'(m)(u - m)| <= M h^2 / 2` either excludes a zero, or
/// proves `g` monotone when `|g'(m)| > M h`. Monotone pieces are solved by
/// safeguarded Newton steps. Pieces that stay undecided down to
/// `min_step` are tangencies and abort the search.
pub fn crossings(curve: &Curve, boundaries: &[Boundary], cfg: &CrossingConfig) -> Result<Vec<Crossing>, CurveError> {
    let mut out = Vec::new();
    for seg in 0..curve.segments().len() {
        for (bi, b) in boundaries.iter().enumerate() {
            segment_crossings(curve, seg, b, bi, cfg, &mut out)?;
            if out.len() > cfg.cap {
                return Err(CurveError::CrossingCap { cap: cfg.cap });
            }
        }
    }
    out.sort_by(|a, b| a.pos.partial_cmp(&b.pos).unwrap());
    Ok(out)
}

fn segment_crossings(
    curve: &Curve,
    seg: usize,
    b: &Boundary,
    bi: usize,
    cfg: &CrossingConfig,
    out: &mut Vec<Crossing>,
) -> Result<(), CurveError> {
    let s = &curve.segments()[seg];
    let (vmax, amax) = curve.seg_bounds(seg);
    let g = |u: Real| b.value(s.point(u));
    let mut stack = vec![(Real::ZERO, Real::ONE)];
    while let Some((lo, hi)) = stack.pop() {
        let h = (hi - lo) * 0.5;
        let m = lo + h;
        let (p, d) = (s.point(m), s.deriv(m));
        let gm = b.value(p);
        let dg = b.grad(p).dot(d);
        let m2 = b.grad_bound(p, vmax * h) * amax + b.hess_bound() * vmax * vmax;
        if gm.abs() > dg.abs() * h + m2 * h * h * 0.5 {
            continue;
        }
        if dg.abs() > m2 * h {
            let (glo, ghi) = (g(lo), g(hi));
            if (glo >= Real::ZERO) != (ghi >= Real::ZERO) {
                let u = refine(s, b, lo, hi, glo >= Real::ZERO);
                let (p, d) = (s.point(u), s.deriv(u));
                let gr = b.grad(p);
                let tr = to_f64(gr.dot(d).abs() / (gr.norm() * d.norm()));
                out.push(Crossing {
                    pos: CurvePos { seg, u },
                    boundary: bi,
                    transversality: tr,
                });
                if out.len() > cfg.cap {
                    return Err(CurveError::CrossingCap { cap: cfg.cap });
                }
            }
            continue;
        }
        if h < real(cfg.min_step) {
            return Err(CurveError::Tangency {
                t: to_f64(curve.t_of(CurvePos { seg, u: m })),
            });
        }
        stack.push((m, hi));
        stack.push((lo, m));
    }
    Ok(())
}

/// Root of a monotone sign change on `[lo, hi]`; `lo_pos` is the sign at `lo`.
fn refine(s: &super::curve::Segment, b: &Boundary, mut lo: Real, mut hi: Real, lo_pos: bool) -> Real {
    let mut u = (lo + hi) * 0.5;
    for _ in 0..200 {
        let p = s.point(u);
        let g = b.value(p);
        if g == Real::ZERO {
            return u;
        }
        if (g >= Real::ZERO) == lo_pos {
            lo = u;
        } else {
            hi = u;
        }
        let dg = b.grad(p).dot(s.deriv(u));
        let mut next = u - g / dg;
        if !(next > lo && next < hi) {
            next = (lo + hi) * 0.5;
        }
        let done = (next - u).abs() <= real(1e-31) || hi - lo <= real(1e-31);
        u = next;
        if done {
            break;
        }
    }
    u
}

/// Curve piece between two positions.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Span {
    pub a: CurvePos,
    pub b: CurvePos,
    pub t0: Real,
    pub t1: Real,
    pub za: Vec2,
    pub zb: Vec2,
    pub len: Real,
}

impl Span {
    pub fn new(curve: &Curve, a: CurvePos, b: CurvePos) -> Self {
        Span {
            a,
            b,
            t0: curve.t_of(a),
            t1: curve.t_of(b),
            za: curve.point_at(a),
            zb: curve.point_at(b),
            len: curve.between(a, b),
        }
    }

    /// `int gamma' dt` over the span.
    pub fn disp(&self) -> Vec2 {
        self.zb - self.za
    }
}

/// Split the curve at the cuts and label each piece at its midpoint;
/// adjacent pieces with equal labels are merged.
pub fn label_pieces<L: PartialEq + Clone>(
    curve: &Curve,
    cuts: &[CurvePos],
    label: impl Fn(Vec2) -> L,
) -> Vec<(Span, L)> {
    let nseg = curve.segments().len();
    let mut bounds: Vec<CurvePos> = Vec::with_capacity(cuts.len() + nseg + 1);
    for seg in 0..nseg {
        bounds.push(CurvePos { seg, u: Real::ZERO });
        bounds.extend(
            cuts.iter()
                .filter(|c| c.seg == seg && c.u > Real::ZERO && c.u < Real::ONE),
        );
    }
    bounds.push(curve.end());
    bounds.dedup();
    let mut runs: Vec<(CurvePos, CurvePos, L)> = Vec::new();
    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        // a position at u = 1 of one segment equals u = 0 of the next
        let (mid_seg, mid_u) = if a.seg == b.seg {
            (a.seg, (a.u + b.u) * 0.5)
        } else {
            (a.seg, (a.u + Real::ONE) * 0.5)
        };
        let b = if b.seg != a.seg {
            CurvePos {
                seg: a.seg,
                u: Real::ONE,
            }
        } else {
            b
        };
        if !(b.u > a.u) {
            continue;
        }
        let l = label(curve.segments()[mid_seg].point(mid_u));
        match runs.last_mut() {
            Some(r) if r.2 == l => r.1 = b,
            _ => runs.push((a, b, l)),
        }
    }
    runs.into_iter().map(|(a, b, l)| (Span::new(curve, a, b), l)).collect()
}

#[derive(Clone, Debug)]
pub struct Preimage {
    pub spans: Vec<Span>,
    pub measure: Real,
    pub crossings: usize,
    pub near_tangent: usize,
    /// Root brackets plus arc-length quadrature error.
    pub error_bar: f64,
}

fn error_bar(curve: &Curve, crossings: usize) -> f64 {
    crossings as f64 * 1e-28 * to_f64(curve.length()).max(1.0) + curve.quad_err()
}

/// Total parameter length of `{t : gamma(t) in region}`.
pub fn preimage_measure(curve: &Curve, region: &Region, cfg: &CrossingConfig) -> Result<Preimage, CurveError> {
    let cr = crossings(curve, &region.boundaries(), cfg)?;
    let cuts: Vec<CurvePos> = cr.iter().map(|c| c.pos).collect();
    let spans: Vec<Span> = label_pieces(curve, &cuts, |z| region.contains(z))
        .into_iter()
        .filter(|(_, inside)| *inside)
        .map(|(s, _)| s)
        .collect();
    Ok(Preimage {
        measure: spans.iter().map(|s| s.len).sum(),
        spans,
        crossings: cr.len(),
        near_tangent: cr.iter().filter(|c| c.transversality < cfg.tangency).count(),
        error_bar: error_bar(curve, cr.len()),
    })
}

#[derive(Clone, Debug)]
pub struct CrossingReport {
    pub preimage: Preimage,
    pub diam: Real,
    pub bound: Real,
    pub row: CheckRow,
}

/// `L(gamma^-1(W)) <= diam_v(W) / (1 - delta)` for a curve with tangents in
/// the double cone around `v`.
pub fn crossing_bound_check(
    curve: &Curve,
    region: &Region,
    v: UnitVector,
    delta: f64,
    cfg: &CrossingConfig,
) -> Result<CrossingReport, CurveError> {
    if let Some(t) = curve.cone_violation(&Cone::new(v, real(delta), true), PRECONDITION_GRID) {
        return Err(CurveError::Precondition {
            what: "tangent in double cone around v".into(),
            t: to_f64(t),
        });
    }
    let preimage = preimage_measure(curve, region, cfg)?;
    let diam = region.diam_v(v, &curve.bounds(1.0));
    let bound = diam / (1.0 - delta);
    let row = CheckRow::le(
        "crossing",
        to_f64(preimage.measure),
        to_f64(bound),
        1e-6 + preimage.error_bar,
    );
    Ok(CrossingReport {
        preimage,
        diam,
        bound,
        row,
    })
}

#[derive(Clone, Debug)]
pub struct SlopeReport {
    pub preimage: Preimage,
    /// `|int_{gamma^-1(P)} <gamma', e_perp>|` by quadrature.
    pub integral: Real,
    /// The same integral from span endpoints.
    pub exact: Real,
    pub bound: Real,
    pub row: CheckRow,
}

/// `|int_{gamma^-1(P)} <gamma', e_perp>| <= 6 diam_{e_perp}(P)` for a curve
/// with `<gamma', e> >= 0`.
pub fn convex_slope_integral_check(
    curve: &Curve,
    region: &Region,
    e: UnitVector,
    cfg: &CrossingConfig,
) -> Result<SlopeReport, CurveError> {
    let (dmin, at) = curve.min_dot(e, PRECONDITION_GRID);
    if dmin < Real::ZERO {
        return Err(CurveError::Precondition {
            what: "<gamma', e> >= 0".into(),
            t: to_f64(at),
        });
    }
    let preimage = preimage_measure(curve, region, cfg)?;
    let ep = e.perp();
    let mut quad = Real::ZERO;
    let mut exact = Real::ZERO;
    for s in &preimage.spans {
        quad += curve.integrate(s.a, s.b, 8, &mut |_, tan| ep.dot(tan));
        exact += ep.dot(s.disp());
    }
    let bound = region.diam_v(ep, &curve.bounds(1.0)) * 6.0;
    let bar = to_f64((quad - exact).abs()) + preimage.error_bar;
    let row = CheckRow::le("convex-slope", to_f64(quad.abs()), to_f64(bound), bar);
    Ok(SlopeReport {
        preimage,
        integral: quad.abs(),
        exact: exact.abs(),
        bound,
        row,
    })
}
