use super::PiecewiseAffine;
use crate::geometry::{UnitVector, Vec2};
use crate::real::{zero, Real};

/// Chord `[z + a e, z + b e]` with `a <= 0 <= b`, `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Chord {
    pub a: Real,
    pub b: Real,
    pub slope: Real,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChordExtrema {
    pub max: Chord,
    pub min: Chord,
}

impl ChordExtrema {
    pub fn spread(&self) -> Real {
        self.max.slope - self.min.slope
    }
}

/// Largest and smallest slope of `g(t) = f(z + t e)` over chords through
/// `t = 0` of length at most `eps`.
///
/// `g` is piecewise affine in `t`, and the slope of a chord is a
/// linear-fractional function of its endpoints, so extremes sit at
/// vertices of the feasible polygon `{a <= 0 <= b, b - a <= eps}` cut by
/// the breakpoints of `g`. Those vertices are enumerated exactly.
pub fn chord_slope_extrema<F: PiecewiseAffine + ?Sized>(f: &F, z: Vec2, e: UnitVector, eps: Real) -> ChordExtrema {
    let tiny = eps * 1e-28;
    let mut bps: Vec<Real> = vec![-eps, zero(), eps];
    let mut kinked = false;
    for l in f.breaklines_near(z, eps) {
        let d = l.normal.dot(e.v());
        if d == zero() {
            continue;
        }
        let s = -l.eval(z) / d;
        kinked |= s.abs() <= eps;
        if s.abs() < eps && s.abs() > tiny {
            bps.push(s);
        }
    }
    bps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bps.dedup_by(|a, b| (*a - *b).abs() <= tiny);

    let mut lefts: Vec<Real> = bps.iter().copied().filter(|s| *s <= zero()).collect();
    let mut rights: Vec<Real> = bps.iter().copied().filter(|s| *s >= zero()).collect();
    let extra_l: Vec<Real> = rights.iter().map(|b| *b - eps).filter(|a| *a <= zero()).collect();
    let extra_r: Vec<Real> = lefts.iter().map(|a| *a + eps).filter(|b| *b >= zero()).collect();
    lefts.extend(extra_l);
    rights.extend(extra_r);
    // `b - eps` for a breakpoint next to `eps` lands within roundoff of 0;
    // a chord that short has a meaningless slope
    for list in [&mut lefts, &mut rights] {
        for t in list.iter_mut() {
            if t.abs() <= tiny {
                *t = zero();
            }
        }
        list.sort_by(|a, b| a.partial_cmp(b).unwrap());
        list.dedup_by(|a, b| (*a - *b).abs() <= tiny);
    }

    let g = |t: Real| f.value(z + e.v() * t);
    if !kinked {
        // affine along the whole chord range
        let c = Chord {
            a: zero(),
            b: eps,
            slope: (g(eps) - g(zero())) / eps,
        };
        return ChordExtrema { max: c, min: c };
    }
    let gl: Vec<(Real, Real)> = lefts.iter().map(|&a| (a, g(a))).collect();
    let gr: Vec<(Real, Real)> = rights.iter().map(|&b| (b, g(b))).collect();

    let mut best_max: Option<Chord> = None;
    let mut best_min: Option<Chord> = None;
    let slack = eps * 1e-26;
    for &(a, ga) in &gl {
        for &(b, gb) in &gr {
            if !(b > a) || b - a > eps + slack {
                continue;
            }
            let slope = (gb - ga) / (b - a);
            let c = Chord { a, b, slope };
            if best_max.is_none_or(|m| slope > m.slope) {
                best_max = Some(c);
            }
            if best_min.is_none_or(|m| slope < m.slope) {
                best_min = Some(c);
            }
        }
    }
    // the chord [0, eps] is always feasible
    let fallback = Chord {
        a: zero(),
        b: eps,
        slope: (g(eps) - g(zero())) / eps,
    };
    ChordExtrema {
        max: best_max.unwrap_or(fallback),
        min: best_min.unwrap_or(fallback),
    }
}
