//! Planar primitives: vectors, unit directions, lines, strips, cones and
//! the rectangular window every bounded computation lives in.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::{real, to_f64, zero, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("zero vector cannot be normalised")]
    ZeroVector,
    #[error("empty point set")]
    EmptySet,
    #[error("window is degenerate: {0}")]
    BadWindow(String),
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct Vec2 {
    pub x: Real,
    pub y: Real,
}

pub type Point = Vec2;

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 {
        x: Real::ZERO,
        y: Real::ZERO,
    };

    #[inline]
    pub fn new(x: Real, y: Real) -> Self {
        Vec2 { x, y }
    }

    #[inline]
    pub fn from_f64(x: f64, y: f64) -> Self {
        Vec2::new(real(x), real(y))
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> Real {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3d cross product.
    #[inline]
    pub fn cross(self, o: Vec2) -> Real {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm2(self) -> Real {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> Real {
        self.norm2().sqrt()
    }

    /// Counter-clockwise rotation by a right angle: (1,0) -> (0,1).
    #[inline]
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    #[inline]
    pub fn scale(self, s: Real) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }

    pub fn to_f64(self) -> [f64; 2] {
        [to_f64(self.x), to_f64(self.y)]
    }

    pub fn dist(self, o: Vec2) -> Real {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.hi().is_finite() && self.y.hi().is_finite()
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [x, y] = self.to_f64();
        write!(f, "({x:e}, {y:e})")
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        *self = *self + o;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl SubAssign for Vec2 {
    #[inline]
    fn sub_assign(&mut self, o: Vec2) {
        *self = *self - o;
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<Real> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: Real) -> Vec2 {
        self.scale(s)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// A direction of unit length. Construction normalises.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVector(Vec2);

impl UnitVector {
    pub fn new(v: Vec2) -> Result<Self, GeometryError> {
        let n = v.norm();
        if !(n > zero()) || !v.is_finite() {
            return Err(GeometryError::ZeroVector);
        }
        Ok(UnitVector(Vec2::new(v.x / n, v.y / n)))
    }

    pub fn from_f64(x: f64, y: f64) -> Result<Self, GeometryError> {
        UnitVector::new(Vec2::from_f64(x, y))
    }

    pub fn from_angle(theta: f64) -> Self {
        // the direction is whatever f64 trig gives; only its length is refined
        UnitVector::from_f64(theta.cos(), theta.sin()).expect("angle direction")
    }

    /// Axis-aligned unit vector (1, 0).
    pub fn e1() -> Self {
        UnitVector(Vec2::from_f64(1.0, 0.0))
    }

    #[inline]
    pub fn v(self) -> Vec2 {
        self.0
    }

    #[inline]
    pub fn perp(self) -> UnitVector {
        UnitVector(self.0.perp())
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> Real {
        self.0.dot(o)
    }

    pub fn angle(self) -> f64 {
        to_f64(self.0.y).atan2(to_f64(self.0.x))
    }
}

impl Neg for UnitVector {
    type Output = UnitVector;
    fn neg(self) -> UnitVector {
        UnitVector(-self.0)
    }
}

/// Oriented line `{ z : <normal, z> = offset }`. The value `eval(z)` is the
/// signed distance because the normal has unit length.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Line {
    pub normal: UnitVector,
    pub offset: Real,
}

impl Line {
    pub fn new(normal: UnitVector, offset: Real) -> Self {
        Line { normal, offset }
    }

    /// Line through `p` with direction `dir`; its normal is `dir` rotated
    /// by a right angle, so `eval` is the offset along `dir⊥`.
    pub fn through(p: Vec2, dir: UnitVector) -> Self {
        let n = dir.perp();
        Line::new(n, n.dot(p))
    }

    /// Line `{ <a, z> = b }` for a non-zero `a`, rescaled to unit normal.
    pub fn from_coeffs(a: Vec2, b: Real) -> Result<Self, GeometryError> {
        let n = a.norm();
        if !(n > zero()) {
            return Err(GeometryError::ZeroVector);
        }
        Ok(Line::new(UnitVector(Vec2::new(a.x / n, a.y / n)), b / n))
    }

    #[inline]
    pub fn eval(&self, z: Vec2) -> Real {
        self.normal.dot(z) - self.offset
    }

    /// Direction of travel along the line; `normal == dir().perp()`.
    pub fn dir(&self) -> UnitVector {
        -self.normal.perp()
    }

    /// Foot of the perpendicular from the origin.
    pub fn anchor(&self) -> Vec2 {
        self.normal.v() * self.offset
    }

    pub fn project(&self, z: Vec2) -> Vec2 {
        z - self.normal.v() * self.eval(z)
    }

    /// Same set, normal pointing into the upper half-plane (or +x when
    /// horizontal normal).
    pub fn canonical(self) -> Self {
        let n = self.normal.v();
        if n.y < zero() || (n.y == zero() && n.x < zero()) {
            Line::new(-self.normal, -self.offset)
        } else {
            self
        }
    }

    pub fn shifted(self, by: Real) -> Self {
        Line::new(self.normal, self.offset + by)
    }

    /// Intersection point, `None` for parallel lines.
    pub fn intersect(&self, o: &Line) -> Option<Vec2> {
        let a = self.normal.v();
        let b = o.normal.v();
        let det = a.cross(b);
        if det == zero() {
            return None;
        }
        // Cramer on [a; b] z = [c1; c2]
        let x = (self.offset * b.y - o.offset * a.y) / det;
        let y = (a.x * o.offset - b.x * self.offset) / det;
        Some(Vec2::new(x, y))
    }

    /// True when both lines describe the same set within `tol`.
    pub fn same_as(&self, o: &Line, tol: f64) -> bool {
        let a = self.canonical();
        let b = o.canonical();
        let dn = (a.normal.v() - b.normal.v()).norm();
        dn <= real(tol) && (a.offset - b.offset).abs() <= real(tol)
    }
}

/// Open strip `B(L, half_width)` around the line through `center` with
/// direction `dir`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Strip {
    pub center: Vec2,
    pub dir: UnitVector,
    pub half_width: Real,
}

impl Strip {
    pub fn new(center: Vec2, dir: UnitVector, half_width: Real) -> Self {
        Strip {
            center,
            dir,
            half_width,
        }
    }

    pub fn axis(&self) -> Line {
        Line::through(self.center, self.dir)
    }

    /// `<z - center, dir⊥>`.
    #[inline]
    pub fn signed_offset(&self, z: Vec2) -> Real {
        self.dir.perp().dot(z - self.center)
    }

    #[inline]
    pub fn contains(&self, z: Vec2) -> bool {
        self.signed_offset(z).abs() < self.half_width
    }

    /// Lower and upper boundary lines, both oriented like the axis.
    pub fn boundaries(&self) -> [Line; 2] {
        let axis = self.axis();
        [axis.shifted(-self.half_width), axis.shifted(self.half_width)]
    }
}

pub fn strip_signed_offset(z: Vec2, strip: &Strip) -> Real {
    strip.signed_offset(z)
}

/// `C(axis, width)`: unit vectors with `<v, axis> >= 1 - width`; the
/// two-sided version compares `|<v, axis>|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cone {
    pub axis: UnitVector,
    pub width: Real,
    pub two_sided: bool,
}

impl Cone {
    pub fn new(axis: UnitVector, width: Real, two_sided: bool) -> Self {
        Cone { axis, width, two_sided }
    }

    pub fn contains(&self, v: UnitVector) -> bool {
        let c = self.axis.dot(v.v());
        let c = if self.two_sided { c.abs() } else { c };
        c >= real(1.0) - self.width
    }

    /// Half opening angle in radians.
    pub fn half_angle(&self) -> f64 {
        (1.0 - to_f64(self.width)).clamp(-1.0, 1.0).acos()
    }
}

pub fn cone_contains(v: Vec2, axis: UnitVector, width: Real, two_sided: bool) -> Result<bool, GeometryError> {
    let v = UnitVector::new(v)?;
    Ok(Cone::new(axis, width, two_sided).contains(v))
}

/// Width of a finite point set in direction `v`: `sup <y - x, v>`.
pub fn diam_v(points: &[Vec2], v: UnitVector) -> Result<Real, GeometryError> {
    let mut it = points.iter();
    let first = it.next().ok_or(GeometryError::EmptySet)?;
    let p0 = v.dot(*first);
    let (mut lo, mut hi) = (p0, p0);
    for p in it {
        let s = v.dot(*p);
        if s < lo {
            lo = s;
        }
        if s > hi {
            hi = s;
        }
    }
    Ok(hi - lo)
}

/// Axis-aligned closed rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for Window {
    fn default() -> Self {
        Window::new([-2.0, -2.0], [3.0, 3.0]).unwrap()
    }
}

impl Window {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self, GeometryError> {
        if !(min[0] < max[0] && min[1] < max[1]) || !min.iter().chain(max.iter()).all(|v| v.is_finite()) {
            return Err(GeometryError::BadWindow(format!("{min:?} .. {max:?}")));
        }
        Ok(Window { min, max })
    }

    pub fn unit() -> Self {
        Window::new([0.0, 0.0], [1.0, 1.0]).unwrap()
    }

    /// Rectangle grown by `m` on every side.
    pub fn expanded(&self, m: f64) -> Self {
        Window::new([self.min[0] - m, self.min[1] - m], [self.max[0] + m, self.max[1] + m]).unwrap()
    }

    pub fn contains(&self, z: Vec2) -> bool {
        z.x >= self.min[0] && z.x <= self.max[0] && z.y >= self.min[1] && z.y <= self.max[1]
    }

    /// Counter-clockwise corners starting at the lower-left.
    pub fn corners(&self) -> [Vec2; 4] {
        [
            Vec2::from_f64(self.min[0], self.min[1]),
            Vec2::from_f64(self.max[0], self.min[1]),
            Vec2::from_f64(self.max[0], self.max[1]),
            Vec2::from_f64(self.min[0], self.max[1]),
        ]
    }

    pub fn diameter(&self) -> f64 {
        let dx = self.max[0] - self.min[0];
        let dy = self.max[1] - self.min[1];
        dx.hypot(dy)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::from_f64(0.5 * (self.min[0] + self.max[0]), 0.5 * (self.min[1] + self.max[1]))
    }

    /// Parameter range `[t0, t1]` of `p + t d` inside the window
    /// (Liang-Barsky). `None` when the line misses it.
    pub fn clip(&self, p: Vec2, d: Vec2) -> Option<(Real, Real)> {
        let mut t0 = real(f64::NEG_INFINITY);
        let mut t1 = real(f64::INFINITY);
        let checks = [
            (d.x, p.x, self.min[0], self.max[0]),
            (d.y, p.y, self.min[1], self.max[1]),
        ];
        for (dc, pc, lo, hi) in checks {
            if dc == zero() {
                if pc < lo || pc > hi {
                    return None;
                }
                continue;
            }
            let a = (real(lo) - pc) / dc;
            let b = (real(hi) - pc) / dc;
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            if a > t0 {
                t0 = a;
            }
            if b < t1 {
                t1 = b;
            }
        }
        if t0 <= t1 {
            Some((t0, t1))
        } else {
            None
        }
    }

    /// Segment of a line inside the window as `(anchor, dir, t0, t1)`.
    pub fn clip_line(&self, l: &Line) -> Option<(Vec2, Vec2, Real, Real)> {
        let p = l.anchor();
        let d = l.dir().v();
        self.clip(p, d).map(|(a, b)| (p, d, a, b))
    }
}
