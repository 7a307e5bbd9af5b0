//! Scalar type used by the geometry, arrangement and construction layers.
//!
//! Strip widths shrink geometrically from stage to stage, so plain `f64`
//! loses every strip after the third or fourth stage. `Real` is a
//! double-double number (about 106 bits of mantissa) built on the
//! `twofloat` crate. Division is reimplemented here: the upstream
//! double-double quotient drops the low word of the reciprocal residual
//! and is only accurate to about 1e-17.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use twofloat::TwoFloat;

#[derive(Clone, Copy, Default)]
pub struct Real(TwoFloat);

// upstream comparisons treat infinities as invalid; compare the words directly
impl PartialEq for Real {
    #[inline]
    fn eq(&self, o: &Real) -> bool {
        self.0.hi() == o.0.hi() && self.0.lo() == o.0.lo()
    }
}

impl PartialOrd for Real {
    #[inline]
    fn partial_cmp(&self, o: &Real) -> Option<Ordering> {
        match self.0.hi().partial_cmp(&o.0.hi())? {
            Ordering::Equal => self.0.lo().partial_cmp(&o.0.lo()),
            c => Some(c),
        }
    }
}

/// Tolerance used when deciding whether a point lies on a line.
pub const ON_LINE_TOL: f64 = 1.0e-29;

impl Real {
    pub const ZERO: Real = Real(TwoFloat::from_f64(0.0));
    pub const ONE: Real = Real(TwoFloat::from_f64(1.0));

    #[inline]
    pub const fn from_f64(x: f64) -> Self {
        Real(TwoFloat::from_f64(x))
    }

    /// Exact sum of two doubles.
    #[inline]
    pub fn from_parts(hi: f64, lo: f64) -> Self {
        Real(TwoFloat::new_add(hi, lo))
    }

    #[inline]
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    #[inline]
    pub fn lo(self) -> f64 {
        self.0.lo()
    }

    #[inline]
    pub fn abs(self) -> Real {
        if self.0.hi() < 0.0 {
            -self
        } else {
            self
        }
    }

    pub fn sqrt(self) -> Real {
        if self.0.hi() <= 0.0 {
            return if self.0.hi() == 0.0 {
                Real::ZERO
            } else {
                Real::from_f64(f64::NAN)
            };
        }
        // one Newton step on the double estimate, residual in double-double
        let y = self.0.hi().sqrt();
        let r = self - Real(TwoFloat::new_mul(y, y));
        Real::from_f64(y) + r / (2.0 * y)
    }

    pub fn is_finite(self) -> bool {
        self.0.hi().is_finite() && self.0.lo().is_finite()
    }

    pub fn signum_f64(self) -> f64 {
        if self.0.hi() > 0.0 {
            1.0
        } else if self.0.hi() < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    pub fn total_cmp(&self, o: &Real) -> Ordering {
        self.partial_cmp(o).unwrap_or(Ordering::Equal)
    }

    pub fn min(self, o: Real) -> Real {
        if self <= o {
            self
        } else {
            o
        }
    }

    pub fn max(self, o: Real) -> Real {
        if self >= o {
            self
        } else {
            o
        }
    }

    pub fn powi(self, n: i32) -> Real {
        let mut base = if n < 0 { Real::ONE / self } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Real::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base *= base;
            e >>= 1;
        }
        acc
    }
}

impl Real {
    pub fn pi() -> Real {
        Real::from_parts(std::f64::consts::PI, 1.2246467991473532e-16)
    }

    /// Sine and cosine to full double-double accuracy for `|self|` up to a
    /// few hundred: reduction by `pi/2`, then Taylor series on `[-pi/4, pi/4]`.
    pub fn sin_cos(self) -> (Real, Real) {
        let half_pi = Real::pi() * 0.5;
        let q = (self / half_pi).hi().round();
        let r = self - half_pi * q;
        let r2 = r * r;
        let (mut s, mut c) = (r, Real::ONE);
        let (mut ts, mut tc) = (r, Real::ONE);
        for n in 1..20 {
            let n = n as f64;
            ts = -ts * r2 / ((2.0 * n) * (2.0 * n + 1.0));
            tc = -tc * r2 / ((2.0 * n - 1.0) * (2.0 * n));
            s += ts;
            c += tc;
            if tc.abs().hi() < 1e-34 && ts.abs().hi() < 1e-34 {
                break;
            }
        }
        match (q as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }
}

#[inline]
fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    // three-term long division
    let q1 = a.hi() / b.hi();
    let r = a - b * q1;
    let q2 = r.hi() / b.hi();
    let r = r - b * q2;
    let q3 = r.hi() / b.hi();
    TwoFloat::new_add(q1, q2) + q3
}

impl fmt::Debug for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}{:+e}", self.0.hi(), self.0.lo())
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&to_f64(*self), f)
    }
}

impl From<f64> for Real {
    fn from(x: f64) -> Self {
        Real::from_f64(x)
    }
}

impl Neg for Real {
    type Output = Real;
    #[inline]
    fn neg(self) -> Real {
        Real(-self.0)
    }
}

macro_rules! real_binop {
    ($tr:ident, $f:ident, $atr:ident, $af:ident, $body:expr) => {
        impl $tr<Real> for Real {
            type Output = Real;
            #[inline]
            fn $f(self, o: Real) -> Real {
                let g: fn(TwoFloat, TwoFloat) -> TwoFloat = $body;
                Real(g(self.0, o.0))
            }
        }
        impl $tr<f64> for Real {
            type Output = Real;
            #[inline]
            fn $f(self, o: f64) -> Real {
                self.$f(Real::from_f64(o))
            }
        }
        impl $tr<Real> for f64 {
            type Output = Real;
            #[inline]
            fn $f(self, o: Real) -> Real {
                Real::from_f64(self).$f(o)
            }
        }
        impl $atr<Real> for Real {
            #[inline]
            fn $af(&mut self, o: Real) {
                *self = (*self).$f(o);
            }
        }
        impl $atr<f64> for Real {
            #[inline]
            fn $af(&mut self, o: f64) {
                *self = (*self).$f(o);
            }
        }
    };
}

real_binop!(Add, add, AddAssign, add_assign, |a, b| a + b);
real_binop!(Sub, sub, SubAssign, sub_assign, |a, b| a - b);
real_binop!(Mul, mul, MulAssign, mul_assign, |a, b| a * b);
real_binop!(Div, div, DivAssign, div_assign, dd_div);

impl PartialEq<f64> for Real {
    fn eq(&self, o: &f64) -> bool {
        *self == Real::from_f64(*o)
    }
}

impl PartialOrd<f64> for Real {
    fn partial_cmp(&self, o: &f64) -> Option<Ordering> {
        self.partial_cmp(&Real::from_f64(*o))
    }
}

impl Sum for Real {
    fn sum<I: Iterator<Item = Real>>(iter: I) -> Real {
        iter.fold(Real::ZERO, |a, b| a + b)
    }
}

#[inline]
pub fn real(x: f64) -> Real {
    Real::from_f64(x)
}

#[inline]
pub fn zero() -> Real {
    Real::ZERO
}

#[inline]
pub fn one() -> Real {
    Real::ONE
}

/// 2^n, exact for any n in the f64 exponent range.
#[inline]
pub fn pow2(n: i32) -> Real {
    Real::from_f64(2f64.powi(n))
}

pub fn rmin(a: Real, b: Real) -> Real {
    a.min(b)
}

pub fn rmax(a: Real, b: Real) -> Real {
    a.max(b)
}

/// Nearest f64.
#[inline]
pub fn to_f64(x: Real) -> f64 {
    x.hi() + x.lo()
}

/// Largest power of two not above `x` (x > 0, finite).
pub fn dyadic_floor(x: Real) -> Real {
    let mut e = x.hi().log2().floor() as i32;
    // log2 may round across an exact power
    while pow2(e) > x {
        e -= 1;
    }
    while pow2(e + 1) <= x {
        e += 1;
    }
    pow2(e)
}

/// Exponent of `dyadic_floor(x)`.
pub fn dyadic_exponent(x: Real) -> i32 {
    let d = dyadic_floor(x);
    d.hi().log2().round() as i32
}
