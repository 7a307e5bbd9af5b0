use thiserror::Error;

use super::{ArrangementError, LineArrangement, Location};
use crate::geometry::{Line, Vec2, Window};
use crate::real::{real, zero, Real};

/// `z -> <grad, z> + constant`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Affine {
    pub grad: Vec2,
    pub constant: Real,
}

impl Affine {
    pub fn new(grad: Vec2, constant: Real) -> Self {
        Affine { grad, constant }
    }

    #[inline]
    pub fn eval(&self, z: Vec2) -> Real {
        self.grad.dot(z) + self.constant
    }

    pub fn sub(&self, o: &Affine) -> Affine {
        Affine::new(self.grad - o.grad, self.constant - o.constant)
    }

    pub fn scaled(&self, s: Real) -> Affine {
        Affine::new(self.grad * s, self.constant * s)
    }

    pub fn approx_eq(&self, o: &Affine, tol: f64) -> bool {
        let d = self.sub(o);
        d.grad.x.abs() <= real(tol) && d.grad.y.abs() <= real(tol) && d.constant.abs() <= real(tol)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PwError {
    #[error("point outside the arrangement window")]
    Outside,
    #[error("point lies on a breakline")]
    OnBreakline,
    #[error("the +inf surrogate has no affine pieces")]
    Infinite,
    #[error(transparent)]
    Arrangement(#[from] ArrangementError),
}

/// Anything continuous and affine off a known finite set of lines.
pub trait PiecewiseAffine {
    /// Lines off which the function is affine near any given point.
    /// Implementations may restrict to lines meeting the disc of `radius`
    /// around `z`.
    fn breaklines_near(&self, z: Vec2, radius: Real) -> Vec<Line>;

    fn value(&self, z: Vec2) -> Real;
}

/// Piecewise-affine function stored cell by cell on an explicit
/// arrangement, or the constant `+inf` surrogate used for `dist(., {})`.
#[derive(Clone, Debug)]
pub struct PwAffine {
    arrangement: Option<LineArrangement>,
    window: Window,
    pieces: Vec<Affine>,
    coincident: Vec<bool>,
}

impl PwAffine {
    pub fn plus_infinity(window: Window) -> Self {
        PwAffine {
            arrangement: None,
            window,
            pieces: Vec::new(),
            coincident: Vec::new(),
        }
    }

    /// Evaluate `piece_of` at every cell sample.
    pub fn from_fn(arr: LineArrangement, mut piece_of: impl FnMut(Vec2) -> Affine) -> Self {
        let pieces: Vec<Affine> = arr.cells().iter().map(|c| piece_of(c.sample)).collect();
        let n = pieces.len();
        PwAffine {
            window: *arr.window(),
            arrangement: Some(arr),
            pieces,
            coincident: vec![false; n],
        }
    }

    pub fn affine(a: Affine, window: Window) -> Self {
        let arr = LineArrangement::build(&[], window).expect("empty arrangement");
        PwAffine::from_fn(arr, |_| a)
    }

    pub fn is_plus_infinity(&self) -> bool {
        self.arrangement.is_none()
    }

    pub fn arrangement(&self) -> Option<&LineArrangement> {
        self.arrangement.as_ref()
    }

    pub fn lines(&self) -> &[Line] {
        self.arrangement.as_ref().map_or(&[], |a| a.lines())
    }

    pub fn pieces(&self) -> &[Affine] {
        &self.pieces
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Cells where the two arguments of a `pa_min` coincided.
    pub fn coincident_cells(&self) -> Vec<usize> {
        (0..self.coincident.len()).filter(|&i| self.coincident[i]).collect()
    }

    pub fn piece_at(&self, z: Vec2) -> Result<Affine, PwError> {
        let arr = self.arrangement.as_ref().ok_or(PwError::Infinite)?;
        match arr.locate(z) {
            Location::Cell(c) => Ok(self.pieces[c]),
            Location::OnLines(_) => Err(PwError::OnBreakline),
            Location::Outside => Err(PwError::Outside),
        }
    }

    /// Value anywhere in the window; on lines any adjacent piece is used
    /// (the functions built here are continuous).
    pub fn eval(&self, z: Vec2) -> Result<Real, PwError> {
        let arr = match &self.arrangement {
            None => return Ok(real(f64::INFINITY)),
            Some(a) => a,
        };
        match arr.locate(z) {
            Location::Cell(c) => Ok(self.pieces[c].eval(z)),
            Location::Outside => Err(PwError::Outside),
            Location::OnLines(_) => {
                let around = arr.cells_around(z);
                let c = *around.first().ok_or(PwError::OnBreakline)?;
                Ok(self.pieces[c].eval(z))
            }
        }
    }

    /// Drop every line across which no two neighbouring cells carry
    /// different pieces. What remains is the minimal line set.
    pub fn simplify(&self, tol: f64) -> Result<PwAffine, PwError> {
        let arr = match &self.arrangement {
            None => return Ok(self.clone()),
            Some(a) => a,
        };
        let n = arr.lines().len();
        let mut kinked = vec![false; n];
        for (ci, c) in arr.cells().iter().enumerate() {
            for (i, flag) in kinked.iter_mut().enumerate() {
                if *flag || c.key.get(i) {
                    continue;
                }
                if let Some(cj) = arr.cell_by_key(&c.key.flipped(i)) {
                    if !self.pieces[ci].approx_eq(&self.pieces[cj], tol) {
                        *flag = true;
                    }
                }
            }
        }
        let keep: Vec<Line> = (0..n).filter(|&i| kinked[i]).map(|i| arr.lines()[i]).collect();
        let reduced = LineArrangement::build(&keep, self.window)?;
        let pieces: Vec<Affine> = reduced
            .cells()
            .iter()
            .map(|c| self.piece_at(c.sample).or_else(|_| self.piece_near(c)))
            .collect::<Result<_, _>>()?;
        let m = pieces.len();
        Ok(PwAffine {
            arrangement: Some(reduced),
            window: self.window,
            pieces,
            coincident: vec![false; m],
        })
    }

    fn piece_near(&self, c: &super::Cell) -> Result<Affine, PwError> {
        // sample sits on a dropped line: try the polygon's vertex averages
        for w in c.polygon.windows(2) {
            let p = (w[0] + w[1] + c.sample) * (1.0 / 3.0);
            if let Ok(a) = self.piece_at(p) {
                return Ok(a);
            }
        }
        Err(PwError::OnBreakline)
    }
}

impl PiecewiseAffine for PwAffine {
    fn breaklines_near(&self, _z: Vec2, _radius: Real) -> Vec<Line> {
        self.lines().to_vec()
    }

    fn value(&self, z: Vec2) -> Real {
        self.eval(z).unwrap_or(real(f64::NAN))
    }
}

/// Pointwise minimum. The result lives on the overlay of both line sets
/// plus every coincidence line `{f = g}` that actually cuts a cell.
pub fn pa_min(f: &PwAffine, g: &PwAffine) -> Result<PwAffine, PwError> {
    if f.is_plus_infinity() {
        return Ok(g.clone());
    }
    if g.is_plus_infinity() {
        return Ok(f.clone());
    }
    let tol = real(super::SPLIT_TOL);
    let mut lines: Vec<Line> = f.lines().to_vec();
    lines.extend_from_slice(g.lines());
    let overlay = LineArrangement::build(&lines, f.window)?;
    for c in overlay.cells() {
        let d = f.piece_at(c.sample)?.sub(&g.piece_at(c.sample)?);
        if d.grad.norm2() == zero() {
            continue;
        }
        let vals = c.polygon.iter().map(|p| d.eval(*p));
        let (mut lo, mut hi) = (real(f64::INFINITY), real(f64::NEG_INFINITY));
        for v in vals {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        if lo < -tol && hi > tol {
            lines.push(Line::from_coeffs(d.grad, -d.constant).map_err(ArrangementError::from)?);
        }
    }
    let arr = LineArrangement::build(&lines, f.window)?;
    let mut pieces = Vec::with_capacity(arr.cells().len());
    let mut coincident = Vec::with_capacity(arr.cells().len());
    for c in arr.cells() {
        let pf = f.piece_at(c.sample)?;
        let pg = g.piece_at(c.sample)?;
        coincident.push(pf.approx_eq(&pg, 1e-28));
        pieces.push(if pf.eval(c.sample) <= pg.eval(c.sample) { pf } else { pg });
    }
    Ok(PwAffine {
        window: f.window,
        arrangement: Some(arr),
        pieces,
        coincident,
    })
}

/// `scale * dist(., union of lines)`. Empty input gives the `+inf`
/// surrogate.
pub fn pa_dist_to_lines(ts: &[Line], scale: Real, window: Window) -> Result<PwAffine, PwError> {
    if ts.is_empty() {
        return Ok(PwAffine::plus_infinity(window));
    }
    let ts = super::dedup_lines(ts, 1e-28);
    let mut lines = ts.clone();
    for i in 0..ts.len() {
        for j in i + 1..ts.len() {
            let (a, b) = (ts[i], ts[j]);
            for s in [1.0, -1.0] {
                let n = a.normal.v() - b.normal.v() * s;
                if n.norm2() <= real(1e-56) {
                    continue;
                }
                lines.push(Line::from_coeffs(n, a.offset - b.offset * s).map_err(ArrangementError::from)?);
            }
        }
    }
    let arr = LineArrangement::build(&lines, window)?;
    Ok(PwAffine::from_fn(arr, |z| {
        let mut best = (real(f64::INFINITY), 0usize);
        for (i, l) in ts.iter().enumerate() {
            let d = l.eval(z).abs();
            if d < best.0 {
                best = (d, i);
            }
        }
        let l = ts[best.1];
        let s = if l.eval(z) >= zero() { scale } else { -scale };
        Affine::new(l.normal.v() * s, -l.offset * s)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitVector;

    fn hline(y: f64) -> Line {
        Line::through(Vec2::from_f64(0.0, y), UnitVector::e1())
    }

    #[test]
    fn min_of_two_planes() {
        let w = Window::unit();
        let f = PwAffine::affine(Affine::new(Vec2::from_f64(1.0, 0.0), zero()), w);
        let g = PwAffine::affine(Affine::new(Vec2::from_f64(0.0, 1.0), zero()), w);
        let m = pa_min(&f, &g).unwrap();
        assert_eq!(m.lines().len(), 1);
        for (x, y) in [(0.2, 0.7), (0.9, 0.1), (0.5, 0.5)] {
            let z = Vec2::from_f64(x, y);
            assert_eq!(m.eval(z).unwrap(), real(x.min(y)));
        }
    }

    #[test]
    fn min_with_identical_piece_flags_coincidence() {
        let w = Window::unit();
        let a = Affine::new(Vec2::from_f64(1.0, 2.0), real(0.5));
        let m = pa_min(&PwAffine::affine(a, w), &PwAffine::affine(a, w)).unwrap();
        assert_eq!(m.lines().len(), 0);
        assert_eq!(m.coincident_cells(), vec![0]);
    }

    #[test]
    fn infinity_surrogate_is_neutral() {
        let w = Window::unit();
        let f = PwAffine::affine(Affine::new(Vec2::from_f64(1.0, 0.0), zero()), w);
        let inf = pa_dist_to_lines(&[], real(1.0), w).unwrap();
        assert!(inf.is_plus_infinity());
        let m = pa_min(&inf, &f).unwrap();
        assert_eq!(m.eval(Vec2::from_f64(0.3, 0.3)).unwrap(), real(0.3));
    }

    #[test]
    fn distance_to_two_parallel_lines() {
        let w = Window::unit();
        let d = pa_dist_to_lines(&[hline(0.25), hline(0.75)], real(0.5), w).unwrap();
        // the two lines plus their midline
        assert_eq!(d.lines().len(), 3);
        assert_eq!(d.eval(Vec2::from_f64(0.1, 0.375)).unwrap(), real(0.0625));
        assert_eq!(d.eval(Vec2::from_f64(0.1, 0.9375)).unwrap(), real(0.09375));
    }

    #[test]
    fn simplify_drops_flat_lines() {
        let w = Window::unit();
        let arr = LineArrangement::build(&[hline(0.5), hline(0.3)], w).unwrap();
        let f = PwAffine::from_fn(arr, |z| {
            if z.y > real(0.5) {
                Affine::new(Vec2::from_f64(0.0, 1.0), real(-0.5))
            } else {
                Affine::default()
            }
        });
        let s = f.simplify(1e-28).unwrap();
        assert_eq!(s.lines().len(), 1);
        assert!(s.lines()[0].same_as(&hline(0.5), 1e-28));
    }
}
