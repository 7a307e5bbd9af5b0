//! Explicit line arrangements clipped to a window, piecewise-affine
//! functions over them, and exact chord-slope extrema along a direction.

mod chord;
mod pwaffine;

pub use chord::{chord_slope_extrema, Chord, ChordExtrema};
pub use pwaffine::{pa_dist_to_lines, pa_min, Affine, PiecewiseAffine, PwAffine, PwError};

use std::collections::HashMap;

use thiserror::Error;

use crate::geometry::{Line, Vec2, Window};
use crate::real::{real, zero, Real};

/// Vertices closer than this to a cutting line count as lying on it.
pub const SPLIT_TOL: f64 = 1.0e-27;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArrangementError {
    #[error("line {0} has a zero normal")]
    DegenerateLine(usize),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("arrangement has {lines} lines, over the cap of {cap}")]
    TooManyLines { lines: usize, cap: usize },
}

/// Sign vector of a cell: bit `i` set when line `i` is positive there.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SignKey(Vec<u64>);

impl SignKey {
    pub fn zeros(n: usize) -> Self {
        SignKey(vec![0; n.div_ceil(64).max(1)])
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: bool) {
        if v {
            self.0[i / 64] |= 1 << (i % 64);
        } else {
            self.0[i / 64] &= !(1 << (i % 64));
        }
    }

    pub fn flipped(&self, i: usize) -> Self {
        let mut k = self.clone();
        k.set(i, !self.get(i));
        k
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub key: SignKey,
    /// Counter-clockwise convex polygon.
    pub polygon: Vec<Vec2>,
    /// Interior point (vertex centroid).
    pub sample: Vec2,
}

impl Cell {
    pub fn area(&self) -> Real {
        polygon_area(&self.polygon)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Location {
    Cell(usize),
    /// Point lies on the listed lines (within tolerance).
    OnLines(Vec<usize>),
    Outside,
}

/// All faces of a finite line set inside a window.
#[derive(Clone, Debug)]
pub struct LineArrangement {
    window: Window,
    lines: Vec<Line>,
    cells: Vec<Cell>,
    index: HashMap<SignKey, usize>,
}

/// Remove lines that coincide (as sets) with an earlier one.
pub fn dedup_lines(lines: &[Line], tol: f64) -> Vec<Line> {
    let mut out: Vec<Line> = Vec::with_capacity(lines.len());
    let mut buckets: HashMap<i64, Vec<usize>> = HashMap::new();
    for l in lines {
        let c = l.canonical();
        let key = (c.normal.angle() * 1e9).round() as i64;
        let dup = (key - 1..=key + 1).any(|k| {
            buckets
                .get(&k)
                .is_some_and(|v| v.iter().any(|&j| out[j].same_as(&c, tol)))
        });
        if !dup {
            buckets.entry(key).or_default().push(out.len());
            out.push(c);
        }
    }
    out
}

impl LineArrangement {
    /// Build by incremental convex splitting. Coincident lines are merged.
    pub fn build(lines: &[Line], window: Window) -> Result<Self, ArrangementError> {
        for (i, l) in lines.iter().enumerate() {
            if !(l.normal.v().norm2() > zero()) {
                return Err(ArrangementError::DegenerateLine(i));
            }
        }
        let lines = dedup_lines(lines, 1e-28);
        let n = lines.len();
        let mut cells: Vec<(SignKey, Vec<Vec2>)> = vec![(SignKey::zeros(n), window.corners().to_vec())];
        let tol = real(SPLIT_TOL);
        for (i, l) in lines.iter().enumerate() {
            let mut next = Vec::with_capacity(cells.len() + 8);
            for (key, poly) in cells {
                let vals: Vec<Real> = poly.iter().map(|p| l.eval(*p)).collect();
                let has_pos = vals.iter().any(|v| *v > tol);
                let has_neg = vals.iter().any(|v| *v < -tol);
                match (has_pos, has_neg) {
                    (true, true) => {
                        let (pos, neg) = split_polygon(&poly, &vals, tol);
                        let mut kp = key.clone();
                        kp.set(i, true);
                        if pos.len() >= 3 {
                            next.push((kp, pos));
                        }
                        if neg.len() >= 3 {
                            next.push((key, neg));
                        }
                    }
                    (true, false) => {
                        let mut kp = key;
                        kp.set(i, true);
                        next.push((kp, poly));
                    }
                    _ => next.push((key, poly)),
                }
            }
            cells = next;
        }
        let mut out = Vec::with_capacity(cells.len());
        let mut index = HashMap::with_capacity(cells.len());
        for (key, polygon) in cells {
            if !(polygon_area(&polygon) > zero()) {
                continue;
            }
            let sample = centroid(&polygon);
            if index.contains_key(&key) {
                // numerically split twice; keep the first piece
                continue;
            }
            index.insert(key.clone(), out.len());
            out.push(Cell { key, polygon, sample });
        }
        Ok(LineArrangement {
            window,
            lines,
            cells: out,
            index,
        })
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn cell(&self, id: usize) -> &Cell {
        &self.cells[id]
    }

    pub fn cell_by_key(&self, key: &SignKey) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Sign vector of `z` and the lines it lies on.
    pub fn signs(&self, z: Vec2) -> (SignKey, Vec<usize>) {
        let tol = real(SPLIT_TOL);
        let mut key = SignKey::zeros(self.lines.len());
        let mut on = Vec::new();
        for (i, l) in self.lines.iter().enumerate() {
            let v = l.eval(z);
            if v.abs() <= tol {
                on.push(i);
            } else if v > zero() {
                key.set(i, true);
            }
        }
        (key, on)
    }

    pub fn locate(&self, z: Vec2) -> Location {
        if !self.window.contains(z) {
            return Location::Outside;
        }
        let (key, on) = self.signs(z);
        if !on.is_empty() {
            return Location::OnLines(on);
        }
        match self.index.get(&key) {
            Some(&c) => Location::Cell(c),
            // inside a sliver dropped as zero-area; treat as boundary
            None => Location::OnLines(Vec::new()),
        }
    }

    /// Cells whose closure contains `z` (one for interior points, several
    /// on lines).
    pub fn cells_around(&self, z: Vec2) -> Vec<usize> {
        if !self.window.contains(z) {
            return Vec::new();
        }
        let (key, on) = self.signs(z);
        if on.len() > 16 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for mask in 0u32..(1 << on.len()) {
            let mut k = key.clone();
            for (b, &i) in on.iter().enumerate() {
                k.set(i, mask >> b & 1 == 1);
            }
            if let Some(&c) = self.index.get(&k) {
                out.push(c);
            }
        }
        out
    }

    /// Upper bound on faces of `n` lines in general position.
    pub fn face_bound(n: usize) -> usize {
        1 + n + n * n.saturating_sub(1) / 2
    }
}

pub fn polygon_area(p: &[Vec2]) -> Real {
    let n = p.len();
    let mut a = zero();
    for i in 0..n {
        a += p[i].cross(p[(i + 1) % n]);
    }
    a * 0.5
}

pub fn centroid(p: &[Vec2]) -> Vec2 {
    let mut c = Vec2::ZERO;
    for q in p {
        c += *q;
    }
    c * (1.0 / p.len() as f64)
}

/// Sutherland-Hodgman split of a convex polygon by a line whose values at
/// the vertices are `vals`.
fn split_polygon(poly: &[Vec2], vals: &[Real], tol: Real) -> (Vec<Vec2>, Vec<Vec2>) {
    let n = poly.len();
    let mut pos = Vec::with_capacity(n + 1);
    let mut neg = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (p, vp) = (poly[i], vals[i]);
        let (q, vq) = (poly[(i + 1) % n], vals[(i + 1) % n]);
        let p_on = vp.abs() <= tol;
        if p_on {
            pos.push(p);
            neg.push(p);
        } else if vp > zero() {
            pos.push(p);
        } else {
            neg.push(p);
        }
        let q_on = vq.abs() <= tol;
        if !p_on && !q_on && (vp > zero()) != (vq > zero()) {
            let t = vp / (vp - vq);
            let x = p + (q - p) * t;
            pos.push(x);
            neg.push(x);
        }
    }
    (pos, neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitVector;

    fn l(px: f64, py: f64, dx: f64, dy: f64) -> Line {
        Line::through(Vec2::from_f64(px, py), UnitVector::from_f64(dx, dy).unwrap())
    }

    #[test]
    fn two_crossing_lines_make_four_cells() {
        let a = LineArrangement::build(&[l(0.5, 0.5, 1.0, 0.0), l(0.5, 0.5, 0.0, 1.0)], Window::unit()).unwrap();
        assert_eq!(a.cells().len(), 4);
        let total: Real = a.cells().iter().map(|c| c.area()).fold(zero(), |s, x| s + x);
        assert!((total - 1.0).abs() < real(1e-28));
    }

    #[test]
    fn duplicates_are_merged() {
        let a = LineArrangement::build(
            &[l(0.5, 0.5, 1.0, 0.0), l(0.2, 0.5, -1.0, 0.0), l(0.5, 0.25, 1.0, 0.0)],
            Window::unit(),
        )
        .unwrap();
        assert_eq!(a.lines().len(), 2);
        assert_eq!(a.cells().len(), 3);
    }

    #[test]
    fn locate_points() {
        let a = LineArrangement::build(&[l(0.5, 0.5, 1.0, 0.0)], Window::unit()).unwrap();
        assert!(matches!(a.locate(Vec2::from_f64(0.3, 0.7)), Location::Cell(_)));
        assert_eq!(a.locate(Vec2::from_f64(0.3, 0.5)), Location::OnLines(vec![0]));
        assert_eq!(a.locate(Vec2::from_f64(3.0, 0.5)), Location::Outside);
        assert_eq!(a.cells_around(Vec2::from_f64(0.3, 0.5)).len(), 2);
    }

    #[test]
    fn concurrent_lines() {
        let ls = [l(0.5, 0.5, 1.0, 0.0), l(0.5, 0.5, 0.0, 1.0), l(0.5, 0.5, 1.0, 1.0)];
        let a = LineArrangement::build(&ls, Window::unit()).unwrap();
        assert_eq!(a.cells().len(), 6);
    }
}
