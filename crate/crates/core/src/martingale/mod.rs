//! Conditional expectations on the finite partitions of a curve
//! filtration, and the processes built from them.
//!
//! Two reference measures are used: arc length, and the directional
//! measure with density `<gamma', v>` normalised to mass one. Under the
//! latter the slope ratio of the mean tangent is a martingale.

mod checks;

use std::io::Write;

use rayon::prelude::*;

use crate::curves::{Atom, Curve, CurveError, Filtration, Span, PRECONDITION_GRID};
use crate::geometry::{UnitVector, Vec2};
use crate::real::{to_f64, Real};
use crate::report::{fmt_f64, write_table, CheckRow};

pub use checks::{
    alternating_sum_check, alternating_sums, der_grow_diagnostic, doob_tail_check, AlternatingReport, DerGrowBlock,
    DoobReport,
};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MartingaleError {
    #[error("<gamma', v> >= c > 0 fails at t = {t} (min {min})")]
    NotPositive { t: f64, min: f64 },
    #[error("level {0} is beyond the sample")]
    Level(usize),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// Positivity data of a direction along a curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction {
    pub v: UnitVector,
    /// Minimum of `<gamma', v>` over the precondition grid.
    pub c: Real,
    /// `K = int_I <gamma', v>`, the normalisation of the directional measure.
    pub total: Real,
}

impl Direction {
    pub fn new(curve: &Curve, v: UnitVector) -> Result<Self, MartingaleError> {
        let (c, at) = curve.min_dot(v, PRECONDITION_GRID);
        if !(c > Real::ZERO) {
            return Err(MartingaleError::NotPositive {
                t: to_f64(at),
                min: to_f64(c),
            });
        }
        let total = v.dot(curve.point_at(curve.end()) - curve.point_at(curve.start()));
        Ok(Direction { v, c, total })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Measure {
    Lebesgue,
    /// `<gamma', v> dt / K`.
    Directional(Direction),
}

impl Measure {
    /// Exact mass of a union of spans.
    pub fn mass_of(&self, disp: Vec2, length: Real) -> Real {
        match self {
            Measure::Lebesgue => length,
            Measure::Directional(d) => d.v.dot(disp) / d.total,
        }
    }

    pub fn atom_mass(&self, a: &Atom) -> Real {
        self.mass_of(a.disp, a.length)
    }

    fn density(&self, tangent: Vec2) -> Real {
        match self {
            Measure::Lebesgue => Real::ONE,
            Measure::Directional(d) => d.v.dot(tangent) / d.total,
        }
    }
}

/// `mu^v` of a union of spans; one on the whole curve.
pub fn mu_v(curve: &Curve, v: UnitVector, spans: &[Span]) -> Result<Real, MartingaleError> {
    let d = Direction::new(curve, v)?;
    Ok(spans.iter().map(|s| v.dot(s.disp())).sum::<Real>() / d.total)
}

/// Values of a process, one per atom and level. `None` marks atoms of zero
/// mass, where the conditional expectation is undefined.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ProcessSample {
    pub levels: Vec<Vec<Option<Real>>>,
}

impl ProcessSample {
    pub fn value(&self, p: usize, atom: usize) -> Option<Real> {
        self.levels.get(p).and_then(|l| l.get(atom).copied().flatten())
    }

    /// `sqrt(sum m(A) X(A)^2)` at level `p`.
    pub fn l2(&self, filt: &Filtration, p: usize, m: &Measure) -> Real {
        let sq: Real = filt.levels[p]
            .atoms
            .iter()
            .zip(&self.levels[p])
            .filter_map(|(a, x)| x.map(|x| m.atom_mass(a) * x * x))
            .sum();
        sq.max(Real::ZERO).sqrt()
    }

    pub fn sup(&self, p: usize) -> Real {
        self.levels[p]
            .iter()
            .flatten()
            .fold(Real::ZERO, |acc, x| acc.max(x.abs()))
    }
}

const PANELS: usize = 8;

/// Level-`p` conditional expectation of `x(z, unit tangent)` under `m`.
pub fn conditional_expectation(
    curve: &Curve,
    filt: &Filtration,
    p: usize,
    m: &Measure,
    x: &(dyn Fn(Vec2, Vec2) -> Real + Sync),
) -> Result<Vec<Option<Real>>, MartingaleError> {
    let level = filt.level(p)?;
    let out = level
        .atoms
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            let (mut num, mut den) = (Real::ZERO, Real::ZERO);
            for &pc in &a.pieces {
                let s = &filt.pieces[pc].span;
                num += curve.integrate(s.a, s.b, PANELS, &mut |z, t| x(z, t) * m.density(t));
                den += curve.integrate(s.a, s.b, PANELS, &mut |_, t| m.density(t));
            }
            if den > Real::ZERO {
                Some(num / den)
            } else {
                log::warn!("level {p} atom {i} has zero mass; dropped");
                None
            }
        })
        .collect();
    Ok(out)
}

/// Componentwise [`conditional_expectation`] of the unit tangent.
pub fn mean_tangent(
    curve: &Curve,
    filt: &Filtration,
    p: usize,
    m: &Measure,
) -> Result<Vec<Option<Vec2>>, MartingaleError> {
    let xs = conditional_expectation(curve, filt, p, m, &|_, t| t.x)?;
    let ys = conditional_expectation(curve, filt, p, m, &|_, t| t.y)?;
    Ok(xs.into_iter().zip(ys).map(|(x, y)| Some(Vec2::new(x?, y?))).collect())
}

/// Conditional expectations of `x` at every level of the filtration.
pub fn sample_process(
    curve: &Curve,
    filt: &Filtration,
    m: &Measure,
    x: &(dyn Fn(Vec2, Vec2) -> Real + Sync),
) -> Result<ProcessSample, MartingaleError> {
    let levels = (0..filt.levels.len())
        .map(|p| conditional_expectation(curve, filt, p, m, x))
        .collect::<Result<_, _>>()?;
    Ok(ProcessSample { levels })
}

/// `<beta_p, v_perp> / <beta_p, v>` on every atom, from exact atom
/// displacements.
pub fn beta_ratio_process(filt: &Filtration, v: UnitVector) -> ProcessSample {
    let vp = v.perp();
    let levels = filt
        .levels
        .iter()
        .map(|l| {
            l.atoms
                .iter()
                .map(|a| {
                    let den = v.dot(a.disp);
                    (den > Real::ZERO).then(|| vp.dot(a.disp) / den)
                })
                .collect()
        })
        .collect();
    ProcessSample { levels }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Residuals {
    /// Per level `p < top`, per atom: `|E[X_{p+1} | level p] - X_p|`.
    pub levels: Vec<Vec<Real>>,
    pub max: Real,
}

/// Conditional expectation of fine values on the coarse atoms, via the
/// ancestor map between two levels.
pub fn project(
    filt: &Filtration,
    m: &Measure,
    fine: usize,
    fine_vals: &[Option<Real>],
    coarse: usize,
) -> Vec<Option<Real>> {
    let n = filt.levels[coarse].atoms.len();
    let (mut num, mut den) = (vec![Real::ZERO; n], vec![Real::ZERO; n]);
    for (i, a) in filt.levels[fine].atoms.iter().enumerate() {
        if let Some(x) = fine_vals[i] {
            let j = filt.ancestor(fine, i, coarse);
            let w = m.atom_mass(a);
            num[j] += w * x;
            den[j] += w;
        }
    }
    num.into_iter()
        .zip(den)
        .map(|(a, b)| (b > Real::ZERO).then(|| a / b))
        .collect()
}

/// Largest one-step martingale defect over levels and atoms.
pub fn martingale_residual(x: &ProcessSample, filt: &Filtration, m: &Measure) -> Residuals {
    let top = x.levels.len().min(filt.levels.len());
    let mut levels = Vec::new();
    let mut max = Real::ZERO;
    for p in 0..top.saturating_sub(1) {
        let proj = project(filt, m, p + 1, &x.levels[p + 1], p);
        let r: Vec<Real> = proj
            .iter()
            .zip(&x.levels[p])
            .map(|(e, v)| match (e, v) {
                (Some(e), Some(v)) => (*e - *v).abs(),
                _ => Real::ZERO,
            })
            .collect();
        max = r.iter().fold(max, |acc, x| acc.max(*x));
        levels.push(r);
    }
    Residuals { levels, max }
}

/// Residual check row with the quadrature error of the filtration.
pub fn residual_row(id: &str, r: &Residuals, filt: &Filtration) -> CheckRow {
    CheckRow::le(id, to_f64(r.max), 0.0, 1e-8 + filt.error_bar)
}

/// `level,atom,value,residual`; the residual column is blank on the top
/// level and on dropped atoms.
pub fn write_process_csv<W: Write>(out: W, x: &ProcessSample, r: &Residuals) -> csv::Result<()> {
    let mut rows = Vec::new();
    for (p, lvl) in x.levels.iter().enumerate() {
        for (i, v) in lvl.iter().enumerate() {
            let res = r.levels.get(p).map(|l| fmt_f64(to_f64(l[i]))).unwrap_or_default();
            rows.push(vec![
                p.to_string(),
                i.to_string(),
                v.map(|v| fmt_f64(to_f64(v))).unwrap_or_default(),
                res,
            ]);
        }
    }
    write_table(out, &["level", "atom", "value", "residual"], &rows)
}

/// `check_id,lhs,rhs,pass`.
pub fn write_check_csv<W: Write>(out: W, rows: &[CheckRow]) -> csv::Result<()> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.id.clone(), fmt_f64(r.lhs), fmt_f64(r.rhs), r.pass.to_string()])
        .collect();
    write_table(out, &["check_id", "lhs", "rhs", "pass"], &rows)
}
