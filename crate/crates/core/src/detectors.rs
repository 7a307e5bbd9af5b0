//! Chord-slope non-differentiability detectors and explicit witnesses.
//!
//! `zeta(f, z, eps, e)` is the largest difference of slopes of `f` along two
//! chords parallel to `e`, both through `z`, of length at most `eps`.
//! `upsilon` maximises it over a finite direction set and is therefore a
//! lower bound for the supremum over all directions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arrangement::{chord_slope_extrema, PiecewiseAffine};
use crate::construction::Construction;
use crate::geometry::{cone_contains, UnitVector, Vec2};
use crate::real::{pow2, real, to_f64, Real};
use crate::report::CheckRow;

#[derive(Debug, Error, PartialEq)]
pub enum DetectorError {
    #[error("direction budget {0} is below 8")]
    Budget(usize),
    #[error("scale sequence must be positive and strictly decreasing")]
    Scales,
    #[error("stage {0} does not exist")]
    NoSuchStage(usize),
    #[error("point is not inside strip {0}")]
    OutsideStrip(usize),
    #[error("point lies in a guard ball of stage {0}")]
    Guarded(usize),
    #[error("direction lies in the double cone around w of width 3 sqrt(eta)")]
    DirectionInCone,
    #[error("level {actual} exceeds the requested ceiling {ceiling}")]
    LevelAboveCeiling { actual: u32, ceiling: u32 },
    #[error("no admissible tail stage below depth {0}: increase K or eps")]
    NoStage(usize),
}

/// Two chords through `z` parallel to `e`: `[x, x + t e]` and `[y, y + s e]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChordWitness {
    pub z: Vec2,
    pub e: UnitVector,
    pub x: Vec2,
    pub y: Vec2,
    pub t: Real,
    pub s: Real,
    pub defect: Real,
}

fn slope<F: PiecewiseAffine + ?Sized>(f: &F, p: Vec2, len: Real, e: UnitVector) -> Real {
    (f.value(p + e.v() * len) - f.value(p)) / len
}

impl ChordWitness {
    pub fn new<F: PiecewiseAffine + ?Sized>(f: &F, z: Vec2, e: UnitVector, x: Vec2, t: Real, y: Vec2, s: Real) -> Self {
        let mut w = ChordWitness {
            z,
            e,
            x,
            y,
            t,
            s,
            defect: Real::ZERO,
        };
        w.defect = w.defect_of(f);
        w
    }

    /// Slope difference of `f` on this witness's chords.
    pub fn defect_of<F: PiecewiseAffine + ?Sized>(&self, f: &F) -> Real {
        (slope(f, self.x, self.t, self.e) - slope(f, self.y, self.s, self.e)).abs()
    }

    pub fn min_len(&self) -> Real {
        self.t.abs().min(self.s.abs())
    }

    /// `z` lies on both chords up to `tol` (relative to the chord length).
    pub fn contains_z(&self, tol: f64) -> bool {
        let on = |p: Vec2, len: Real| {
            let d = self.z - p;
            let along = d.dot(self.e.v()) / len;
            let off = d.cross(self.e.v()).abs();
            along >= real(-tol) && along <= real(1.0 + tol) && off <= len.abs() * tol
        };
        on(self.x, self.t) && on(self.y, self.s)
    }

    pub fn row(&self, function: &str, depth: usize) -> WitnessRow {
        WitnessRow {
            z: self.z.to_f64(),
            e: self.e.v().to_f64(),
            x: self.x.to_f64(),
            y: self.y.to_f64(),
            s: to_f64(self.s),
            t: to_f64(self.t),
            defect: to_f64(self.defect),
            function: function.to_string(),
            depth,
        }
    }
}

/// Serialised witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessRow {
    pub z: [f64; 2],
    pub e: [f64; 2],
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub s: f64,
    pub t: f64,
    pub defect: f64,
    pub function: String,
    pub depth: usize,
}

/// Exact `zeta` for a piecewise-affine `f`, with the chords attaining it.
pub fn zeta<F: PiecewiseAffine + ?Sized>(f: &F, z: Vec2, eps: Real, e: UnitVector) -> (Real, ChordWitness) {
    let ex = chord_slope_extrema(f, z, e, eps);
    let w = ChordWitness {
        z,
        e,
        x: z + e.v() * ex.max.a,
        t: ex.max.b - ex.max.a,
        y: z + e.v() * ex.min.a,
        s: ex.min.b - ex.min.a,
        defect: ex.spread(),
    };
    (w.defect, w)
}

/// `budget` equally spaced directions on the circle plus `extra` and their
/// negatives.
pub fn direction_set(budget: usize, extra: &[UnitVector]) -> Result<Vec<UnitVector>, DetectorError> {
    if budget < 8 {
        return Err(DetectorError::Budget(budget));
    }
    let mut out: Vec<UnitVector> = (0..budget)
        .map(|i| UnitVector::from_angle(std::f64::consts::TAU * i as f64 / budget as f64))
        .collect();
    for e in extra {
        out.push(*e);
        out.push(-*e);
    }
    Ok(out)
}

/// `w`, `w_perp` and every strip direction and its normal.
pub fn construction_directions(c: &Construction) -> Vec<UnitVector> {
    let mut out = vec![c.w(), c.w().perp()];
    for st in c.stages() {
        out.push(st.strip.dir);
        out.push(st.strip.dir.perp());
    }
    out
}

#[derive(Clone, Debug)]
pub struct UpsilonReport {
    /// Lower bound for the supremum over all directions.
    pub value: Real,
    pub witness: ChordWitness,
    /// Directions attaining `value`.
    pub critical: Vec<UnitVector>,
    pub directions: usize,
}

pub fn upsilon<F: PiecewiseAffine + Sync + ?Sized>(f: &F, z: Vec2, eps: Real, dirs: &[UnitVector]) -> UpsilonReport {
    let all: Vec<(Real, ChordWitness)> = dirs.par_iter().map(|&e| zeta(f, z, eps, e)).collect();
    let mut best = all[0];
    for r in &all[1..] {
        if r.0 > best.0 {
            best = *r;
        }
    }
    let tol = best.0.abs() * 1e-24;
    let critical = all.iter().filter(|r| r.0 >= best.0 - tol).map(|r| r.1.e).collect();
    UpsilonReport {
        value: best.0,
        witness: best.1,
        critical,
        directions: dirs.len(),
    }
}

/// `start, start*ratio, ...` down to (and including) the first value at or
/// below `floor`.
pub fn scale_sequence(start: f64, floor: f64, ratio: f64) -> Vec<Real> {
    let mut out = vec![real(start)];
    let mut e = start;
    while e > floor && out.len() < 4096 {
        e *= ratio;
        out.push(real(e.max(floor)));
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    DerivativeConsistent,
    /// Not differentiable at the resolved scales; carries the largest
    /// `zeta` over the finer half of the sequence.
    NonDifferentiable {
        limsup: Real,
    },
}

#[derive(Clone, Debug)]
pub struct Probe {
    pub scales: Vec<Real>,
    pub zeta: Vec<Real>,
    pub verdict: Verdict,
}

pub fn directional_derivative_probe<F: PiecewiseAffine + ?Sized>(
    f: &F,
    z: Vec2,
    e: UnitVector,
    scales: &[Real],
    tol: Real,
) -> Result<Probe, DetectorError> {
    if scales.is_empty() || scales.iter().any(|s| !(*s > Real::ZERO)) || scales.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(DetectorError::Scales);
    }
    let zs: Vec<Real> = scales.iter().map(|&eps| zeta(f, z, eps, e).0).collect();
    let last = *zs.last().unwrap();
    let verdict = if last <= tol {
        Verdict::DerivativeConsistent
    } else {
        let tail = &zs[zs.len() / 2..];
        Verdict::NonDifferentiable {
            limsup: tail.iter().copied().fold(Real::ZERO, Real::max),
        }
    };
    Ok(Probe {
        scales: scales.to_vec(),
        zeta: zs,
        verdict,
    })
}

/// Lower bound on the defect left after adding any `g` with
/// `|g|_inf <= theta`.
pub fn perturbation_stability(w: &ChordWitness, theta: Real) -> Real {
    w.defect - theta * 4.0 / w.min_len()
}

/// `v` is admissible for the strip witnesses: outside the double cone
/// `|<v, w>| >= 1 - 3 sqrt(eta)`.
pub fn admissible_direction(c: &Construction, v: UnitVector) -> bool {
    let width = c.eta().sqrt() * 3.0;
    !cone_contains(v.v(), c.w(), width, true).expect("unit vector")
}

/// Witness for `phi_k` at a strip point: the chords `[u, u + t1 v]` and
/// `[u, u + 2 t1 v]` from the axis point `u` with `z` on the first one.
#[derive(Clone, Debug)]
pub struct PhiWitness {
    pub k: usize,
    pub witness: ChordWitness,
    pub checks: Vec<CheckRow>,
}

pub fn nondiff_witness_phi(c: &Construction, k: usize, z: Vec2, v: UnitVector) -> Result<PhiWitness, DetectorError> {
    if k == 0 || k > c.depth() {
        return Err(DetectorError::NoSuchStage(k));
    }
    let st = c.stage(k);
    if !st.strip.contains(z) {
        return Err(DetectorError::OutsideStrip(k));
    }
    if st.guarded(z) {
        return Err(DetectorError::Guarded(k));
    }
    if !admissible_direction(c, v) {
        return Err(DetectorError::DirectionInCone);
    }
    let n = st.strip.dir.perp();
    let o = st.strip.signed_offset(z);
    let mut v = v;
    let mut vn = v.dot(n.v());
    // z = u + (o / vn) v; orient v so that z lies ahead of u
    if o / vn < Real::ZERO {
        v = -v;
        vn = -vn;
    }
    let u = z - v.v() * (o / vn);
    let rho = st.rho();
    let t1 = rho / vn.abs();
    let t2 = t1 * 2.0;
    let view = c.phi_view(k);
    let witness = ChordWitness::new(&view, z, v, u, t1, u, t2);
    let sq = c.eta().sqrt();
    let bar = to_f64(rho) * 1e-26;
    let checks = vec![
        CheckRow::ge("phi-witness.t1-lower", to_f64(t1), to_f64(rho), bar),
        CheckRow::le("phi-witness.t1-upper", to_f64(t1), to_f64(rho / sq), bar),
        CheckRow::close("phi-witness.t2", to_f64(t2), to_f64(t1 * 2.0), 0.0),
        CheckRow {
            id: "phi-witness.defect".into(),
            lhs: to_f64(witness.defect),
            rhs: to_f64(sq * 0.5),
            pass: witness.defect >= sq * 0.5,
            error_bar: 0.0,
        },
    ];
    Ok(PhiWitness { k, witness, checks })
}

/// Witness for `h_K`: the `phi_k` chords of a tail stage `k`, re-evaluated on
/// the partial sum.
#[derive(Clone, Debug)]
pub struct HWitness {
    pub k: usize,
    pub depth: usize,
    /// Level used in the bound.
    pub m: u32,
    pub witness: ChordWitness,
    /// `2^-m sqrt(eta) / 4`.
    pub bound: Real,
    /// Largest possible change of the defect from stages beyond the depth:
    /// `(4/rho_k) sum_{j>K} 2^-m 2 rho_j/(1-eta)`.
    pub slack: Real,
    /// `2^-m sqrt(eta) / 16`, the allowance for that slack.
    pub slack_limit: Real,
}

impl HWitness {
    /// `defect >= bound - slack` and `slack <= slack_limit`.
    pub fn checks(&self) -> Vec<CheckRow> {
        vec![
            CheckRow {
                id: "h-witness.defect".into(),
                lhs: to_f64(self.witness.defect),
                rhs: to_f64(self.bound - self.slack),
                pass: self.witness.defect >= self.bound - self.slack,
                error_bar: 0.0,
            },
            CheckRow {
                id: "h-witness.slack".into(),
                lhs: to_f64(self.slack),
                rhs: to_f64(self.slack_limit),
                pass: self.slack <= self.slack_limit,
                error_bar: 0.0,
            },
        ]
    }
}

/// Pick the deepest tail stage `k <= depth` whose strip contains `z`, whose
/// guard balls miss it, with `2 rho_k / sqrt(eta) < eps` and
/// `m_{k-1}(z) = m_depth(z)`, and lift the `phi_k` witness to `h_depth`.
/// `ceiling`, when given, is the level `m` of the bound and must be at
/// least `m_depth(z)`.
pub fn nondiff_witness_h(
    c: &Construction,
    z: Vec2,
    depth: usize,
    ceiling: Option<u32>,
    v: UnitVector,
    eps: Real,
) -> Result<HWitness, DetectorError> {
    let depth = depth.min(c.depth());
    if !admissible_direction(c, v) {
        return Err(DetectorError::DirectionInCone);
    }
    let tr = c.trace(z, depth);
    let m_top = tr.m();
    let m = match ceiling {
        Some(m) if m < m_top => {
            return Err(DetectorError::LevelAboveCeiling {
                actual: m_top,
                ceiling: m,
            })
        }
        Some(m) => m,
        None => m_top,
    };
    let sq = c.eta().sqrt();
    let lo = depth.div_ceil(2).max(1);
    let k = (lo..=depth)
        .rev()
        .find(|&k| {
            let p = tr.at(k);
            p.in_strip && !p.guarded && p.m_prev == m_top && c.stage(k).rho() * 2.0 / sq < eps
        })
        .ok_or(DetectorError::NoStage(depth))?;
    let phi = nondiff_witness_phi(c, k, z, v)?;
    let view = c.h_view(depth);
    let w = phi.witness;
    let witness = ChordWitness::new(&view, z, w.e, w.x, w.t, w.y, w.s);
    let scale = pow2(-(m as i32));
    let beyond = c.schedule().rho_tail(depth);
    Ok(HWitness {
        k,
        depth,
        m,
        witness,
        bound: scale * sq / 4.0,
        slack: beyond * scale * 8.0 / ((real(1.0) - c.eta()) * c.stage(k).rho()),
        slack_limit: scale * sq / 16.0,
    })
}

/// Accumulation-direction check behind "a large `upsilon` at all scales
/// gives one direction with large `zeta`".
///
/// For each scale the `upsilon` witness direction is recorded (folded to a
/// half circle; `zeta` is symmetric under `e -> -e`). The accumulation
/// direction is taken as the recorded direction closest to the others
/// over the finer half of the scales. At every scale two rows are emitted:
/// - `accumulation`: `zeta(u) > tau/4`;
/// - `accumulation-lip`: `zeta(u) >= tau/4 - 10 lip |e_i - u|`, the form the
///   limit argument actually controls at a finite scale.
///
/// This is a heuristic desk check of a limit statement: it uses the
/// recorded witnesses and does not search subsequences.
pub fn accumulation_check<F: PiecewiseAffine + Sync + ?Sized>(
    f: &F,
    z: Vec2,
    scales: &[Real],
    dirs: &[UnitVector],
    tau: Real,
    lip: Real,
) -> Vec<CheckRow> {
    let fold = |e: UnitVector| {
        let v = e.v();
        if v.y < Real::ZERO || (v.y == Real::ZERO && v.x < Real::ZERO) {
            -e
        } else {
            e
        }
    };
    let recorded: Vec<(Real, UnitVector)> = scales
        .iter()
        .map(|&eps| {
            let r = upsilon(f, z, eps, dirs);
            (r.value, fold(r.witness.e))
        })
        .collect();
    let mut rows = Vec::new();
    if recorded.iter().any(|r| !(r.0 > tau)) {
        rows.push(CheckRow {
            id: "accumulation.premise".into(),
            lhs: recorded.iter().map(|r| to_f64(r.0)).fold(f64::INFINITY, f64::min),
            rhs: to_f64(tau),
            pass: false,
            error_bar: 0.0,
        });
        return rows;
    }
    let fine = &recorded[recorded.len() / 2..];
    let spread = |u: UnitVector| fine.iter().map(|r| to_f64((r.1.v() - u.v()).norm())).sum::<f64>();
    let u = fine
        .iter()
        .map(|r| r.1)
        .min_by(|a, b| spread(*a).total_cmp(&spread(*b)))
        .expect("non-empty");
    for (i, &eps) in scales.iter().enumerate() {
        let zu = zeta(f, z, eps, u).0;
        let gap = (recorded[i].1.v() - u.v()).norm();
        rows.push(CheckRow {
            id: format!("accumulation[{i}]"),
            lhs: to_f64(zu),
            rhs: to_f64(tau / 4.0),
            pass: zu > tau / 4.0,
            error_bar: 0.0,
        });
        let rhs = tau / 4.0 - lip * gap * 10.0;
        rows.push(CheckRow {
            id: format!("accumulation-lip[{i}]"),
            lhs: to_f64(zu),
            rhs: to_f64(rhs),
            pass: zu >= rhs,
            error_bar: 0.0,
        });
    }
    rows
}
