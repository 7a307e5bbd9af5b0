use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::curve::{Curve, CurvePos};
use super::preimage::{
    clip_polygon, crossings, label_pieces, polygon_area2, Boundary, CrossingConfig, Region, Span, PRECONDITION_GRID,
};
use super::CurveError;
use crate::construction::Construction;
use crate::geometry::{Cone, Line, Vec2};
use crate::real::{pow2, real, to_f64, Real};
use crate::report::CheckRow;

/// How level-`p` atoms are formed from the labelled pieces.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AtomMode {
    /// Maximal parameter intervals on which the label is constant.
    #[default]
    Interval,
    /// Full level sets of the label, possibly disconnected.
    LevelSet,
}

/// Piece of the curve on which every strip side is constant.
#[derive(Clone, Debug)]
pub struct Piece {
    pub span: Span,
    /// Per stage: 0 inside the strip, otherwise the side.
    pub sides: Vec<i8>,
}

impl Piece {
    /// Strips containing the piece, in increasing order.
    pub fn strips(&self) -> impl Iterator<Item = usize> + '_ {
        self.sides
            .iter()
            .enumerate()
            .filter(|(_, s)| **s == 0)
            .map(|(i, _)| i + 1)
    }

    /// The first `p` strips hit, `None` once they run out.
    pub fn key(&self, p: usize) -> Vec<Option<usize>> {
        let mut it = self.strips();
        (0..p).map(|_| it.next()).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Atom {
    pub key: Vec<Option<usize>>,
    /// Indices into [`Filtration::pieces`], in curve order.
    pub pieces: Vec<usize>,
    pub length: Real,
    pub disp: Vec2,
}

impl Atom {
    /// Mean tangent over the atom.
    pub fn beta(&self) -> Vec2 {
        self.disp * (Real::ONE / self.length)
    }

    /// Stage of the last strip in the key.
    pub fn last_strip(&self) -> Option<usize> {
        self.key.last().copied().flatten()
    }
}

#[derive(Clone, Debug)]
pub struct CurvePartition {
    pub level: usize,
    pub atoms: Vec<Atom>,
    /// Atom of each level-`p - 1` parent; empty at level 0.
    pub parent: Vec<usize>,
    pub piece_atom: Vec<usize>,
    /// Arc-length positions where the atom changes, with both ends.
    pub breakpoints: Vec<Real>,
}

#[derive(Clone, Debug)]
pub struct Filtration {
    pub mode: AtomMode,
    pub length: Real,
    pub disp: Vec2,
    pub pieces: Vec<Piece>,
    pub levels: Vec<CurvePartition>,
    pub crossings: usize,
    pub near_tangent: usize,
    pub error_bar: f64,
}

impl Filtration {
    pub fn level(&self, p: usize) -> Result<&CurvePartition, CurveError> {
        self.levels.get(p).ok_or(CurveError::Level(p))
    }

    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    /// Level-`q` ancestor of atom `a` at level `p >= q`.
    pub fn ancestor(&self, p: usize, mut a: usize, q: usize) -> usize {
        for l in (q + 1..=p).rev() {
            a = self.levels[l].parent[a];
        }
        a
    }

    /// Every atom lies inside one atom of the previous level.
    pub fn is_nested(&self) -> bool {
        self.levels.windows(2).all(|w| {
            w[1].atoms
                .iter()
                .enumerate()
                .all(|(i, a)| a.pieces.iter().all(|&pc| w[0].piece_atom[pc] == w[1].parent[i]))
        })
    }
}

/// Cut the curve along every strip boundary of the construction.
pub fn strip_pieces(
    c: &Construction,
    curve: &Curve,
    cfg: &CrossingConfig,
) -> Result<(Vec<Piece>, usize, usize), CurveError> {
    let mut bnds = Vec::with_capacity(2 * c.depth());
    for st in c.stages() {
        bnds.extend(st.strip.boundaries().into_iter().map(Boundary::Line));
    }
    let cr = crossings(curve, &bnds, cfg)?;
    let cuts: Vec<CurvePos> = cr.iter().map(|x| x.pos).collect();
    let pieces = label_pieces(curve, &cuts, |z| {
        c.stages()
            .iter()
            .map(|st| {
                let o = st.strip.signed_offset(z);
                if o.abs() < st.strip.half_width {
                    0
                } else if o > Real::ZERO {
                    1
                } else {
                    -1
                }
            })
            .collect::<Vec<i8>>()
    })
    .into_iter()
    .map(|(span, sides)| Piece { span, sides })
    .collect();
    Ok((
        pieces,
        cr.len(),
        cr.iter().filter(|x| x.transversality < cfg.tangency).count(),
    ))
}

/// Partitions of the curve for levels `0..=p_max`.
pub fn build_filtration(
    c: &Construction,
    curve: &Curve,
    p_max: usize,
    mode: AtomMode,
    cfg: &CrossingConfig,
) -> Result<Filtration, CurveError> {
    let (pieces, ncross, near) = strip_pieces(c, curve, cfg)?;
    let mut levels: Vec<CurvePartition> = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let mut atoms: Vec<Atom> = Vec::new();
        let mut piece_atom = Vec::with_capacity(pieces.len());
        let mut seen: HashMap<Vec<Option<usize>>, usize> = HashMap::new();
        for (i, pc) in pieces.iter().enumerate() {
            let key = pc.key(p);
            let idx = match mode {
                AtomMode::Interval => match atoms.last() {
                    Some(a) if a.key == key => atoms.len() - 1,
                    _ => {
                        atoms.push(new_atom(key));
                        atoms.len() - 1
                    }
                },
                AtomMode::LevelSet => *seen.entry(key.clone()).or_insert_with(|| {
                    atoms.push(new_atom(key));
                    atoms.len() - 1
                }),
            };
            let a = &mut atoms[idx];
            a.pieces.push(i);
            a.length += pc.span.len;
            a.disp += pc.span.disp();
            piece_atom.push(idx);
        }
        let parent = if p == 0 {
            Vec::new()
        } else {
            let prev = &levels[p - 1].piece_atom;
            atoms.iter().map(|a| prev[a.pieces[0]]).collect()
        };
        let mut breakpoints = vec![Real::ZERO];
        for i in 1..pieces.len() {
            if piece_atom[i] != piece_atom[i - 1] {
                breakpoints.push(pieces[i].span.t0);
            }
        }
        breakpoints.push(curve.length());
        levels.push(CurvePartition {
            level: p,
            atoms,
            parent,
            piece_atom,
            breakpoints,
        });
    }
    let root = &levels[0].atoms[0];
    Ok(Filtration {
        mode,
        length: root.length,
        disp: root.disp,
        error_bar: ncross as f64 * 1e-28 * to_f64(curve.length()).max(1.0) + curve.quad_err(),
        pieces,
        levels,
        crossings: ncross,
        near_tangent: near,
    })
}

fn new_atom(key: Vec<Option<usize>>) -> Atom {
    Atom {
        key,
        pieces: Vec::new(),
        length: Real::ZERO,
        disp: Vec2::ZERO,
    }
}

/// A cell of the stage-`k` strip cut by the earlier strips: the side of
/// each earlier strip, 0 meaning inside it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellPattern {
    pub k: usize,
    pub sides: Vec<i8>,
}

impl CellPattern {
    /// Index of strip `k` among the strips containing the cell.
    pub fn p(&self) -> usize {
        1 + self.sides.iter().filter(|s| **s == 0).count()
    }

    pub fn contains_piece(&self, piece: &Piece) -> bool {
        piece.sides[self.k - 1] == 0 && piece.sides[..self.k - 1] == self.sides[..]
    }

    pub fn region(&self, c: &Construction) -> Region {
        let mut sides = Vec::new();
        let mut strip_sides = |j: usize, side: i8| {
            let [hi, lo] = half_planes(c, j);
            match side {
                0 => sides.extend([hi, lo]),
                1 => sides.push(flip(&hi)),
                _ => sides.push(flip(&lo)),
            }
        };
        strip_sides(self.k, 0);
        for (j, s) in self.sides.iter().enumerate() {
            strip_sides(j + 1, *s);
        }
        Region::Convex { sides }
    }
}

/// Sides of strip `j` as `l < 0` half-planes: below the upper edge, above
/// the lower edge.
fn half_planes(c: &Construction, j: usize) -> [Line; 2] {
    match Region::strip(&c.stage(j).strip) {
        Region::Convex { sides } => [sides[0], sides[1]],
        Region::Ball { .. } => unreachable!(),
    }
}

fn flip(l: &Line) -> Line {
    Line::new(-l.normal, -l.offset)
}

/// Strip cells of stage `k` actually visited by the curve.
pub fn visited_cells(filt: &Filtration, k: usize) -> Vec<CellPattern> {
    let set: BTreeSet<CellPattern> = filt
        .pieces
        .iter()
        .filter(|pc| pc.sides.get(k - 1) == Some(&0))
        .map(|pc| CellPattern {
            k,
            sides: pc.sides[..k - 1].to_vec(),
        })
        .collect();
    set.into_iter().collect()
}

/// Every nonempty cell of strip `k` in the plane.
pub fn stage_components(c: &Construction, k: usize) -> Vec<CellPattern> {
    let sk = half_planes(c, k);
    let mut pts: Vec<Vec2> = c.window().corners().to_vec();
    for j in 1..k {
        for a in &sk {
            for b in &half_planes(c, j) {
                if let Some(z) = a.intersect(b) {
                    pts.push(z);
                }
            }
        }
    }
    let (mut lo, mut hi) = (pts[0], pts[0]);
    for z in &pts {
        lo = Vec2::new(lo.x.min(z.x), lo.y.min(z.y));
        hi = Vec2::new(hi.x.max(z.x), hi.y.max(z.y));
    }
    let m = real(1.0);
    let (lo, hi) = (lo - Vec2::new(m, m), hi + Vec2::new(m, m));
    let mut poly = vec![lo, Vec2::new(hi.x, lo.y), hi, Vec2::new(lo.x, hi.y)];
    for l in &sk {
        poly = clip_polygon(&poly, l);
    }
    let mut out = Vec::new();
    let mut sides = Vec::with_capacity(k - 1);
    cells_dfs(c, k, 1, poly, &mut sides, &mut out);
    out
}

fn cells_dfs(c: &Construction, k: usize, j: usize, poly: Vec<Vec2>, sides: &mut Vec<i8>, out: &mut Vec<CellPattern>) {
    if polygon_area2(&poly) <= Real::ZERO {
        return;
    }
    if j == k {
        out.push(CellPattern {
            k,
            sides: sides.clone(),
        });
        return;
    }
    let [hi, lo] = half_planes(c, j);
    for s in [-1i8, 0, 1] {
        let next = match s {
            0 => clip_polygon(&clip_polygon(&poly, &hi), &lo),
            1 => clip_polygon(&poly, &flip(&hi)),
            _ => clip_polygon(&poly, &flip(&lo)),
        };
        sides.push(s);
        cells_dfs(c, k, j + 1, next, sides, out);
        sides.pop();
    }
}

/// At most `3^k` cells in strip `k`.
pub fn component_count_check(c: &Construction, k: usize) -> CheckRow {
    let n = stage_components(c, k).len();
    CheckRow::le(format!("components[k={k}]"), n as f64, 3f64.powi(k as i32), 0.0)
}

#[derive(Clone, Debug)]
pub struct CellReport {
    pub cell: CellPattern,
    pub p: usize,
    /// `int_{gamma^-1(P)} |<beta_p, e_k_perp>|`.
    pub lhs: Real,
    /// `|int_{gamma^-1(P)} <gamma', e_k_perp>|`.
    pub direct: Real,
    pub atoms: usize,
    pub rows: Vec<CheckRow>,
}

/// Slope integral of the level-`p` mean tangent over one strip cell with
/// constant strip index `p`.
pub fn strip_slope_integral_check(
    c: &Construction,
    curve: &Curve,
    filt: &Filtration,
    cell: &CellPattern,
    p: usize,
    delta: f64,
) -> Result<CellReport, CurveError> {
    if cell.p() != p {
        return Err(CurveError::NotConstantKp {
            expected: p,
            actual: cell.p(),
        });
    }
    if let Some(t) = curve.cone_violation(&Cone::new(c.w(), real(delta), false), PRECONDITION_GRID) {
        return Err(CurveError::Precondition {
            what: "tangent in cone around w".into(),
            t: to_f64(t),
        });
    }
    let level = filt.level(p)?;
    let st = c.stage(cell.k);
    let ep = st.strip.dir.perp();
    let inside: Vec<usize> = (0..filt.pieces.len())
        .filter(|&i| cell.contains_piece(&filt.pieces[i]))
        .collect();
    let mut lhs = Real::ZERO;
    let mut direct = Real::ZERO;
    let mut atoms = BTreeSet::new();
    for &i in &inside {
        let pc = &filt.pieces[i];
        let a = level.piece_atom[i];
        lhs += pc.span.len * ep.dot(level.atoms[a].beta()).abs();
        direct += ep.dot(pc.span.disp());
        atoms.insert(a);
    }
    let direct = direct.abs();
    let foreign: usize = atoms
        .iter()
        .map(|&a| {
            level.atoms[a]
                .pieces
                .iter()
                .filter(|&&i| !cell.contains_piece(&filt.pieces[i]))
                .count()
        })
        .sum();
    let bound = to_f64(st.rho() * 12.0);
    let bar = filt.error_bar;
    let id = |what: &str| format!("strip-slope[k={},p={p}].{what}", cell.k);
    let rows = vec![
        CheckRow::le(id("bound"), to_f64(lhs), bound, bar),
        CheckRow::le(id("direct"), to_f64(direct), bound, bar),
        CheckRow::le(id("constant"), atoms.len() as f64, 1.0, 0.0),
        CheckRow::le(id("measurable"), foreign as f64, 0.0, 0.0),
        CheckRow::close(id("identity"), to_f64(lhs), to_f64(direct), bar + 1e-28),
    ];
    Ok(CellReport {
        cell: cell.clone(),
        p,
        lhs,
        direct,
        atoms: atoms.len(),
        rows,
    })
}

#[derive(Clone, Debug)]
pub struct DpReport {
    pub p: usize,
    /// Length of the atoms whose mean tangent is far from their strip.
    pub measure: Real,
    /// `int_{D_p} |<beta_p, e_{k_p}_perp>|`.
    pub expectation: Real,
    pub schedule_sum: Real,
    /// Worst slope-ratio gap over atoms outside `D_p`.
    pub ratio_gap: Real,
    pub rows: Vec<CheckRow>,
}

/// Size of the level-`p` set where the mean tangent leaves the direction
/// of the strip last visited.
pub fn dp_diagnostic(c: &Construction, filt: &Filtration, p: usize, delta: f64) -> Result<DpReport, CurveError> {
    let level = filt.level(p)?;
    let thr = pow2(-(p as i32));
    let w = c.w();
    let wp = w.perp();
    let mut measure = Real::ZERO;
    let mut expectation = Real::ZERO;
    let mut gap = Real::ZERO;
    for a in &level.atoms {
        let Some(k) = a.last_strip() else { continue };
        let e = c.stage(k).strip.dir;
        let b = a.beta();
        let slope = e.perp().dot(b).abs();
        if slope > thr {
            measure += a.length;
            expectation += a.length * slope;
        } else {
            let re = wp.dot(e.v()) / w.dot(e.v());
            let rb = wp.dot(b) / w.dot(b);
            gap = gap.max((re - rb).abs());
        }
    }
    let schedule_sum = c.schedule().weighted_suffix(p) * 12.0;
    let bar = filt.error_bar;
    let ratio_bound = thr / ((Real::ONE - c.eta()) * (1.0 - delta));
    let id = |what: &str| format!("dp[p={p}].{what}");
    let rows = vec![
        CheckRow::le(id("measure"), to_f64(measure), to_f64(thr), bar),
        CheckRow::le(id("expectation"), to_f64(expectation), to_f64(schedule_sum), bar),
        CheckRow::le(id("schedule"), to_f64(schedule_sum), to_f64(pow2(-2 * p as i32)), 0.0),
        CheckRow::le(id("markov"), to_f64(measure * thr), to_f64(expectation), bar),
        CheckRow::le(id("ratio"), to_f64(gap), to_f64(ratio_bound), bar),
    ];
    Ok(DpReport {
        p,
        measure,
        expectation,
        schedule_sum,
        ratio_gap: gap,
        rows,
    })
}
