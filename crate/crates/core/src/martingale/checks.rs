use super::{beta_ratio_process, project, Direction, Measure, ProcessSample};
use crate::construction::Construction;
use crate::curves::Filtration;
use crate::geometry::Vec2;
use crate::real::{pow2, real, to_f64, Real};
use crate::report::CheckRow;

/// `S_N = sum_{n < 2N} (-1)^n X_n`, stored on level `2N - 1` for
/// `N = 1, 2, ...` as far as the sample reaches.
pub fn alternating_sums(x: &ProcessSample, filt: &Filtration) -> Vec<Vec<Option<Real>>> {
    let top = x.levels.len().min(filt.levels.len());
    let mut out = Vec::new();
    let mut n = 1;
    while 2 * n - 1 < top {
        let fine = 2 * n - 1;
        let vals = (0..filt.levels[fine].atoms.len())
            .map(|a| {
                let mut s = Real::ZERO;
                for q in 0..=fine {
                    let v = x.levels[q][filt.ancestor(fine, a, q)]?;
                    s = if q % 2 == 0 { s + v } else { s - v };
                }
                Some(s)
            })
            .collect();
        out.push(vals);
        n += 1;
    }
    out
}

fn l2_at(filt: &Filtration, level: usize, vals: &[Option<Real>], m: &Measure) -> Real {
    let sq: Real = filt.levels[level]
        .atoms
        .iter()
        .zip(vals)
        .filter_map(|(a, x)| x.map(|x| m.atom_mass(a) * x * x))
        .sum();
    sq.max(Real::ZERO).sqrt()
}

#[derive(Clone, Debug)]
pub struct AlternatingReport {
    /// `S_N` for `N = 1..`, on level `2N - 1`.
    pub sums: Vec<Vec<Option<Real>>>,
    pub l2: Vec<Real>,
    pub rows: Vec<CheckRow>,
}

/// Martingale property and `L^2` growth of the alternating sums of a
/// martingale `X`.
pub fn alternating_sum_check(x: &ProcessSample, filt: &Filtration, m: &Measure) -> AlternatingReport {
    let sums = alternating_sums(x, filt);
    let bar = 1e-8 + filt.error_bar;
    let mut rows = Vec::new();
    let mut l2 = Vec::new();
    for (i, s) in sums.iter().enumerate() {
        let n = i + 1;
        let fine = 2 * n - 1;
        if i > 0 {
            let proj = project(filt, m, fine, s, fine - 2);
            let res = proj
                .iter()
                .zip(&sums[i - 1])
                .filter_map(|(a, b)| Some((*a.as_ref()? - *b.as_ref()?).abs()))
                .fold(Real::ZERO, Real::max);
            rows.push(CheckRow::le(format!("alt[N={n}].residual"), to_f64(res), 0.0, bar));
        }
        let norm = l2_at(filt, fine, s, m);
        let sup = (0..=fine).map(|q| x.l2(filt, q, m)).fold(Real::ZERO, Real::max);
        rows.push(CheckRow::le(
            format!("alt[N={n}].l2"),
            to_f64(norm),
            to_f64(sup * 2.0),
            bar,
        ));
        l2.push(norm);
    }
    let top = x.levels.len().min(filt.levels.len());
    let mut n = 1;
    while 2 * n < top {
        let odd = x.l2(filt, 2 * n - 1, m);
        let even = x.l2(filt, 2 * n, m);
        rows.push(CheckRow::le(
            format!("alt.sub[n={n}]"),
            to_f64(odd * odd),
            to_f64(even * even),
            bar,
        ));
        n += 1;
    }
    AlternatingReport { sums, l2, rows }
}

#[derive(Clone, Debug)]
pub struct DoobReport {
    pub lambda: f64,
    pub c: Real,
    pub total: Real,
    /// Arc length of `{sup_N |S_N| > lambda}`.
    pub exceed_length: Real,
    /// Its directional mass.
    pub exceed_mu: Real,
    pub rows: Vec<CheckRow>,
}

/// Maximal inequality for the alternating sums of the slope-ratio
/// martingale, measured on the finest level of the filtration.
pub fn doob_tail_check(filt: &Filtration, d: &Direction, lambda: f64) -> DoobReport {
    let m = Measure::Directional(*d);
    let x = beta_ratio_process(filt, d.v);
    let sums = alternating_sums(&x, filt);
    let lam = real(lambda);
    let (mut len, mut mu) = (Real::ZERO, Real::ZERO);
    if let Some(last) = sums.len().checked_sub(1) {
        let fine = 2 * last + 1;
        for (a, atom) in filt.levels[fine].atoms.iter().enumerate() {
            let sup = (0..=last)
                .filter_map(|i| sums[i][filt.ancestor(fine, a, 2 * i + 1)])
                .fold(Real::ZERO, |acc, s| acc.max(s.abs()));
            if sup > lam {
                len += atom.length;
                mu += m.atom_mass(atom);
            }
        }
    }
    let c = d.c;
    let bar = filt.error_bar;
    let inv_c = Real::ONE / c;
    let sum_l2 = sums
        .iter()
        .enumerate()
        .map(|(i, s)| l2_at(filt, 2 * i + 1, s, &m))
        .fold(Real::ZERO, Real::max);
    let levels = 0..x.levels.len();
    let linf = levels.clone().map(|p| x.sup(p)).fold(Real::ZERO, Real::max);
    let rl2 = levels.map(|p| x.l2(filt, p, &m)).fold(Real::ZERO, Real::max);
    let rows = vec![
        CheckRow::le(
            "doob.intermediate",
            to_f64(lam * lam * mu),
            to_f64(inv_c * inv_c * 16.0),
            bar,
        ),
        CheckRow::le(
            "doob.tail",
            to_f64(len),
            to_f64(d.total * 16.0 / (lam * lam * c * c * c)),
            bar,
        ),
        CheckRow::le("doob.l2", to_f64(sum_l2), to_f64(inv_c * 2.0), bar),
        CheckRow::le("ratio.linf", to_f64(linf), to_f64(inv_c), bar),
        CheckRow::le("ratio.l2", to_f64(rl2), to_f64(inv_c), bar),
        CheckRow::le("ratio.l2-stated", to_f64(rl2), to_f64(d.total * inv_c), bar),
    ];
    DoobReport {
        lambda,
        c,
        total: d.total,
        exceed_length: len,
        exceed_mu: mu,
        rows,
    }
}

/// One block of stages between consecutive level increments of a point.
#[derive(Clone, Debug)]
pub struct DerGrowBlock {
    pub n: u32,
    /// Stages `from < k <= to`.
    pub from: usize,
    pub to: usize,
    /// Strips of the block containing the point.
    pub hits: Vec<usize>,
    /// `sum (-1)^s <w, e_k_perp> / <w, e_k>` over the hits.
    pub sum: Real,
    /// `2^n eps(n) - 2`.
    pub bound: Real,
    /// `|Dh_to - Dh_from|`.
    pub jump: Real,
    /// No hit of the block is guarded and the gradient replay holds, so the
    /// lower bound follows.
    pub certified: bool,
    pub rows: Vec<CheckRow>,
}

/// Blockwise alternating slope sums along the level increments of `z`.
pub fn der_grow_diagnostic(c: &Construction, z: Vec2, depth: usize) -> Vec<DerGrowBlock> {
    let tr = c.trace(z, depth);
    let r = tr.increment_stages();
    let w = c.w();
    let dh_at = |k: usize| if k == 0 { Vec2::ZERO } else { tr.at(k).dh };
    let mut out = Vec::new();
    for (n, pair) in r.windows(2).enumerate() {
        let (from, to) = (pair[0], pair[1]);
        let n = n as u32;
        let mut sum = Real::ZERO;
        let mut hits = Vec::new();
        let mut guarded = false;
        for k in from + 1..=to {
            let ps = tr.at(k);
            if !ps.in_strip {
                continue;
            }
            let e = c.stage(k).strip.dir;
            let ratio = w.dot(e.perp().v()) / w.dot(e.v());
            sum += ratio * f64::from(ps.sigma_prev);
            hits.push(k);
            guarded |= ps.guarded;
        }
        let bound = pow2(n as i32) * c.eps_of(n) - 2.0;
        let jump = (dh_at(to) - dh_at(from)).norm();
        let eps = c.eps_of(n);
        let replay = pow2(-(n as i32)) * (sum.abs() + 2.0);
        let rows = vec![
            CheckRow::ge(format!("der-grow[n={n}].jump"), to_f64(jump), to_f64(eps), 0.0),
            CheckRow::le(format!("der-grow[n={n}].replay"), to_f64(jump), to_f64(replay), 1e-28),
            CheckRow::ge(format!("der-grow[n={n}].sum"), to_f64(sum.abs()), to_f64(bound), 1e-28),
        ];
        let certified = !guarded && rows[1].pass;
        out.push(DerGrowBlock {
            n,
            from,
            to,
            hits,
            sum,
            bound,
            jump,
            certified,
            rows,
        });
    }
    out
}
