use super::engine::Construction;
use super::schedule::{Certificate, StageRecord, StripSchedule, Violation};
use super::ConstructionError;
use crate::real::{pow2, real, to_f64, Real};
use crate::report::CheckRow;

/// Narrowest strip the double-double evaluation still resolves against
/// window-sized coordinates.
pub const PRECISION_FLOOR: f64 = 8.077935669463161e-28; // 2^-90

struct Book {
    checks: Vec<CheckRow>,
    violations: Vec<Violation>,
}

impl Book {
    /// Record `lhs < rhs` (strict) or `lhs <= rhs`.
    fn push(&mut self, id: &str, index: usize, lhs: Real, rhs: Real, strict: bool) {
        let pass = if strict { lhs < rhs } else { lhs <= rhs };
        let bar = to_f64(rhs.abs()) * 1e-28;
        self.checks.push(CheckRow {
            id: format!("{id}[{index}]"),
            lhs: to_f64(lhs),
            rhs: to_f64(rhs),
            pass,
            error_bar: bar,
        });
        if !pass {
            self.violations.push(Violation {
                condition: id.to_string(),
                index,
                lhs: to_f64(lhs),
                rhs: to_f64(rhs),
            });
        }
    }
}

/// Check every decay and geometry condition against a built construction.
///
/// Condition ids:
/// - `i`: `12 sum_{k>=p} 3^k rho_k <= 4^-p` for `p = 0..=K`;
/// - `ii`: `rho_k < theta_k c_k`, `c_k` the clearance of `T_{k-1}` from the
///   axis outside the half-radius guard balls;
/// - `ii-guard`: `rho_k <= delta_k / 2`, which keeps the clearance valid
///   for points of the strip whose axis projection is guarded;
/// - `iii`: `(4/rho_k) sum_{j>k} 2 rho_j/(1-eta) <= sqrt(eta)/16`;
/// - `iv`: `sum |S_k| delta_k <= budget`;
/// - `v`: `<e_k, w> >= 1 - eta`;
/// - `precision`: `rho_k >= 2^-90`.
pub fn certify(c: &Construction) -> Certificate {
    let s = c.schedule();
    let eta = c.eta();
    let depth = c.depth();
    let mut b = Book {
        checks: Vec::new(),
        violations: Vec::new(),
    };

    // (i) suffix sums, each plus the geometric continuation at base 3
    for p in 0..=depth {
        let lhs = s.weighted_suffix(p) * 12.0;
        b.push("i", p, lhs, pow2(-2 * p as i32), false);
    }

    for st in c.stages() {
        let k = st.k;
        let rho = st.rho();
        let room = if st.clearance.is_finite() {
            st.theta * st.clearance
        } else {
            st.clearance
        };
        b.push("ii", k, rho, room, true);
        b.push("ii-guard", k, rho, st.delta * 0.5, false);
        let tail = s.rho_tail(k) * 2.0 / (real(1.0) - eta) * 4.0 / rho;
        b.push("iii", k, tail, eta.sqrt() / 16.0, false);
        b.push("v", k, real(1.0) - eta, st.ew, false);
        b.push("precision", k, real(PRECISION_FLOOR), rho, false);
    }

    let guard_mass: Real = c.stages().iter().map(|st| st.delta * (st.crossings.len() as f64)).sum();
    b.push("iv", depth, guard_mass, real(s.delta_budget), false);

    Certificate {
        valid: b.violations.is_empty(),
        checks: b.checks,
        violations: b.violations,
        stages: c
            .stages()
            .iter()
            .map(|st| StageRecord {
                k: st.k,
                lines: st.lines_after,
                crossings: st.crossings.len(),
                clearance: to_f64(st.clearance),
                theta: to_f64(st.theta),
            })
            .collect(),
    }
}

/// Build the schedule and return it with the certificate attached.
pub fn validate_schedule(s: &StripSchedule) -> Result<(Construction, StripSchedule), ConstructionError> {
    let c = Construction::build(s)?;
    let mut out = s.clone();
    out.certificate = Some(certify(&c));
    Ok((c, out))
}
