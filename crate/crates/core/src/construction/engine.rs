use log::debug;

use super::kinks::{axis_crossings, clearance, new_lines, StageShape};
use super::schedule::{StageSpec, StripSchedule};
use super::ConstructionError;
use crate::arrangement::{dedup_lines, PiecewiseAffine, SignKey};
use crate::geometry::{Line, Strip, UnitVector, Vec2, Window};
use crate::real::{dyadic_floor, pow2, real, Real, ON_LINE_TOL};

/// Built data of one stage.
#[derive(Clone, Debug)]
pub struct Stage {
    pub k: usize,
    pub strip: Strip,
    pub delta: Real,
    /// `<e_k, w>`
    pub ew: Real,
    /// Ramp height `2 rho_k / <e_k, w>`.
    pub top: Real,
    /// Crossings of the strip axis with `T_{k-1}` inside the window.
    pub crossings: Vec<Vec2>,
    /// Distance from `T_{k-1}` to the axis outside the half-radius guard
    /// balls; infinite for the first stage.
    pub clearance: Real,
    pub theta: Real,
    pub lines_before: usize,
    pub lines_after: usize,
}

impl Stage {
    pub fn rho(&self) -> Real {
        self.strip.half_width
    }

    pub fn guarded(&self, z: Vec2) -> bool {
        self.crossings
            .iter()
            .any(|s| (z - *s).norm2() < self.delta * self.delta)
    }

    /// Ramp `min(max(0, (offset + rho)/<e,w>), top)` and its gradient.
    pub fn ramp(&self, z: Vec2) -> (Real, Vec2) {
        let o = self.strip.signed_offset(z);
        let rho = self.strip.half_width;
        if o <= -rho {
            (Real::ZERO, Vec2::ZERO)
        } else if o >= rho {
            (self.top, Vec2::ZERO)
        } else {
            let n = self.strip.dir.perp().v();
            ((o + rho) / self.ew, n * (real(1.0) / self.ew))
        }
    }
}

/// Largest dyadic `theta` with `(1 - theta)/theta` at least twice
/// `5/sqrt(eta) + 2^(k+1)/(1 - eta)`.
pub fn theta_for(k: usize, eta: Real) -> Real {
    let need = (real(5.0) / eta.sqrt() + pow2(k as i32 + 1) / (real(1.0) - eta)) * 2.0;
    dyadic_floor(real(1.0) / (real(1.0) + need))
}

/// A stage that has been computed but not yet appended.
pub struct StagePlan {
    stage: Stage,
    lines: Vec<Line>,
}

impl StagePlan {
    pub fn stage(&self) -> &Stage {
        &self.stage
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }
}

/// Stage function value at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhiEval {
    pub value: Real,
    pub grad: Vec2,
    /// The distance branch is the (strict) minimum.
    pub dist_active: bool,
}

/// Everything the recursion knows about a point after stage `k`.
#[derive(Clone, Copy, Debug)]
pub struct PointStage {
    pub phi: PhiEval,
    pub in_strip: bool,
    pub guarded: bool,
    /// `sigma_{k-1}` and `m_{k-1}`: the sign and level used for this stage.
    pub sigma_prev: i8,
    pub m_prev: u32,
    pub h: Real,
    pub dh: Vec2,
    pub m: u32,
    pub sigma: i8,
    /// `z` lies on a line of `T_k`.
    pub on_lines: bool,
    /// `dist(z, T_{k-1})`.
    pub dist_prev: Real,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub z: Vec2,
    pub stages: Vec<PointStage>,
}

impl Trace {
    pub fn at(&self, k: usize) -> &PointStage {
        &self.stages[k - 1]
    }

    pub fn h(&self) -> Real {
        self.stages.last().map_or(Real::ZERO, |s| s.h)
    }

    pub fn dh(&self) -> Vec2 {
        self.stages.last().map_or(Vec2::ZERO, |s| s.dh)
    }

    pub fn m(&self) -> u32 {
        self.stages.last().map_or(0, |s| s.m)
    }

    /// Strip indices containing the point, increasing.
    pub fn strips(&self) -> Vec<usize> {
        (0..self.stages.len())
            .filter(|&i| self.stages[i].in_strip)
            .map(|i| i + 1)
            .collect()
    }

    /// First stage at which the level reached `n`.
    pub fn increment_stages(&self) -> Vec<usize> {
        let mut out = vec![0];
        let mut m = 0;
        for (i, s) in self.stages.iter().enumerate() {
            if s.m != m {
                m = s.m;
                out.push(i + 1);
            }
        }
        out
    }
}

/// Membership proxies at a finite depth.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthClass {
    pub depth: usize,
    pub m: u32,
    /// Strips of the tail window `[ceil(K/2), K]` that contain the point.
    pub tail_strips: Vec<usize>,
    pub in_tail: bool,
    /// Inside a guard ball of a tail stage.
    pub guarded: bool,
    /// `Some(m)` when the point is a level-`m` proxy member (unguarded).
    pub level: Option<u32>,
    pub h_candidate: bool,
}

/// A strip schedule with all line sets built.
#[derive(Clone, Debug)]
pub struct Construction {
    schedule: StripSchedule,
    w: UnitVector,
    eta: Real,
    window: Window,
    lines: Vec<Line>,
    stages: Vec<Stage>,
}

impl Construction {
    /// Empty construction carrying the schedule header (no stages yet).
    pub fn start(schedule: &StripSchedule) -> Result<Self, ConstructionError> {
        let mut header = schedule.clone();
        header.stages.clear();
        header.depth = 0;
        header.certificate = None;
        Ok(Construction {
            w: schedule.w_dir(),
            eta: schedule.eta_real(),
            window: schedule.window,
            schedule: header,
            lines: Vec::new(),
            stages: Vec::new(),
        })
    }

    pub fn build(schedule: &StripSchedule) -> Result<Self, ConstructionError> {
        schedule.check_shape()?;
        let mut c = Construction::start(schedule)?;
        for spec in &schedule.stages {
            let plan = c.plan_stage(spec)?;
            c.commit(plan, spec.clone());
        }
        c.schedule.certificate = schedule.certificate.clone();
        Ok(c)
    }

    /// Compute stage `depth + 1` from `spec` without appending it.
    pub fn plan_stage(&self, spec: &StageSpec) -> Result<StagePlan, ConstructionError> {
        let k = self.stages.len() + 1;
        let dir = spec.dir()?;
        let ew = dir.dot(self.w.v());
        if !(ew > Real::ZERO) {
            return Err(ConstructionError::Schedule(format!(
                "stage {k}: <e, w> must be positive"
            )));
        }
        let rho = real(spec.rho);
        let delta = real(spec.delta);
        let strip = Strip::new(spec.center(), dir, rho);
        let top = rho * 2.0 / ew;
        let cross = axis_crossings(&self.lines, &strip, &self.window);
        let clear = clearance(&self.lines, &strip, &self.window, &cross, delta * 0.5);
        let shape = StageShape {
            k,
            strip: &strip,
            ew,
            top,
            window: &self.window,
        };
        let mut all = self.lines.clone();
        all.extend(new_lines(&self.lines, &shape));
        let all = dedup_lines(&all, 1e-28);
        debug!("stage {k}: {} -> {} lines", self.lines.len(), all.len());
        if all.len() > self.schedule.line_cap {
            return Err(ConstructionError::LineCap {
                stage: k,
                lines: all.len(),
                cap: self.schedule.line_cap,
            });
        }
        let stage = Stage {
            k,
            strip,
            delta,
            ew,
            top,
            crossings: cross.into_iter().map(|(_, p)| p).collect(),
            clearance: clear,
            theta: theta_for(k, self.eta),
            lines_before: self.lines.len(),
            lines_after: all.len(),
        };
        Ok(StagePlan { stage, lines: all })
    }

    pub fn commit(&mut self, plan: StagePlan, spec: StageSpec) {
        self.lines = plan.lines;
        self.stages.push(plan.stage);
        self.schedule.stages.push(spec);
        self.schedule.depth = self.stages.len();
    }

    pub fn schedule(&self) -> &StripSchedule {
        &self.schedule
    }

    pub fn depth(&self) -> usize {
        self.stages.len()
    }

    pub fn w(&self) -> UnitVector {
        self.w
    }

    pub fn eta(&self) -> Real {
        self.eta
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    /// Point at signed offset `off` (in strip widths) from the axis of
    /// stage `k`, at fraction `t` along the axis chord of the window.
    pub fn strip_point(&self, k: usize, t: f64, off: f64) -> Option<Vec2> {
        let s = &self.stage(k).strip;
        let (lo, hi) = self.window.clip(s.center, s.dir.v())?;
        Some(s.center + s.dir.v() * (lo + (hi - lo) * real(t)) + s.dir.perp().v() * (s.half_width * off))
    }

    /// Stage `k`, 1-based.
    pub fn stage(&self, k: usize) -> &Stage {
        &self.stages[k - 1]
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    /// `T_k`; `T_0` is empty.
    pub fn lines_at(&self, k: usize) -> &[Line] {
        if k == 0 {
            &[]
        } else {
            &self.lines[..self.stages[k - 1].lines_after]
        }
    }

    pub fn eps_of(&self, n: u32) -> Real {
        self.schedule.eps_of(n)
    }

    /// `sum_{j > k} 2 rho_j / (1 - eta)`, the sup-norm bound of `h - h_k`
    /// when all levels are zero.
    pub fn tail_bound(&self, k: usize) -> Real {
        self.schedule.rho_tail(k) * 2.0 / (real(1.0) - self.eta)
    }

    /// Nearest line of `T_{k-1}` as `(distance, index)`.
    pub fn nearest_prev(&self, k: usize, z: Vec2) -> Option<(Real, usize)> {
        let mut best: Option<(Real, usize)> = None;
        for (i, l) in self.lines_at(k - 1).iter().enumerate() {
            let d = l.eval(z).abs();
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, i));
            }
        }
        best
    }

    fn phi_from(&self, k: usize, z: Vec2, nearest: Option<(Real, usize)>) -> PhiEval {
        let st = &self.stages[k - 1];
        let (tv, tg) = st.ramp(z);
        if let Some((d, i)) = nearest {
            let s = pow2(-(k as i32));
            let dv = d * s;
            if dv < tv {
                let l = &self.lines[i];
                let sign = if l.eval(z) >= Real::ZERO { s } else { -s };
                return PhiEval {
                    value: dv,
                    grad: l.normal.v() * sign,
                    dist_active: true,
                };
            }
        }
        PhiEval {
            value: tv,
            grad: tg,
            dist_active: false,
        }
    }

    /// `phi_k(z) = min(ramp_k(z), 2^-k dist(z, T_{k-1}))` with the gradient
    /// of the active piece.
    pub fn phi(&self, k: usize, z: Vec2) -> PhiEval {
        self.phi_from(k, z, self.nearest_prev(k, z))
    }

    pub fn on_lines(&self, k: usize, z: Vec2) -> bool {
        let tol = real(ON_LINE_TOL);
        self.lines_at(k).iter().any(|l| l.eval(z).abs() <= tol)
    }

    /// Run the recursion for `h_k, sigma_k, m_k` up to `depth`.
    pub fn trace(&self, z: Vec2, depth: usize) -> Trace {
        let depth = depth.min(self.depth());
        let tol = real(ON_LINE_TOL);
        // prefix minima of |l_i(z)| at every stage boundary
        let total = if depth == 0 {
            0
        } else {
            self.stages[depth - 1].lines_after
        };
        let mut nearest_upto: Vec<Option<(Real, usize)>> = vec![None; depth + 1];
        let mut on_upto = vec![false; depth + 1];
        let mut best: Option<(Real, usize)> = None;
        let mut on = false;
        let mut kk = 0;
        let bound = |k: usize| {
            if k == 0 {
                0
            } else {
                self.stages[k - 1].lines_after
            }
        };
        while kk <= depth && bound(kk) == 0 {
            kk += 1;
        }
        for i in 0..total {
            let d = self.lines[i].eval(z).abs();
            if best.is_none_or(|b| d < b.0) {
                best = Some((d, i));
            }
            if d <= tol {
                on = true;
            }
            while kk <= depth && bound(kk) == i + 1 {
                nearest_upto[kk] = best;
                on_upto[kk] = on;
                kk += 1;
            }
        }

        let mut out = Vec::with_capacity(depth);
        let mut h = Real::ZERO;
        let mut dh = Vec2::ZERO;
        let mut m = 0u32;
        let mut sigma: i8 = -1;
        let mut anchor = Vec2::ZERO;
        let mut inside = 0usize;
        for k in 1..=depth {
            let st = &self.stages[k - 1];
            let phi = self.phi_from(k, z, nearest_upto[k - 1]);
            let coef = pow2(-(m as i32)) * f64::from(sigma);
            h += phi.value * coef;
            dh += phi.grad * coef;
            let in_strip = st.strip.contains(z);
            if in_strip {
                inside += 1;
            }
            let sigma_k: i8 = if inside % 2 == 1 { 1 } else { -1 };
            let on_k = on_upto[k];
            let m_k = if !on_k && (dh - anchor).norm() > self.eps_of(m) {
                m + 1
            } else {
                m
            };
            if m_k != m {
                anchor = dh;
            }
            out.push(PointStage {
                phi,
                in_strip,
                guarded: st.guarded(z),
                sigma_prev: sigma,
                m_prev: m,
                h,
                dh,
                m: m_k,
                sigma: sigma_k,
                on_lines: on_k,
                dist_prev: nearest_upto[k - 1].map_or(real(f64::INFINITY), |b| b.0),
            });
            m = m_k;
            sigma = sigma_k;
        }
        Trace { z, stages: out }
    }

    pub fn h(&self, z: Vec2, depth: usize) -> Real {
        self.trace(z, depth).h()
    }

    pub fn classify(&self, z: Vec2, depth: usize, growth_threshold: u32) -> DepthClass {
        let t = self.trace(z, depth);
        let depth = t.stages.len();
        let lo = depth.div_ceil(2).max(1);
        let tail_strips: Vec<usize> = (lo..=depth).filter(|&k| t.at(k).in_strip).collect();
        let guarded = (lo..=depth).any(|k| t.at(k).guarded);
        let m = t.m();
        let in_tail = !tail_strips.is_empty();
        DepthClass {
            depth,
            m,
            in_tail,
            tail_strips,
            guarded,
            level: if guarded { None } else { Some(m) },
            h_candidate: m >= growth_threshold && in_tail && !guarded,
        }
    }

    /// Sign vector of `z` against `T_k` and the lines it lies on; equal keys
    /// mean the same cell.
    pub fn cell_key(&self, k: usize, z: Vec2) -> (SignKey, Vec<usize>) {
        let ls = self.lines_at(k);
        let tol = real(ON_LINE_TOL);
        let mut key = SignKey::zeros(ls.len());
        let mut on = Vec::new();
        for (i, l) in ls.iter().enumerate() {
            let v = l.eval(z);
            if v.abs() <= tol {
                on.push(i);
            } else if v > Real::ZERO {
                key.set(i, true);
            }
        }
        (key, on)
    }

    pub fn h_view(&self, depth: usize) -> HView<'_> {
        HView { c: self, depth }
    }

    pub fn phi_view(&self, k: usize) -> PhiView<'_> {
        PhiView { c: self, k }
    }
}

fn lines_near(ls: &[Line], z: Vec2, radius: Real) -> Vec<Line> {
    ls.iter().filter(|l| l.eval(z).abs() <= radius).copied().collect()
}

/// `h_depth` as a piecewise-affine function.
pub struct HView<'a> {
    c: &'a Construction,
    depth: usize,
}

impl PiecewiseAffine for HView<'_> {
    fn breaklines_near(&self, z: Vec2, radius: Real) -> Vec<Line> {
        lines_near(self.c.lines_at(self.depth), z, radius)
    }

    fn value(&self, z: Vec2) -> Real {
        self.c.h(z, self.depth)
    }
}

/// `phi_k` as a piecewise-affine function.
pub struct PhiView<'a> {
    c: &'a Construction,
    k: usize,
}

impl PiecewiseAffine for PhiView<'_> {
    fn breaklines_near(&self, z: Vec2, radius: Real) -> Vec<Line> {
        lines_near(self.c.lines_at(self.k), z, radius)
    }

    fn value(&self, z: Vec2) -> Real {
        self.c.phi(self.k, z).value
    }
}
