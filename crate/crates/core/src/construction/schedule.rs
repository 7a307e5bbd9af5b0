use serde::{Deserialize, Serialize};

use super::ConstructionError;
use crate::geometry::{UnitVector, Vec2, Window};
use crate::real::{real, Real};
use crate::report::CheckRow;

/// One strip of the schedule as stored on disk. Directions are kept as the
/// raw (un-normalised) f64 pair so that a saved schedule reloads to the
/// identical double-double geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub x: [f64; 2],
    pub e: [f64; 2],
    pub rho: f64,
    pub delta: f64,
}

impl StageSpec {
    pub fn center(&self) -> Vec2 {
        Vec2::from_f64(self.x[0], self.x[1])
    }

    pub fn dir(&self) -> Result<UnitVector, ConstructionError> {
        UnitVector::from_f64(self.e[0], self.e[1])
            .map_err(|_| ConstructionError::Schedule("zero strip direction".into()))
    }
}

fn default_window() -> Window {
    Window::unit()
}

fn default_tail_ratio() -> f64 {
    2f64.powi(-10)
}

fn default_budget() -> f64 {
    1.0
}

fn default_cap() -> usize {
    6000
}

/// Full strip schedule. `tail_ratio` describes how the widths are assumed
/// to continue past the last listed stage; every tail sum in the validator
/// includes that geometric continuation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StripSchedule {
    pub w: [f64; 2],
    pub eta: f64,
    #[serde(rename = "K")]
    pub depth: usize,
    pub stages: Vec<StageSpec>,
    pub eps0: f64,
    #[serde(default = "default_window")]
    pub window: Window,
    #[serde(default = "default_tail_ratio")]
    pub tail_ratio: f64,
    #[serde(default = "default_budget")]
    pub delta_budget: f64,
    #[serde(default = "default_cap")]
    pub line_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<Certificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: String,
    pub index: usize,
    #[serde(with = "crate::report::float")]
    pub lhs: f64,
    #[serde(with = "crate::report::float")]
    pub rhs: f64,
}

/// Per-stage data derived while building the line sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub k: usize,
    pub lines: usize,
    pub crossings: usize,
    #[serde(with = "crate::report::float")]
    pub clearance: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub valid: bool,
    pub checks: Vec<CheckRow>,
    pub violations: Vec<Violation>,
    pub stages: Vec<StageRecord>,
}

impl StripSchedule {
    pub fn from_json(text: &str) -> Result<Self, ConstructionError> {
        let s: StripSchedule = serde_json::from_str(text).map_err(|e| ConstructionError::Schedule(e.to_string()))?;
        s.check_shape()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialises")
    }

    /// Structural checks that make the schedule evaluable at all.
    pub fn check_shape(&self) -> Result<(), ConstructionError> {
        let bad = |m: &str| Err(ConstructionError::Schedule(m.into()));
        if self.depth != self.stages.len() {
            return bad(&format!("K = {} but {} stages listed", self.depth, self.stages.len()));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad("eta must lie in (0, 1)");
        }
        if !(self.eps0 > 0.0) {
            return bad("eps0 must be positive");
        }
        if !(self.tail_ratio >= 0.0) {
            return bad("tail_ratio must be non-negative");
        }
        UnitVector::from_f64(self.w[0], self.w[1]).map_err(|_| ConstructionError::Schedule("zero w".into()))?;
        Window::new(self.window.min, self.window.max).map_err(|e| ConstructionError::Schedule(e.to_string()))?;
        for (i, s) in self.stages.iter().enumerate() {
            s.dir()?;
            if !(s.rho > 0.0 && s.rho.is_finite()) || !(s.delta > 0.0 && s.delta.is_finite()) {
                return bad(&format!("stage {}: rho and delta must be positive", i + 1));
            }
            if !s.x.iter().all(|v| v.is_finite()) {
                return bad(&format!("stage {}: non-finite centre", i + 1));
            }
        }
        Ok(())
    }

    pub fn w_dir(&self) -> UnitVector {
        UnitVector::from_f64(self.w[0], self.w[1]).expect("checked")
    }

    pub fn eta_real(&self) -> Real {
        real(self.eta)
    }

    /// The first `depth` stages, without certificate.
    pub fn truncated(&self, depth: usize) -> Result<StripSchedule, ConstructionError> {
        if depth > self.stages.len() {
            return Err(ConstructionError::Depth {
                requested: depth,
                available: self.stages.len(),
            });
        }
        let mut s = self.clone();
        s.stages.truncate(depth);
        s.depth = depth;
        s.certificate = None;
        Ok(s)
    }

    /// The threshold sequence: `eps0` at level 0, then `1/n^2`.
    pub fn eps_of(&self, n: u32) -> Real {
        eps_level(self.eps0, n)
    }

    /// Width of stage `k` (1-based), continuing geometrically past `K`.
    pub fn rho_at(&self, k: usize) -> Real {
        if k <= self.depth {
            real(self.stages[k - 1].rho)
        } else {
            let last = real(self.stages[self.depth - 1].rho);
            last * real(self.tail_ratio).powi((k - self.depth) as i32)
        }
    }

    /// `sum_{j > k} rho_j` including the geometric continuation.
    pub fn rho_tail(&self, k: usize) -> Real {
        let mut s = Real::ZERO;
        for j in k + 1..=self.depth {
            s += real(self.stages[j - 1].rho);
        }
        s + self.continuation_sum(1.0)
    }

    /// `sum_{j > K} base^j rho_j` from the geometric continuation; infinite
    /// when it diverges.
    pub fn continuation_sum(&self, base: f64) -> Real {
        if self.depth == 0 {
            return Real::ZERO;
        }
        let q = real(self.tail_ratio) * base;
        if q >= real(1.0) {
            return real(f64::INFINITY);
        }
        let last = real(self.stages[self.depth - 1].rho);
        last * real(base).powi(self.depth as i32) * q / (real(1.0) - q)
    }

    /// `sum_{k >= max(p, 1)} 3^k rho_k`, continuation included.
    pub fn weighted_suffix(&self, p: usize) -> Real {
        let p = p.max(1);
        if self.depth == 0 {
            return Real::ZERO;
        }
        if p > self.depth {
            let q = real(self.tail_ratio) * 3.0;
            if q >= real(1.0) {
                return real(f64::INFINITY);
            }
            return real(3f64).powi(p as i32) * self.rho_at(p) / (real(1.0) - q);
        }
        let mut s = self.continuation_sum(3.0);
        for k in p..=self.depth {
            s += real(3f64).powi(k as i32) * self.rho_at(k);
        }
        s
    }
}

pub fn eps_level(eps0: f64, n: u32) -> Real {
    if n == 0 {
        real(eps0)
    } else {
        let n = real(n as f64);
        real(1.0) / (n * n)
    }
}

/// Radical-inverse (van der Corput) sequence in base `b`.
pub fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}
