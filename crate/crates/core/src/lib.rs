//! Desk-scale lab for a purely unrectifiable set built from nested thin
//! strips, and for the Lipschitz function whose non-differentiability
//! points it captures.
//!
//! Layers, bottom up:
//! - [`geometry`]: vectors, lines, strips, cones;
//! - [`arrangement`]: explicit line arrangements and piecewise-affine
//!   functions on them;
//! - [`construction`]: strip schedules and the staged function `h_k`;
//! - [`detectors`]: chord-slope non-differentiability detectors and
//!   witnesses;
//! - [`curves`]: C1 test curves, preimages, filtrations;
//! - [`martingale`]: conditional expectations and maximal inequalities on
//!   curve filtrations.

// `!(x > 0)` is the NaN-rejecting form throughout
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arrangement;
pub mod construction;
pub mod curves;
pub mod detectors;
pub mod geometry;
pub mod martingale;
pub mod real;
pub mod report;

pub use geometry::{Cone, Line, Point, Strip, UnitVector, Vec2, Window};
pub use real::Real;
