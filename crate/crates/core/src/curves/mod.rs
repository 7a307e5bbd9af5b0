//! C1 test curves, their preimages of convex regions, and the filtration
//! they inherit from the strips of a construction.
//!
//! All positions and lengths are double-double; crossings are found by
//! certified subdivision so a missed root is an error, not a silent bias.

mod curve;
mod filtration;
mod preimage;

pub use curve::{Curve, CurvePos, CurveSpec, Segment, SegmentSpec};
pub use filtration::{
    build_filtration, component_count_check, dp_diagnostic, stage_components, strip_pieces, strip_slope_integral_check,
    visited_cells, Atom, AtomMode, CellPattern, CellReport, CurvePartition, DpReport, Filtration, Piece,
};
pub use preimage::{
    clip_polygon, convex_slope_integral_check, crossing_bound_check, crossings, label_pieces, preimage_measure,
    Boundary, Crossing, CrossingConfig, CrossingReport, Preimage, Region, SlopeReport, Span, PRECONDITION_GRID,
};

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum CurveError {
    #[error("curve has no segments")]
    Empty,
    #[error("segment {0} is degenerate: {1}")]
    Degenerate(usize, String),
    #[error("join {join} is not C1 (gap {gap:e}, turn {turn:e})")]
    NotC1 { join: usize, gap: f64, turn: f64 },
    #[error("more than {cap} boundary crossings")]
    CrossingCap { cap: usize },
    #[error("curve is tangent to a boundary near t = {t}")]
    Tangency { t: f64 },
    #[error("precondition {what} fails at t = {t}")]
    Precondition { what: String, t: f64 },
    #[error("bad polygon: {0}")]
    Polygon(String),
    #[error("cell has strip index {actual}, expected {expected}")]
    NotConstantKp { expected: usize, actual: usize },
    #[error("level {0} is beyond the filtration")]
    Level(usize),
}
