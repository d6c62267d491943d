//! Interval arithmetic, the southeast order, boxes, convex polygons and the
//! collision primitives used by the FRS, the planner and the verifier.

mod interval;
mod polygon;

pub use interval::{interval_hull, se_leq, Box2, Interval, IntervalVector};
pub use polygon::{box_polygon_intersect, decompose_simple_polygon, ConvexPolygon, Point2};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon is not strictly convex")]
    NotConvex,
    #[error("polygon is not simple")]
    NotSimple,
    #[error("non-finite coordinate")]
    NonFinite,
}
