//! Writhe of closed polygonal space curves.
//!
//! The library projects a polygon along directions on the unit sphere, counts
//! signed crossings (the Tait number of the diagram), and averages that count
//! over all directions to obtain the writhe. Three routes are provided:
//!
//! - an exact closed formula that partitions the sphere by the polygon's
//!   direction-indicatrix and sums Tait values weighted by face areas,
//! - an exact quarter-integer fast path for cubic-lattice polygons,
//! - a seeded Monte Carlo estimator, also usable for the average crossing
//!   number.

pub mod indicatrix;
pub mod knot;
pub mod projection;
pub mod sphere;

pub use knot::{build_pl_knot, edge_directions, parse_knot_json, parse_lattice};
pub use knot::{KnotError, LatticeKnot, PLKnot};
pub use projection::{
    classify_direction, crossing_sign, project_diagram, tait_grid, tait_number, Classification,
    Crossing, Diagram, NonGenericReason, ProjectionError, TaitEvaluator, TaitGrid,
};
pub use sphere::{GreatArc, Side, SphereError, UnitVec, Vec3};
