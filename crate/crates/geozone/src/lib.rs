//! Geography-zoned structured overlay: hierarchical partitioning of the
//! coordinate space into zones, per-peer routing tables over sibling zones,
//! area/point/identifier routing with locality and path-convergence
//! guarantees, decentralized split/merge under churn, and a content-sharing
//! layer (multicast delivery trees, on-route replica caching) — all driven
//! by a deterministic single-threaded simulator.
//!
//! Geometry is generic over the scalar type ([`scalar::GeoFloat`], `f32` or
//! `f64`); everything above the geometric core uses the `f64` aliases
//! exported here.

pub mod geom;
pub mod ids;
pub mod scalar;

/// Coordinate scalar used by the overlay, tree, and simulator layers.
pub type Coord = f64;

pub type GeoPoint = geom::GeoPoint<Coord>;
pub type Rect = geom::Rect<Coord>;
pub type Region = geom::Region<Coord>;

pub use geom::{circle_bbox, distance_km, GeomError};
pub use ids::{IdParseError, OverlayId, PeerName, ZoneId};

pub mod cluster;
pub mod policy;
pub mod tree;

pub use policy::{AdaptationPolicy, PolicyError};
pub use tree::{MergeOutcome, SplitOutcome, TreeError, ValidationReport, ZoneNode, ZoneTree};

pub mod membership;
pub mod table;

pub use table::{Contact, ContactSlot, RoutingTable, TableError, SIBLING_BACKUPS};

pub mod router;
