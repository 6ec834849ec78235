//! Message forwarding: area multicast, point routing, identifier routing.
//!
//! Forwarding is a pure function of (routing table, target, level) and
//! returns the local-delivery flag plus the set of sends; the simulator
//! executes them. The `level` parameter records how many hierarchy levels
//! are already resolved: it starts at 1 at the initiator and, counting the
//! member tier below the leaf zones as the deepest level `d = leaf_depth +
//! 1`, a receiver handles exactly the area within its ancestor zone at
//! depth `level - 1`. Sends through a sibling row at zone depth `r` carry
//! `r + 1`; sends to leaf members carry `d + 1`, which stops them from
//! forwarding further. Levels therefore increase strictly along every
//! forwarding chain, and sibling-zone disjointness makes area delivery
//! exactly-once.

use serde::{Deserialize, Serialize};

use crate::geom::distance_km;
use crate::ids::{OverlayId, PeerName, ZoneId};
use crate::table::RoutingTable;
use crate::{GeoPoint, Region};

/// What a routed message is aimed at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Target {
    Area { region: Region },
    Point { point: GeoPoint },
    Peer { dest: OverlayId },
    Nearest { point: GeoPoint },
}

/// A routed message envelope. `level` starts at 1 at the initiating peer.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub msg_id: String,
    pub payload: Vec<u8>,
    pub target: Target,
    pub level: u32,
}

/// How a forward was chosen; recorded in traces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteVia {
    /// Leaf-row member scan of the area multicast.
    LeafMember,
    /// Designated contact of a sibling zone.
    Sibling(ZoneId),
    /// Leaf-row member closest to a target point.
    ClosestMember,
    /// Direct send to a named leaf mate.
    DirectPeer,
    /// Empty-zone fallback: nearest populated zone to the target point.
    Fallback(ZoneId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub to: PeerName,
    pub level: u32,
    pub via: RouteVia,
}

/// Result of running area multicast at one peer.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AreaStep {
    pub deliver_local: bool,
    pub forwards: Vec<Forward>,
}

/// Result of running point routing at one peer.
#[derive(Debug, Clone, PartialEq)]
pub enum PointStep {
    DeliverLocal,
    Forward(Forward),
    /// Join variant only: the point lies in this empty zone, and the
    /// current peer tracks it directly.
    EmptyZone(ZoneId),
}

/// Result of running identifier routing at one peer.
#[derive(Debug, Clone, PartialEq)]
pub enum PeerStep {
    DeliverLocal,
    Forward(Forward),
    /// The destination leaf was reached but the peer is not there.
    NotFound,
}

/// Area multicast: deliver locally when the own coordinate falls in the
/// area, forward to every leaf member inside the area, and forward to the
/// designated contact of every sibling zone intersecting the area, scanning
/// rows from the leaf level up to `level`.
pub fn route_area(table: &RoutingTable, area: &Region, level: u32) -> AreaStep {
    let depth = table.leaf_depth();
    let deepest = depth as u32 + 1;
    let mut step = AreaStep {
        deliver_local: area.contains(table.owner_coord),
        forwards: Vec::new(),
    };
    if level <= deepest {
        for member in table.leaf_mates() {
            if area.contains(member.coord) {
                step.forwards.push(Forward {
                    to: member.name,
                    level: deepest + 1,
                    via: RouteVia::LeafMember,
                });
            }
        }
    }
    let lowest_row = level.max(1) as usize;
    for row in table.rows.iter().rev() {
        if row.level < lowest_row {
            break;
        }
        for entry in &row.siblings {
            if let Some(designated) = entry.designated() {
                if entry.region.intersects_region(area) {
                    step.forwards.push(Forward {
                        to: designated.name,
                        level: row.level as u32 + 1,
                        via: RouteVia::Sibling(entry.zone.clone()),
                    });
                }
            }
        }
    }
    step
}

/// Closest leaf member to `point` (ties by name), owner included.
fn closest_member(table: &RoutingTable, point: GeoPoint) -> Option<PeerName> {
    table
        .leaf
        .members
        .iter()
        .map(|m| (distance_km(m.coord, point), m.name))
        .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)))
        .map(|(_, name)| name)
}

fn leaf_phase(table: &RoutingTable, point: GeoPoint) -> PointStep {
    match closest_member(table, point) {
        Some(name) if name != table.owner => PointStep::Forward(Forward {
            to: name,
            level: table.leaf_depth() as u32 + 2,
            via: RouteVia::ClosestMember,
        }),
        _ => PointStep::DeliverLocal,
    }
}

enum EmptyZonePolicy {
    FallbackToNearest,
    Report,
}

fn route_point_inner(
    table: &RoutingTable,
    point: GeoPoint,
    level: u32,
    on_empty: EmptyZonePolicy,
) -> PointStep {
    let lowest_row = level.max(1) as usize;
    // The zones across rows plus the own leaf are disjoint, so at most one
    // sibling holds the point; scan deep-to-shallow and stop on the match.
    for row in table.rows.iter().rev() {
        if row.level < lowest_row {
            break;
        }
        for entry in &row.siblings {
            if !entry.region.contains(point) {
                continue;
            }
            if let Some(designated) = entry.designated() {
                return PointStep::Forward(Forward {
                    to: designated.name,
                    level: row.level as u32 + 1,
                    via: RouteVia::Sibling(entry.zone.clone()),
                });
            }
            return match on_empty {
                EmptyZonePolicy::Report => PointStep::EmptyZone(entry.zone.clone()),
                EmptyZonePolicy::FallbackToNearest => fallback_to_nearest(table, point, level),
            };
        }
    }
    leaf_phase(table, point)
}

/// The point's zone holds no peers: deliver toward the populated zone in
/// the table whose region is nearest to the point (ties by shallower row,
/// then smaller label); the own leaf competes with its region distance.
fn fallback_to_nearest(table: &RoutingTable, point: GeoPoint, level: u32) -> PointStep {
    let lowest_row = level.max(1) as usize;
    let mut best: Option<(f64, usize, u32, Forward)> = None;
    for row in table.rows.iter().rev() {
        if row.level < lowest_row {
            break;
        }
        for entry in &row.siblings {
            let Some(designated) = entry.designated() else {
                continue;
            };
            let key = (entry.region.distance_km(point), row.level, entry.label());
            if best
                .as_ref()
                .map(|(d, l, lb, _)| (key.0, key.1, key.2) < (*d, *l, *lb))
                .unwrap_or(true)
            {
                best = Some((
                    key.0,
                    key.1,
                    key.2,
                    Forward {
                        to: designated.name,
                        level: row.level as u32 + 1,
                        via: RouteVia::Fallback(entry.zone.clone()),
                    },
                ));
            }
        }
    }
    let leaf_distance = table.leaf.region.distance_km(point);
    match best {
        Some((d, _, _, forward)) if d < leaf_distance => PointStep::Forward(forward),
        _ => leaf_phase(table, point),
    }
}

/// Point routing: descend through the single sibling zone holding the
/// point; in the leaf, hand over to the member closest to the point (ties
/// by name). Empty target zones divert to the nearest populated zone.
pub fn route_point(table: &RoutingTable, point: GeoPoint, level: u32) -> PointStep {
    route_point_inner(table, point, level, EmptyZonePolicy::FallbackToNearest)
}

/// Point routing for join placement: like [`route_point`], but when the
/// point's zone is empty the current peer reports it instead of diverting,
/// because it holds that zone's boundary and must handle the join itself.
pub fn route_point_join(table: &RoutingTable, point: GeoPoint, level: u32) -> PointStep {
    route_point_inner(table, point, level, EmptyZonePolicy::Report)
}

/// Identifier routing: longest-common-prefix descent over zone paths, then
/// a direct leaf-row send.
pub fn route_peer(table: &RoutingTable, dest: &OverlayId) -> PeerStep {
    if dest.peer == table.owner {
        return PeerStep::DeliverLocal;
    }
    let own = &table.leaf.zone;
    let common = own.common_depth(&dest.zone);
    if common < own.depth() && common < dest.zone.depth() {
        // Paths diverge: forward into the sibling zone matching the next
        // label of the destination path.
        let row = &table.rows[common];
        let want = dest.zone.path()[common];
        let entry = row.siblings.iter().find(|e| e.zone.label() == Some(want));
        if let Some(designated) = entry.and_then(|e| e.designated()) {
            return PeerStep::Forward(Forward {
                to: designated.name,
                level: common as u32 + 2,
                via: RouteVia::Sibling(entry.unwrap().zone.clone()),
            });
        }
        return PeerStep::NotFound;
    }
    // The destination zone is this leaf (or a stale relative of it): the
    // leaf row knows every member by name.
    if table.leaf.members.iter().any(|m| m.name == dest.peer) {
        return PeerStep::Forward(Forward {
            to: dest.peer,
            level: table.leaf_depth() as u32 + 2,
            via: RouteVia::DirectPeer,
        });
    }
    PeerStep::NotFound
}

#[cfg(test)]
mod tests;
