//! Join/leave bookkeeping and the split/merge coordination protocol.
//!
//! Structural changes to a leaf are performed by its leader — the smallest
//! peer name in the leaf — and announced through [`ZoneUpdate`] notices.
//! Updates are composed entirely from state the initiating peer holds (its
//! own table and leaf membership), so any converged member could have
//! produced the same bytes; the simulator delivers them reliably and in
//! order to leaf members and to the peers whose tables reference the
//! affected zones. Per-leaf epochs order updates and suppress duplicate
//! coordination attempts.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ids::{PeerName, ZoneId};
use crate::policy::AdaptationPolicy;
use crate::table::{ContactSlot, RoutingTable, SiblingEntry, LeafRow, RoutingRow};
use crate::tree::{MergeOutcome, SplitOutcome, TreeError, ZoneTree};
use crate::Region;

/// Per-zone structural version counters. Every join, leave, split, or merge
/// of a leaf bumps its epoch; a merge bumps both leaves involved.
pub type EpochMap = BTreeMap<ZoneId, u64>;

pub fn bump_epoch(epochs: &mut EpochMap, zone: &ZoneId) -> u64 {
    let e = epochs.entry(zone.clone()).or_insert(0);
    *e += 1;
    *e
}

pub fn current_epoch(epochs: &EpochMap, zone: &ZoneId) -> u64 {
    epochs.get(zone).copied().unwrap_or(0)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoordinationError {
    #[error("peer {invoker} is not the leader of {zone} (leader is {leader})")]
    NotLeader {
        zone: ZoneId,
        invoker: PeerName,
        leader: PeerName,
    },
    #[error("merge partner {partner} is busy: epoch moved from {expected} to {current}")]
    PartnerBusy {
        partner: ZoneId,
        expected: u64,
        current: u64,
    },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// New boundary-and-membership descriptor for one zone, carried by split
/// and merge notices.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneChild {
    pub zone: ZoneId,
    pub region: Region,
    pub is_remainder: bool,
    pub members: Vec<ContactSlot>,
}

/// Replacement contact set for one ancestor zone of a departing peer's
/// leaf; lets referring tables refill their backups without a query round.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneFragment {
    pub zone: ZoneId,
    pub contacts: Vec<ContactSlot>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ZoneUpdateKind {
    Join {
        peer: ContactSlot,
    },
    Leave {
        peer: PeerName,
        fragments: Vec<ZoneFragment>,
    },
    Split {
        children: Vec<ZoneChild>,
    },
    Merge {
        absorbed: ZoneId,
        partner: ZoneId,
        merged: ZoneChild,
        collapsed: bool,
    },
}

/// A membership or structure notice about one leaf zone.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneUpdate {
    /// The leaf the notice is about (for merges, the absorbed leaf).
    pub zone: ZoneId,
    /// That leaf's new epoch.
    pub epoch: u64,
    pub kind: ZoneUpdateKind,
}

/// The deterministic coordinator of a leaf: its smallest peer name.
pub fn leader_of(members: &[PeerName]) -> Option<PeerName> {
    members.iter().min().copied()
}

pub fn compose_join(leaf: ZoneId, epoch: u64, joiner: ContactSlot) -> ZoneUpdate {
    ZoneUpdate {
        zone: leaf,
        epoch,
        kind: ZoneUpdateKind::Join { peer: joiner },
    }
}

/// Builds a leave notice from the departing peer's own table: one
/// replacement fragment per ancestor zone, computed without the leaver.
pub fn compose_leave(leaver: &RoutingTable, epoch: u64) -> ZoneUpdate {
    let fragments = (1..=leaver.leaf_depth())
        .map(|depth| ZoneFragment {
            zone: leaver.rows[depth - 1].self_zone.clone(),
            contacts: leaver.ancestor_contacts(depth, Some(leaver.owner)),
        })
        .collect();
    ZoneUpdate {
        zone: leaver.leaf.zone.clone(),
        epoch,
        kind: ZoneUpdateKind::Leave {
            peer: leaver.owner,
            fragments,
        },
    }
}

fn slots(tree: &ZoneTree, members: &[PeerName]) -> Vec<ContactSlot> {
    members
        .iter()
        .map(|n| ContactSlot {
            name: *n,
            coord: tree.coordinate(*n).expect("member has a coordinate"),
        })
        .collect()
}

pub fn compose_split(tree: &ZoneTree, outcome: &SplitOutcome, epoch: u64) -> ZoneUpdate {
    ZoneUpdate {
        zone: outcome.zone.clone(),
        epoch,
        kind: ZoneUpdateKind::Split {
            children: outcome
                .children
                .iter()
                .map(|c| ZoneChild {
                    zone: c.zone.clone(),
                    region: c.region.clone(),
                    is_remainder: c.is_remainder,
                    members: slots(tree, &c.members),
                })
                .collect(),
        },
    }
}

pub fn compose_merge(tree: &ZoneTree, outcome: &MergeOutcome, epoch: u64) -> ZoneUpdate {
    ZoneUpdate {
        zone: outcome.absorbed.clone(),
        epoch,
        kind: ZoneUpdateKind::Merge {
            absorbed: outcome.absorbed.clone(),
            partner: outcome.partner.clone(),
            merged: ZoneChild {
                zone: outcome.merged_zone.clone(),
                region: outcome.merged_region.clone(),
                is_remainder: tree
                    .node(&outcome.merged_zone)
                    .map(|n| n.is_remainder)
                    .unwrap_or(false),
                members: slots(tree, &outcome.members),
            },
            collapsed: outcome.collapsed,
        },
    }
}

/// The routing table a joiner receives when it lands in an already
/// populated leaf: the handler's rows verbatim, the leaf row with the
/// joiner added.
pub fn join_table_from(handler: &RoutingTable, joiner: ContactSlot) -> RoutingTable {
    let mut table = handler.clone();
    table.owner = joiner.name;
    table.owner_coord = joiner.coord;
    if !table.leaf.members.iter().any(|m| m.name == joiner.name) {
        let pos = table
            .leaf
            .members
            .binary_search_by_key(&joiner.name, |m| m.name)
            .unwrap_err();
        table.leaf.members.insert(pos, joiner);
    }
    table
}

/// The routing table a joiner receives when its coordinate falls in an
/// empty zone: the handler shares all rows above the target zone's level,
/// and at that level the handler's own zone becomes a sibling of the
/// joiner's (with contacts computed from the handler's deeper rows).
///
/// Only a peer whose table lists `zone` directly as a sibling entry can
/// build this; returns `None` otherwise.
pub fn join_table_for_empty_zone(
    handler: &RoutingTable,
    zone: &ZoneId,
    joiner: ContactSlot,
) -> Option<RoutingTable> {
    let depth = zone.depth();
    if depth == 0 || depth > handler.leaf_depth() {
        return None;
    }
    let row = &handler.rows[depth - 1];
    let target = row.siblings.iter().find(|e| e.zone == *zone)?;

    let mut rows: Vec<RoutingRow> = handler.rows[..depth - 1].to_vec();
    let mut siblings: Vec<SiblingEntry> = row
        .siblings
        .iter()
        .filter(|e| e.zone != *zone)
        .cloned()
        .collect();
    let handler_entry = SiblingEntry {
        zone: row.self_zone.clone(),
        region: row.self_region.clone(),
        contacts: handler.ancestor_contacts(depth, None),
    };
    let pos = siblings
        .binary_search_by_key(&handler_entry.label(), |e| e.label())
        .unwrap_err();
    siblings.insert(pos, handler_entry);
    rows.push(RoutingRow {
        level: depth,
        self_zone: target.zone.clone(),
        self_region: target.region.clone(),
        siblings,
    });
    Some(RoutingTable {
        owner: joiner.name,
        owner_coord: joiner.coord,
        rows,
        leaf: LeafRow {
            zone: target.zone.clone(),
            region: target.region.clone(),
            members: vec![joiner],
        },
    })
}

/// Leader-gated split of an over-threshold leaf: mutates the reference
/// tree, bumps the leaf's epoch, and returns the notice to broadcast.
pub fn coordinate_split(
    tree: &mut ZoneTree,
    epochs: &mut EpochMap,
    zone: &ZoneId,
    invoker: PeerName,
    policy: &AdaptationPolicy,
) -> Result<ZoneUpdate, CoordinationError> {
    let node = tree
        .node(zone)
        .ok_or_else(|| TreeError::UnknownZone(zone.clone()))?;
    if let Some(leader) = leader_of(&node.peers) {
        if leader != invoker {
            return Err(CoordinationError::NotLeader {
                zone: zone.clone(),
                invoker,
                leader,
            });
        }
    }
    let outcome = tree.split_leaf(zone, policy)?;
    let epoch = bump_epoch(epochs, zone);
    for child in &outcome.children {
        epochs.entry(child.zone.clone()).or_insert(0);
    }
    Ok(compose_split(tree, &outcome, epoch))
}

/// Leader-gated merge of an under-threshold leaf with a previously selected
/// partner. The partner's epoch is revalidated: if it changed since
/// selection (the partner split or merged meanwhile), the merge is refused
/// with `PartnerBusy` and must be rescheduled against fresh state.
pub fn coordinate_merge(
    tree: &mut ZoneTree,
    epochs: &mut EpochMap,
    zone: &ZoneId,
    invoker: Option<PeerName>,
    partner: &ZoneId,
    partner_epoch: u64,
    policy: &AdaptationPolicy,
) -> Result<ZoneUpdate, CoordinationError> {
    let node = tree
        .node(zone)
        .ok_or_else(|| TreeError::UnknownZone(zone.clone()))?;
    if let (Some(leader), Some(invoker)) = (leader_of(&node.peers), invoker) {
        if leader != invoker {
            return Err(CoordinationError::NotLeader {
                zone: zone.clone(),
                invoker,
                leader,
            });
        }
    }
    let current = current_epoch(epochs, partner);
    if current != partner_epoch {
        return Err(CoordinationError::PartnerBusy {
            partner: partner.clone(),
            expected: partner_epoch,
            current,
        });
    }
    let selected = tree.merge_partner(zone, policy)?;
    if selected != *partner {
        return Err(CoordinationError::PartnerBusy {
            partner: partner.clone(),
            expected: partner_epoch,
            current,
        });
    }
    let outcome = tree.merge_leaf(zone, policy)?;
    let epoch = bump_epoch(epochs, zone);
    bump_epoch(epochs, partner);
    if outcome.collapsed {
        bump_epoch(epochs, &outcome.parent);
    }
    Ok(compose_merge(tree, &outcome, epoch))
}
