//! Per-peer routing state: one row of sibling-zone contacts per hierarchy
//! level, plus the leaf row listing every member of the peer's own leaf
//! zone.
//!
//! Each sibling zone appears exactly once in the owner's table, so the zones
//! across all rows plus the own leaf partition the universe. Per populated
//! sibling the table keeps one designated contact (the smallest peer name in
//! that zone) and up to [`SIBLING_BACKUPS`] backups — the next-smallest
//! names. Every peer derives the same designated contact from the same
//! structure, which is what makes routing paths converge.

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::ids::{OverlayId, PeerName, ZoneId};
use crate::membership::{ZoneUpdate, ZoneUpdateKind};
use crate::tree::ZoneTree;
use crate::{GeoPoint, Region};

/// Backup contacts kept per sibling zone in addition to the designated one.
pub const SIBLING_BACKUPS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("unknown peer {0}")]
    UnknownPeer(PeerName),
    #[error("no sibling zone matches the predicate")]
    NoMatch,
    #[error("stale update for zone {zone}: {reason}")]
    StaleUpdate { zone: ZoneId, reason: String },
}

/// A stored contact: peer name (standing in for its network address) plus
/// its coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContactSlot {
    pub name: PeerName,
    pub coord: GeoPoint,
}

/// Full contact record for one sibling zone, materialized on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub address: PeerName,
    pub coordinate: GeoPoint,
    pub zone_boundary: Region,
    pub overlay_id: OverlayId,
}

/// One sibling zone tracked by a row: its boundary and the known contacts,
/// sorted by name (`contacts[0]` is the designated one). Empty zones keep
/// their entry with no contacts so the row still tiles the level.
#[derive(Debug, Clone, PartialEq)]
pub struct SiblingEntry {
    pub zone: ZoneId,
    pub region: Region,
    pub contacts: Vec<ContactSlot>,
}

impl SiblingEntry {
    pub fn label(&self) -> u32 {
        self.zone.label().unwrap_or(0)
    }

    pub fn designated(&self) -> Option<&ContactSlot> {
        self.contacts.first()
    }

    pub fn designated_contact(&self) -> Option<Contact> {
        self.designated().map(|slot| Contact {
            address: slot.name,
            coordinate: slot.coord,
            zone_boundary: self.region.clone(),
            overlay_id: OverlayId::new(self.zone.clone(), slot.name),
        })
    }

    fn insert_contact(&mut self, slot: ContactSlot) {
        if self.contacts.iter().any(|c| c.name == slot.name) {
            return;
        }
        let pos = self
            .contacts
            .binary_search_by_key(&slot.name, |c| c.name)
            .unwrap_err();
        self.contacts.insert(pos, slot);
        self.contacts.truncate(1 + SIBLING_BACKUPS);
    }
}

/// Sibling zones at one level of the owner's branch, together with the
/// boundary of the self-zone at that level.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingRow {
    /// 1-based zone depth; level 1 holds children of the universe.
    pub level: usize,
    pub self_zone: ZoneId,
    pub self_region: Region,
    /// Sibling entries in label order.
    pub siblings: Vec<SiblingEntry>,
}

/// The deepest row: full membership of the owner's leaf zone, owner
/// included.
#[derive(Debug, Clone, PartialEq)]
pub struct LeafRow {
    pub zone: ZoneId,
    pub region: Region,
    pub members: Vec<ContactSlot>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable {
    pub owner: PeerName,
    pub owner_coord: GeoPoint,
    /// Rows for levels `1..=d` where `d` is the owner's leaf depth.
    pub rows: Vec<RoutingRow>,
    pub leaf: LeafRow,
}

/// Predicate for scanning a row's sibling zones.
pub enum SiblingPredicate<'a> {
    IntersectsArea(&'a Region),
    ContainsPoint(GeoPoint),
    /// Matches the sibling zone that is an ancestor-or-self of the id.
    IdPrefix(&'a ZoneId),
}

impl SiblingPredicate<'_> {
    pub fn matches(&self, entry: &SiblingEntry) -> bool {
        match self {
            SiblingPredicate::IntersectsArea(area) => entry.region.intersects_region(area),
            SiblingPredicate::ContainsPoint(p) => entry.region.contains(*p),
            SiblingPredicate::IdPrefix(zone) => entry.zone.contains_zone(zone),
        }
    }
}

/// Designated contacts of all sibling zones in `row` satisfying the
/// predicate, in label order. Entries without any contact are skipped.
pub fn matching_contacts<'a>(
    row: &'a RoutingRow,
    pred: &'a SiblingPredicate<'a>,
) -> impl Iterator<Item = Contact> + 'a {
    row.siblings
        .iter()
        .filter(|e| pred.matches(e))
        .filter_map(|e| e.designated_contact())
}

/// Designated contact of the first matching sibling zone in label order;
/// `NoMatch` when no populated sibling satisfies the predicate.
pub fn select_contact(row: &RoutingRow, pred: &SiblingPredicate) -> Result<Contact, TableError> {
    matching_contacts(row, pred).next().ok_or(TableError::NoMatch)
}

impl RoutingTable {
    pub fn leaf_depth(&self) -> usize {
        self.rows.len()
    }

    /// Builds the table a peer would hold in a fully consistent network,
    /// straight from the reference tree.
    pub fn build(tree: &ZoneTree, owner: PeerName) -> Result<Self, TableError> {
        let coord = tree
            .coordinate(owner)
            .ok_or(TableError::UnknownPeer(owner))?;
        let leaf = tree.locate_leaf(coord);
        debug_assert!(leaf.peers.contains(&owner));
        let path = leaf.id.clone();
        let mut rows = Vec::with_capacity(path.depth());
        let mut node = tree.root();
        for depth in 1..=path.depth() {
            let my_label = path.path()[depth - 1];
            let mut siblings = Vec::with_capacity(node.children.len().saturating_sub(1));
            let mut self_child = None;
            for child in &node.children {
                if child.id.label() == Some(my_label) {
                    self_child = Some(child);
                } else {
                    siblings.push(SiblingEntry {
                        zone: child.id.clone(),
                        region: child.region.clone(),
                        contacts: tree
                            .smallest_members(child, 1 + SIBLING_BACKUPS)
                            .into_iter()
                            .map(|(name, coord)| ContactSlot { name, coord })
                            .collect(),
                    });
                }
            }
            let self_child = self_child.expect("own branch present at every level");
            rows.push(RoutingRow {
                level: depth,
                self_zone: self_child.id.clone(),
                self_region: self_child.region.clone(),
                siblings,
            });
            node = self_child;
        }
        let members = node
            .peers
            .iter()
            .map(|n| ContactSlot {
                name: *n,
                coord: tree.coordinate(*n).expect("member has a coordinate"),
            })
            .collect();
        Ok(RoutingTable {
            owner,
            owner_coord: coord,
            rows,
            leaf: LeafRow {
                zone: path,
                region: node.region.clone(),
                members,
            },
        })
    }

    /// The owner's overlay identifier (current leaf zone plus name).
    pub fn overlay_id(&self) -> OverlayId {
        OverlayId::new(self.leaf.zone.clone(), self.owner)
    }

    /// Leaf members other than the owner, in name order.
    pub fn leaf_mates(&self) -> impl Iterator<Item = &ContactSlot> {
        let owner = self.owner;
        self.leaf.members.iter().filter(move |m| m.name != owner)
    }

    /// The known contacts (smallest names and coordinates) of the owner's
    /// own ancestor zone at `depth`, excluding `exclude`; at most
    /// `1 + SIBLING_BACKUPS` entries. Depth 0 covers the whole network as
    /// the owner sees it.
    pub fn ancestor_contacts(
        &self,
        depth: usize,
        exclude: Option<PeerName>,
    ) -> Vec<ContactSlot> {
        let mut slots: Vec<ContactSlot> = Vec::new();
        for row in self.rows.iter().filter(|r| r.level > depth) {
            for entry in &row.siblings {
                slots.extend(entry.contacts.iter().copied());
            }
        }
        slots.extend(self.leaf.members.iter().copied());
        if let Some(skip) = exclude {
            slots.retain(|s| s.name != skip);
        }
        slots.sort_by_key(|s| s.name);
        slots.dedup_by_key(|s| s.name);
        slots.truncate(1 + SIBLING_BACKUPS);
        slots
    }

    /// Removes a dead contact from the entry for `zone`, promoting the next
    /// backup. Returns the new designated contact, if any remains.
    pub fn drop_contact(&mut self, zone: &ZoneId, dead: PeerName) -> Option<ContactSlot> {
        for row in &mut self.rows {
            for entry in &mut row.siblings {
                if entry.zone == *zone {
                    entry.contacts.retain(|c| c.name != dead);
                    return entry.designated().copied();
                }
            }
        }
        None
    }

    /// Removes a dead peer from the leaf row.
    pub fn drop_leaf_member(&mut self, dead: PeerName) {
        self.leaf.members.retain(|m| m.name != dead);
    }

    /// Replaces the contact list of the entry tracking `zone` (used by
    /// sibling-assisted repair after silent failures).
    pub fn replace_contacts(&mut self, zone: &ZoneId, contacts: Vec<ContactSlot>) {
        for row in &mut self.rows {
            for entry in &mut row.siblings {
                if entry.zone == *zone {
                    entry.contacts = contacts;
                    return;
                }
            }
        }
    }

    /// The contact list the owner holds for sibling zone `zone`, if tracked.
    pub fn contacts_for(&self, zone: &ZoneId) -> Option<&[ContactSlot]> {
        for row in &self.rows {
            for entry in &row.siblings {
                if entry.zone == *zone {
                    return Some(&entry.contacts);
                }
            }
        }
        None
    }

    /// Applies a membership/structure notice to this table. Split and merge
    /// notices restructure rows for members of the affected leaves and
    /// rewrite sibling entries for peers that track them; join and leave
    /// notices maintain leaf rows and per-zone contact lists.
    pub fn apply_zone_update(&mut self, update: &ZoneUpdate) -> Result<(), TableError> {
        match &update.kind {
            ZoneUpdateKind::Join { peer } => {
                if update.zone == self.leaf.zone {
                    if peer.name != self.owner
                        && !self.leaf.members.iter().any(|m| m.name == peer.name)
                    {
                        let pos = self
                            .leaf
                            .members
                            .binary_search_by_key(&peer.name, |m| m.name)
                            .unwrap_err();
                        self.leaf.members.insert(pos, *peer);
                    }
                } else {
                    for row in &mut self.rows {
                        for entry in &mut row.siblings {
                            if entry.zone.contains_zone(&update.zone) {
                                entry.insert_contact(*peer);
                            }
                        }
                    }
                }
                Ok(())
            }
            ZoneUpdateKind::Leave { peer, fragments } => {
                if update.zone == self.leaf.zone {
                    self.leaf.members.retain(|m| m.name != *peer);
                } else {
                    for fragment in fragments {
                        self.replace_contacts(&fragment.zone, fragment.contacts.clone());
                    }
                    // Defensive: no entry may keep referencing the leaver.
                    for row in &mut self.rows {
                        for entry in &mut row.siblings {
                            entry.contacts.retain(|c| c.name != *peer);
                        }
                    }
                }
                Ok(())
            }
            ZoneUpdateKind::Split { children } => {
                if update.zone != self.leaf.zone {
                    return Err(TableError::StaleUpdate {
                        zone: update.zone.clone(),
                        reason: format!(
                            "split notice for {} but own leaf is {}",
                            update.zone, self.leaf.zone
                        ),
                    });
                }
                let mine = children
                    .iter()
                    .find(|c| c.members.iter().any(|m| m.name == self.owner))
                    .ok_or_else(|| TableError::StaleUpdate {
                        zone: update.zone.clone(),
                        reason: "owner not listed in any new sub-zone".into(),
                    })?;
                let level = self.leaf.zone.depth() + 1;
                let siblings = children
                    .iter()
                    .filter(|c| c.zone != mine.zone)
                    .map(|c| SiblingEntry {
                        zone: c.zone.clone(),
                        region: c.region.clone(),
                        contacts: c.members.iter().take(1 + SIBLING_BACKUPS).copied().collect(),
                    })
                    .collect();
                self.rows.push(RoutingRow {
                    level,
                    self_zone: mine.zone.clone(),
                    self_region: mine.region.clone(),
                    siblings,
                });
                self.leaf = LeafRow {
                    zone: mine.zone.clone(),
                    region: mine.region.clone(),
                    members: mine.members.clone(),
                };
                Ok(())
            }
            ZoneUpdateKind::Merge {
                absorbed,
                partner,
                merged,
                collapsed,
            } => {
                let i_am_member = merged.members.iter().any(|m| m.name == self.owner);
                if i_am_member {
                    let depth = merged.zone.depth();
                    self.rows.truncate(depth);
                    if !*collapsed {
                        let row = self.rows.last_mut().ok_or_else(|| TableError::StaleUpdate {
                            zone: update.zone.clone(),
                            reason: "merge notice deeper than own rows".into(),
                        })?;
                        row.self_zone = merged.zone.clone();
                        row.self_region = merged.region.clone();
                        row.siblings
                            .retain(|e| e.zone != *absorbed && e.zone != *partner);
                    }
                    self.leaf = LeafRow {
                        zone: merged.zone.clone(),
                        region: merged.region.clone(),
                        members: merged.members.clone(),
                    };
                    Ok(())
                } else {
                    // Referrer inside the parent: collapse never leaves one,
                    // so both old entries must sit in one row here.
                    let Some(row) = self.rows.iter_mut().find(|r| {
                        r.siblings.iter().any(|e| e.zone == *absorbed || e.zone == *partner)
                    }) else {
                        return Err(TableError::StaleUpdate {
                            zone: update.zone.clone(),
                            reason: "merge notice for zones this table does not track".into(),
                        });
                    };
                    row.siblings
                        .retain(|e| e.zone != *absorbed && e.zone != *partner);
                    let entry = SiblingEntry {
                        zone: merged.zone.clone(),
                        region: merged.region.clone(),
                        contacts: merged
                            .members
                            .iter()
                            .take(1 + SIBLING_BACKUPS)
                            .copied()
                            .collect(),
                    };
                    let pos = row
                        .siblings
                        .binary_search_by_key(&entry.label(), |e| e.label())
                        .unwrap_err();
                    row.siblings.insert(pos, entry);
                    Ok(())
                }
            }
        }
    }

    /// Canonical JSON document for `dump-peer`.
    pub fn to_canonical_json(&self) -> Value {
        let slot = |s: &ContactSlot, zone: &ZoneId| {
            json!({
                "overlay_id": OverlayId::new(zone.clone(), s.name).to_string(),
                "address": s.name.to_string(),
                "coordinate": s.coord.to_string(),
            })
        };
        json!({
            "format_version": 1,
            "owner": self.overlay_id().to_string(),
            "coordinate": self.owner_coord.to_string(),
            "rows": self.rows.iter().map(|row| json!({
                "level": row.level,
                "self_zone": row.self_zone,
                "self_region": row.self_region,
                "siblings": row.siblings.iter().map(|e| json!({
                    "zone": e.zone,
                    "region": e.region,
                    "contacts": e.contacts.iter().map(|c| slot(c, &e.zone)).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
            "leaf": {
                "zone": self.leaf.zone,
                "region": self.leaf.region,
                "members": self.leaf.members.iter().map(|m| slot(m, &self.leaf.zone)).collect::<Vec<_>>(),
            },
        })
    }
}

#[cfg(test)]
mod tests;
