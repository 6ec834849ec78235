//! Global zone hierarchy: the simulator's reference structure (oracle).
//!
//! Every internal zone is partitioned exactly by its children; every peer
//! lives in exactly one leaf. Splits carve a crowded leaf into the tight
//! bounding boxes of its peer clusters plus an optional remainder-leaf-zone
//! (label 0) covering the unclaimed area; merges dissolve a thin leaf into a
//! sibling, preferring the remainder. Peers never move: only boundaries and
//! identifiers change.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::cluster::cluster_peers;
use crate::geom::GeomError;
use crate::ids::{OverlayId, PeerName, ZoneId};
use crate::policy::AdaptationPolicy;
use crate::{GeoPoint, Rect, Region};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("unknown zone {0}")]
    UnknownZone(ZoneId),
    #[error("zone {0} is not a leaf")]
    NotALeaf(ZoneId),
    #[error("zone {zone} holds {count} peers, not above the split threshold {threshold}")]
    NoSplitNeeded {
        zone: ZoneId,
        count: usize,
        threshold: usize,
    },
    #[error("zone {zone} holds {count} peers, not below the merge threshold {threshold}")]
    AboveThreshold {
        zone: ZoneId,
        count: usize,
        threshold: usize,
    },
    #[error("all peer coordinates identical; no geographic clusters exist")]
    DegenerateCluster,
    #[error("cluster count must be at least 2, got {0}")]
    InvalidClusterCount(usize),
    #[error("zone {0} has no leaf sibling to merge with")]
    NoLeafSibling(ZoneId),
    #[error("peer {0} already present")]
    DuplicatePeer(PeerName),
    #[error("unknown peer {0}")]
    UnknownPeer(PeerName),
    #[error(transparent)]
    Geometry(#[from] GeomError),
}

/// One zone in the hierarchy. Children are kept in label order; peers only
/// on leaves, sorted by name.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneNode {
    pub id: ZoneId,
    pub region: Region,
    pub is_remainder: bool,
    pub children: Vec<ZoneNode>,
    pub peers: Vec<PeerName>,
}

impl ZoneNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    fn to_json(&self) -> Value {
        json!({
            "id": self.id,
            "region": self.region,
            "is_remainder": self.is_remainder,
            "peers": self
                .peers
                .iter()
                .map(|p| OverlayId::new(self.id.clone(), *p).to_string())
                .collect::<Vec<_>>(),
            "children": self.children.iter().map(|c| c.to_json()).collect::<Vec<_>>(),
        })
    }
}

/// Descriptor of a child zone produced by a split (or the merged zone after
/// a merge), carried in zone updates.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneChildInfo {
    pub zone: ZoneId,
    pub region: Region,
    pub is_remainder: bool,
    pub members: Vec<PeerName>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub zone: ZoneId,
    /// New children in label order (remainder first when present).
    pub children: Vec<ZoneChildInfo>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutcome {
    pub parent: ZoneId,
    pub absorbed: ZoneId,
    pub partner: ZoneId,
    /// Partner's id, or the parent's when the merge collapsed it.
    pub merged_zone: ZoneId,
    pub merged_region: Region,
    pub members: Vec<PeerName>,
    pub collapsed: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The zoning hierarchy plus the peer coordinate index.
#[derive(Debug, Clone, PartialEq)]
pub struct ZoneTree {
    root: ZoneNode,
    coords: BTreeMap<PeerName, GeoPoint>,
}

impl Default for ZoneTree {
    fn default() -> Self {
        Self::new()
    }
}

impl ZoneTree {
    pub fn new() -> Self {
        Self {
            root: ZoneNode {
                id: ZoneId::root(),
                region: Region::universe(),
                is_remainder: false,
                children: Vec::new(),
                peers: Vec::new(),
            },
            coords: BTreeMap::new(),
        }
    }

    pub fn root(&self) -> &ZoneNode {
        &self.root
    }

    pub fn coordinate(&self, peer: PeerName) -> Option<GeoPoint> {
        self.coords.get(&peer).copied()
    }

    pub fn coordinates(&self) -> &BTreeMap<PeerName, GeoPoint> {
        &self.coords
    }

    pub fn peer_count(&self) -> usize {
        self.coords.len()
    }

    pub fn node(&self, id: &ZoneId) -> Option<&ZoneNode> {
        let mut node = &self.root;
        for label in id.path() {
            node = node.children.iter().find(|c| c.id.label() == Some(*label))?;
        }
        Some(node)
    }

    fn node_mut(&mut self, id: &ZoneId) -> Option<&mut ZoneNode> {
        let mut node = &mut self.root;
        for label in id.path() {
            node = node
                .children
                .iter_mut()
                .find(|c| c.id.label() == Some(*label))?;
        }
        Some(node)
    }

    /// The unique leaf whose region contains `p`.
    pub fn locate_leaf(&self, p: GeoPoint) -> &ZoneNode {
        let mut node = &self.root;
        while !node.is_leaf() {
            node = node
                .children
                .iter()
                .find(|c| c.region.contains(p))
                .expect("children partition the parent; point must land in one");
        }
        node
    }

    /// Current leaf of a peer, located through its coordinate.
    pub fn leaf_of(&self, peer: PeerName) -> Option<&ZoneNode> {
        let p = self.coords.get(&peer)?;
        Some(self.locate_leaf(*p))
    }

    pub fn overlay_id(&self, peer: PeerName) -> Option<OverlayId> {
        Some(OverlayId::new(self.leaf_of(peer)?.id.clone(), peer))
    }

    pub fn leaves(&self) -> Vec<&ZoneNode> {
        let mut out = Vec::new();
        fn walk<'a>(node: &'a ZoneNode, out: &mut Vec<&'a ZoneNode>) {
            if node.is_leaf() {
                out.push(node);
            } else {
                for c in &node.children {
                    walk(c, out);
                }
            }
        }
        walk(&self.root, &mut out);
        out
    }

    /// Inserts a peer into the leaf containing its coordinate; returns that
    /// leaf's id.
    pub fn add_peer(&mut self, peer: PeerName, coord: GeoPoint) -> Result<ZoneId, TreeError> {
        if self.coords.contains_key(&peer) {
            return Err(TreeError::DuplicatePeer(peer));
        }
        let leaf_id = self.locate_leaf(coord).id.clone();
        let node = self.node_mut(&leaf_id).expect("leaf just located");
        let pos = node.peers.binary_search(&peer).unwrap_err();
        node.peers.insert(pos, peer);
        self.coords.insert(peer, coord);
        Ok(leaf_id)
    }

    pub fn remove_peer(&mut self, peer: PeerName) -> Result<ZoneId, TreeError> {
        let coord = *self.coords.get(&peer).ok_or(TreeError::UnknownPeer(peer))?;
        let leaf_id = self.locate_leaf(coord).id.clone();
        let node = self.node_mut(&leaf_id).expect("leaf just located");
        node.peers.retain(|p| *p != peer);
        self.coords.remove(&peer);
        Ok(leaf_id)
    }

    fn members_with_coords(&self, node: &ZoneNode) -> Vec<(PeerName, GeoPoint)> {
        node.peers
            .iter()
            .map(|n| (*n, self.coords[n]))
            .collect()
    }

    /// The `n` smallest-named peers anywhere in `node`'s subtree, with
    /// coordinates.
    pub fn smallest_members(&self, node: &ZoneNode, n: usize) -> Vec<(PeerName, GeoPoint)> {
        fn collect(node: &ZoneNode, out: &mut Vec<PeerName>) {
            out.extend(node.peers.iter().copied());
            for c in &node.children {
                collect(c, out);
            }
        }
        let mut names = Vec::new();
        collect(node, &mut names);
        names.sort();
        names.truncate(n);
        names.into_iter().map(|name| (name, self.coords[&name])).collect()
    }

    /// Splits an over-threshold leaf into geographic cluster sub-zones plus
    /// a remainder-leaf-zone for the unclaimed area. When the cluster boxes
    /// cannot coexist (overlap, or collide with a hole of a remainder-shaped
    /// parent), the leaf falls back to a median-cut partition into
    /// `cluster_count` slabs with no remainder.
    pub fn split_leaf(
        &mut self,
        zone: &ZoneId,
        policy: &AdaptationPolicy,
    ) -> Result<SplitOutcome, TreeError> {
        let node = self
            .node(zone)
            .ok_or_else(|| TreeError::UnknownZone(zone.clone()))?;
        if !node.is_leaf() {
            return Err(TreeError::NotALeaf(zone.clone()));
        }
        if node.peers.len() <= policy.split_threshold {
            return Err(TreeError::NoSplitNeeded {
                zone: zone.clone(),
                count: node.peers.len(),
                threshold: policy.split_threshold,
            });
        }
        let pts = self.members_with_coords(node);
        let outer = *node.region.outer();
        let parent_holes = node.region.holes().to_vec();

        let groups = cluster_peers(&pts, policy.cluster_count)?;
        let boxes: Vec<Rect> = groups.iter().map(|g| tight_bbox(g, &outer)).collect();
        let mut boxes_ok = true;
        'check: for (i, a) in boxes.iter().enumerate() {
            for b in &boxes[i + 1..] {
                if a.overlaps(b) {
                    boxes_ok = false;
                    break 'check;
                }
            }
            for h in &parent_holes {
                if a.overlaps(h) {
                    boxes_ok = false;
                    break 'check;
                }
            }
        }

        let children: Vec<ZoneNode> = if boxes_ok {
            let mut all_holes = parent_holes.clone();
            all_holes.extend(boxes.iter().copied());
            let remainder = Region::remainder(outer, all_holes)?;
            let mut children = Vec::new();
            if !remainder.to_rects().is_empty() {
                children.push(ZoneNode {
                    id: zone.child(0),
                    region: remainder,
                    is_remainder: true,
                    children: Vec::new(),
                    peers: Vec::new(),
                });
            }
            for (i, (group, b)) in groups.iter().zip(&boxes).enumerate() {
                children.push(ZoneNode {
                    id: zone.child(i as u32 + 1),
                    region: Region::whole(*b),
                    is_remainder: false,
                    children: Vec::new(),
                    peers: group.iter().map(|(n, _)| *n).collect(),
                });
            }
            children
        } else {
            let slabs = median_rect_partition(&outer, &pts, policy.cluster_count)?;
            slabs
                .into_iter()
                .enumerate()
                .map(|(i, (rect, members))| {
                    let holes: Vec<Rect> = parent_holes
                        .iter()
                        .filter_map(|h| h.intersection(&rect))
                        .collect();
                    Ok(ZoneNode {
                        id: zone.child(i as u32 + 1),
                        region: Region::remainder(rect, holes)?,
                        is_remainder: false,
                        children: Vec::new(),
                        peers: members.into_iter().map(|(n, _)| n).collect(),
                    })
                })
                .collect::<Result<Vec<_>, TreeError>>()?
        };

        let outcome = SplitOutcome {
            zone: zone.clone(),
            children: children
                .iter()
                .map(|c| ZoneChildInfo {
                    zone: c.id.clone(),
                    region: c.region.clone(),
                    is_remainder: c.is_remainder,
                    members: c.peers.clone(),
                })
                .collect(),
        };
        let node = self.node_mut(zone).expect("checked above");
        node.children = children;
        node.peers = Vec::new();
        Ok(outcome)
    }

    /// The sibling an under-threshold leaf would merge with: the remainder
    /// sibling when it exists and is a leaf, otherwise the leaf sibling
    /// with the fewest peers (ties toward the smaller label).
    pub fn merge_partner(
        &self,
        zone: &ZoneId,
        policy: &AdaptationPolicy,
    ) -> Result<ZoneId, TreeError> {
        let node = self
            .node(zone)
            .ok_or_else(|| TreeError::UnknownZone(zone.clone()))?;
        if !node.is_leaf() {
            return Err(TreeError::NotALeaf(zone.clone()));
        }
        if node.peers.len() >= policy.merge_threshold {
            return Err(TreeError::AboveThreshold {
                zone: zone.clone(),
                count: node.peers.len(),
                threshold: policy.merge_threshold,
            });
        }
        let parent_id = zone
            .parent()
            .ok_or_else(|| TreeError::NoLeafSibling(zone.clone()))?;
        let parent = self.node(&parent_id).expect("parent of existing zone");
        let siblings: Vec<&ZoneNode> = parent.children.iter().filter(|c| c.id != *zone).collect();
        let partner = match siblings.iter().find(|c| c.is_remainder && c.is_leaf()) {
            Some(r) => Some(*r),
            None => siblings
                .iter()
                .filter(|c| c.is_leaf())
                .min_by_key(|c| (c.peers.len(), c.id.label()))
                .copied(),
        };
        Ok(partner
            .ok_or_else(|| TreeError::NoLeafSibling(zone.clone()))?
            .id
            .clone())
    }

    /// Merges an under-threshold leaf into its selected partner sibling.
    /// When only one child would remain it collapses into the parent, which
    /// becomes a leaf.
    pub fn merge_leaf(
        &mut self,
        zone: &ZoneId,
        policy: &AdaptationPolicy,
    ) -> Result<MergeOutcome, TreeError> {
        let partner_id = self.merge_partner(zone, policy)?;
        let node = self.node(zone).expect("validated by merge_partner");
        let absorbed_peers = node.peers.clone();
        let parent_id = zone.parent().expect("validated by merge_partner");
        let parent = self.node(&parent_id).expect("parent of existing zone");

        let parent_region = parent.region.clone();
        let others: Vec<&ZoneNode> = parent
            .children
            .iter()
            .filter(|c| c.id != *zone && c.id != partner_id)
            .collect();

        if others.is_empty() {
            // Last two children: collapse into the parent.
            let partner_peers = self.node(&partner_id).unwrap().peers.clone();
            let mut members = absorbed_peers;
            members.extend(partner_peers);
            members.sort();
            let parent_node = self.node_mut(&parent_id).unwrap();
            parent_node.children = Vec::new();
            parent_node.peers = members.clone();
            return Ok(MergeOutcome {
                parent: parent_id.clone(),
                absorbed: zone.clone(),
                partner: partner_id,
                merged_zone: parent_id,
                merged_region: parent_region,
                members,
                collapsed: true,
            });
        }

        // Merged region = parent region minus the remaining siblings,
        // expressed as outer-minus-holes over the parent's outer rect.
        let mut holes = parent_region.holes().to_vec();
        for other in &others {
            holes.extend(other.region.to_rects());
        }
        let merged_region = Region::remainder(*parent_region.outer(), holes)?;

        let partner_node = self.node(&partner_id).unwrap();
        let mut members = absorbed_peers;
        members.extend(partner_node.peers.iter().copied());
        members.sort();

        let merged_is_remainder = partner_node.is_remainder;
        let parent_node = self.node_mut(&parent_id).unwrap();
        parent_node.children.retain(|c| c.id != *zone);
        let partner_node = parent_node
            .children
            .iter_mut()
            .find(|c| c.id == partner_id)
            .expect("partner still present");
        partner_node.region = merged_region.clone();
        partner_node.peers = members.clone();
        partner_node.is_remainder = merged_is_remainder;

        Ok(MergeOutcome {
            parent: parent_id,
            absorbed: zone.clone(),
            partner: partner_id.clone(),
            merged_zone: partner_id,
            merged_region,
            members,
            collapsed: false,
        })
    }

    /// Structural validation: id consistency, region well-formedness,
    /// exact pairwise disjointness of siblings, Monte-Carlo partition
    /// coverage, and peer/coordinate bookkeeping. Violations are collected,
    /// never thrown.
    pub fn validate(&self, mc_samples: usize, seed: u64) -> ValidationReport {
        let mut report = ValidationReport::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen_peers: BTreeMap<PeerName, ZoneId> = BTreeMap::new();

        if self.root.id != ZoneId::root() {
            report
                .violations
                .push(format!("root id is {}, expected U", self.root.id));
        }
        if self.root.region != Region::universe() {
            report.violations.push("root region is not the universe".into());
        }
        self.validate_node(&self.root, mc_samples, &mut rng, &mut report, &mut seen_peers);

        for (peer, coord) in &self.coords {
            match seen_peers.get(peer) {
                None => report
                    .violations
                    .push(format!("peer {peer} in coordinate index but in no leaf")),
                Some(leaf) => {
                    let node = self.node(leaf).unwrap();
                    if !node.region.contains(*coord) {
                        report.violations.push(format!(
                            "peer {peer} at {coord} listed in leaf {leaf} whose region does not contain it"
                        ));
                    }
                }
            }
        }
        for peer in seen_peers.keys() {
            if !self.coords.contains_key(peer) {
                report
                    .violations
                    .push(format!("peer {peer} in a leaf but missing from the coordinate index"));
            }
        }
        report
    }

    fn validate_node(
        &self,
        node: &ZoneNode,
        mc_samples: usize,
        rng: &mut ChaCha8Rng,
        report: &mut ValidationReport,
        seen_peers: &mut BTreeMap<PeerName, ZoneId>,
    ) {
        let id = &node.id;
        // Region well-formedness.
        for (i, h) in node.region.holes().iter().enumerate() {
            if !node.region.outer().covers(h) {
                report
                    .violations
                    .push(format!("zone {id}: hole {h} escapes the outer rect"));
            }
            for h2 in &node.region.holes()[i + 1..] {
                if h.overlaps(h2) {
                    report
                        .violations
                        .push(format!("zone {id}: holes {h} and {h2} overlap"));
                }
            }
        }
        if node.is_leaf() {
            for peer in &node.peers {
                if let Some(prev) = seen_peers.insert(*peer, id.clone()) {
                    report
                        .violations
                        .push(format!("peer {peer} appears in leaves {prev} and {id}"));
                }
            }
            let mut sorted = node.peers.clone();
            sorted.sort();
            sorted.dedup();
            if sorted != node.peers {
                report
                    .violations
                    .push(format!("zone {id}: peer list not sorted or not unique"));
            }
            return;
        }

        if !node.peers.is_empty() {
            report
                .violations
                .push(format!("internal zone {id} holds peers directly"));
        }
        if node.children.len() < 2 {
            report
                .violations
                .push(format!("internal zone {id} has fewer than two children"));
        }
        let mut remainder_count = 0;
        let mut last_label: Option<u32> = None;
        for child in &node.children {
            let label = match child.id.label() {
                Some(l) if child.id.parent().as_ref() == Some(id) => l,
                _ => {
                    report.violations.push(format!(
                        "child {} of zone {id} has an inconsistent id path",
                        child.id
                    ));
                    continue;
                }
            };
            if let Some(prev) = last_label {
                if label <= prev {
                    report.violations.push(format!(
                        "zone {id}: child labels out of order ({prev} then {label})"
                    ));
                }
            }
            last_label = Some(label);
            if child.is_remainder {
                remainder_count += 1;
                if label != 0 {
                    report.violations.push(format!(
                        "zone {}: remainder child must carry label 0, has {label}",
                        child.id
                    ));
                }
            } else if label == 0 {
                report.violations.push(format!(
                    "zone {}: label 0 is reserved for the remainder child",
                    child.id
                ));
            }
            for r in child.region.to_rects() {
                if !node.region.covers_rect(&r) {
                    report.violations.push(format!(
                        "child {} spills outside its parent {id}",
                        child.id
                    ));
                    break;
                }
            }
        }
        if remainder_count > 1 {
            report
                .violations
                .push(format!("zone {id} has {remainder_count} remainder children"));
        }
        for (i, a) in node.children.iter().enumerate() {
            for b in &node.children[i + 1..] {
                if a.region.intersects_region(&b.region) {
                    report.violations.push(format!(
                        "zones {} and {} overlap inside parent {id}",
                        a.id, b.id
                    ));
                }
            }
        }
        // Exact area bookkeeping plus Monte-Carlo point coverage.
        let parent_area = node.region.area_deg2();
        let child_area: f64 = node.children.iter().map(|c| c.region.area_deg2()).sum();
        if (parent_area - child_area).abs() > 1e-9 * parent_area.max(1e-12) {
            report.violations.push(format!(
                "zone {id}: children areas sum to {child_area}, parent covers {parent_area}"
            ));
        }
        for _ in 0..mc_samples {
            let Some(p) = sample_region(&node.region, rng) else {
                break;
            };
            let holders: Vec<&ZoneId> = node
                .children
                .iter()
                .filter(|c| c.region.contains(p))
                .map(|c| &c.id)
                .collect();
            if holders.len() != 1 {
                report.violations.push(format!(
                    "zone {id}: sampled point {p} lands in {} children ({holders:?})",
                    holders.len()
                ));
            }
        }
        for child in &node.children {
            self.validate_node(child, mc_samples, rng, report, seen_peers);
        }
    }

    /// Canonical JSON document for golden files and `dump-tree`.
    pub fn to_canonical_json(&self) -> Value {
        json!({
            "format_version": 1,
            "root": self.root.to_json(),
            "coordinates": self
                .coords
                .iter()
                .map(|(name, coord)| (name.to_string(), coord.to_string()))
                .collect::<BTreeMap<String, String>>(),
        })
    }
}

/// Uniform sample from a region, by area-weighted choice of a decomposition
/// piece. `None` for empty regions.
pub fn sample_region(region: &Region, rng: &mut ChaCha8Rng) -> Option<GeoPoint> {
    let pieces = region.to_rects();
    let total: f64 = pieces.iter().map(|p| p.area_deg2()).sum();
    if pieces.is_empty() || total <= 0.0 {
        return None;
    }
    let mut pick = rng.gen_range(0.0..total);
    let mut chosen = &pieces[pieces.len() - 1];
    for p in &pieces {
        let a = p.area_deg2();
        if pick < a {
            chosen = p;
            break;
        }
        pick -= a;
    }
    Some(sample_rect(chosen, rng))
}

pub fn sample_rect(r: &Rect, rng: &mut ChaCha8Rng) -> GeoPoint {
    GeoPoint::new(
        rng.gen_range(r.lat_min()..r.lat_max()),
        rng.gen_range(r.lon_min()..r.lon_max()),
    )
    .expect("sample inside universe")
}

/// Tight axis-parallel bounding box of a group, expanded to half-open form:
/// the upper edges move one representable value past the extreme member so
/// the box contains all members, clamped to the enclosing rect (whose own
/// closed universe edges carry through).
fn tight_bbox(group: &[(PeerName, GeoPoint)], outer: &Rect) -> Rect {
    let mut lat_min = f64::INFINITY;
    let mut lat_max = f64::NEG_INFINITY;
    let mut lon_min = f64::INFINITY;
    let mut lon_max = f64::NEG_INFINITY;
    for (_, p) in group {
        lat_min = lat_min.min(p.lat());
        lat_max = lat_max.max(p.lat());
        lon_min = lon_min.min(p.lon());
        lon_max = lon_max.max(p.lon());
    }
    let lat_hi = if lat_max >= outer.lat_max() {
        outer.lat_max()
    } else {
        lat_max.next_up()
    };
    let lon_hi = if lon_max >= outer.lon_max() {
        outer.lon_max()
    } else {
        lon_max.next_up()
    };
    // Members sitting exactly on a closed upper edge would otherwise yield
    // an empty box.
    let lat_lo = if lat_min >= lat_hi { lat_hi.next_down() } else { lat_min };
    let lon_lo = if lon_min >= lon_hi { lon_hi.next_down() } else { lon_min };
    Rect::new(lat_lo, lat_hi, lon_lo, lon_hi).expect("member bbox inside universe")
}

/// Fallback split: recursive median cut of the full rectangle into `k`
/// slabs. Each cut is along the longer side of the piece with the most
/// members, at the weighted median of member coordinates (members exactly on
/// the median stay on the lower side).
fn median_rect_partition(
    outer: &Rect,
    pts: &[(PeerName, GeoPoint)],
    k: usize,
) -> Result<Vec<(Rect, Vec<(PeerName, GeoPoint)>)>, TreeError> {
    type Piece = (Rect, Vec<(PeerName, GeoPoint)>);
    let mut pieces: Vec<Piece> = vec![(*outer, pts.to_vec())];

    fn try_cut(piece: &Piece, lat_first: bool) -> Option<(Piece, Piece)> {
        let (rect, members) = piece;
        let axes = if lat_first { [true, false] } else { [false, true] };
        for lat_axis in axes {
            let (lo_bound, hi_bound) = if lat_axis {
                (rect.lat_min(), rect.lat_max())
            } else {
                (rect.lon_min(), rect.lon_max())
            };
            let coord = |p: &GeoPoint| if lat_axis { p.lat() } else { p.lon() };
            let mut vals: Vec<(f64, PeerName)> =
                members.iter().map(|(n, p)| (coord(p), *n)).collect();
            if vals.len() < 2 {
                continue;
            }
            vals.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let max_val = vals[vals.len() - 1].0;
            let mut m = vals[(vals.len() - 1) / 2].0;
            if m == max_val {
                let Some(prev) = vals.iter().map(|(v, _)| *v).filter(|v| *v < max_val).last()
                else {
                    continue;
                };
                m = prev;
            }
            let cut = m.next_up();
            if cut <= lo_bound || cut >= hi_bound {
                continue;
            }
            let (lower_rect, upper_rect) = if lat_axis {
                (
                    Rect::new(rect.lat_min(), cut, rect.lon_min(), rect.lon_max()).ok()?,
                    Rect::new(cut, rect.lat_max(), rect.lon_min(), rect.lon_max()).ok()?,
                )
            } else {
                (
                    Rect::new(rect.lat_min(), rect.lat_max(), rect.lon_min(), cut).ok()?,
                    Rect::new(rect.lat_min(), rect.lat_max(), cut, rect.lon_max()).ok()?,
                )
            };
            let mut lower = Vec::new();
            let mut upper = Vec::new();
            for (n, p) in members {
                if coord(p) <= m {
                    lower.push((*n, *p));
                } else {
                    upper.push((*n, *p));
                }
            }
            return Some(((lower_rect, lower), (upper_rect, upper)));
        }
        None
    }

    while pieces.len() < k {
        // Most members first; ties keep the earliest piece.
        let mut order: Vec<usize> = (0..pieces.len()).collect();
        order.sort_by_key(|&i| std::cmp::Reverse(pieces[i].1.len()));
        let mut progressed = false;
        for idx in order {
            let lat_first = {
                let r = &pieces[idx].0;
                (r.lat_max() - r.lat_min()) >= (r.lon_max() - r.lon_min())
            };
            if let Some((lower, upper)) = try_cut(&pieces[idx], lat_first) {
                pieces[idx] = lower;
                pieces.push(upper);
                progressed = true;
                break;
            }
        }
        if !progressed {
            return Err(TreeError::DegenerateCluster);
        }
    }
    Ok(pieces)
}
