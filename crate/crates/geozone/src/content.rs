//! Content-sharing layer: multicast delivery trees over unicast overlay
//! routes, and per-peer replica stores fed by reverse-path caching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{OverlayId, PeerName};

pub const DEFAULT_REPLICA_CAPACITY: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContentError {
    #[error("unknown content id {0:?}")]
    UnknownContent(String),
    #[error("content source {0} is gone")]
    NoSuchPeer(PeerName),
}

/// A shared content item: its origin peer and how many fragments it has.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentDescriptor {
    pub content_id: String,
    pub source: OverlayId,
    pub fragments: u32,
}

/// Per-peer fragment cache with least-recently-served eviction. The origin
/// copy of a content lives outside the store; only replicas compete for
/// capacity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaStore {
    capacity: usize,
    /// (content_id, fragment) -> last-served tick.
    entries: BTreeMap<(String, u32), u64>,
    tick: u64,
}

impl ReplicaStore {
    pub fn new(capacity: usize) -> Self {
        ReplicaStore {
            capacity,
            entries: BTreeMap::new(),
            tick: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn has(&self, content_id: &str, fragment: u32) -> bool {
        self.entries.contains_key(&(content_id.to_string(), fragment))
    }

    /// Marks a fragment as just served, refreshing its recency.
    pub fn touch(&mut self, content_id: &str, fragment: u32) {
        self.tick += 1;
        let tick = self.tick;
        if let Some(t) = self.entries.get_mut(&(content_id.to_string(), fragment)) {
            *t = tick;
        }
    }

    /// Stores a fragment replica, evicting the least-recently-served entry
    /// when full. A zero-capacity store never holds anything.
    pub fn insert(&mut self, content_id: &str, fragment: u32) {
        if self.capacity == 0 {
            return;
        }
        self.tick += 1;
        let key = (content_id.to_string(), fragment);
        if self.entries.contains_key(&key) {
            let tick = self.tick;
            self.entries.insert(key, tick);
            return;
        }
        if self.entries.len() >= self.capacity {
            // Oldest tick first; BTreeMap order breaks exact ties by key.
            let victim = self
                .entries
                .iter()
                .min_by_key(|(k, t)| (**t, (*k).clone()))
                .map(|(k, _)| k.clone())
                .expect("nonempty store at capacity");
            self.entries.remove(&victim);
        }
        let tick = self.tick;
        self.entries.insert(key, tick);
    }

    pub fn fragments_of(&self, content_id: &str) -> Vec<u32> {
        self.entries
            .keys()
            .filter(|(c, _)| c == content_id)
            .map(|(_, f)| *f)
            .collect()
    }
}

/// A multicast forwarding forest: the union of unicast routes from one
/// source to many receivers, merged on their shared prefixes.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryTree {
    pub source: PeerName,
    /// Unique directed edges in first-traversal order.
    pub edges: Vec<(PeerName, PeerName, u32)>,
    pub receivers_reached: Vec<PeerName>,
    /// Receivers that could not be resolved.
    pub missing: Vec<PeerName>,
}

impl DeliveryTree {
    /// Number of tree children per node.
    pub fn fanout(&self) -> BTreeMap<PeerName, u32> {
        let mut out = BTreeMap::new();
        for (from, _, _) in &self.edges {
            *out.entry(*from).or_insert(0) += 1;
        }
        out
    }

    /// Each node has at most one parent and the edge set is acyclic (levels
    /// strictly increase along overlay routes, so a simple parent check
    /// suffices).
    pub fn is_forest(&self) -> bool {
        let mut parent: BTreeMap<PeerName, PeerName> = BTreeMap::new();
        for (from, to, _) in &self.edges {
            if parent.insert(*to, *from).is_some() {
                return false;
            }
        }
        !parent.contains_key(&self.source)
    }
}
