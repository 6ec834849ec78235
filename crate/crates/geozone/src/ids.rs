//! Hierarchical zone names and peer identifiers.
//!
//! A zone is named by the path of labels from the universe root: label 0 is
//! reserved for the remainder sibling created by a split, labels `1..=k` for
//! the cluster siblings in split order. The text form joins labels with `.`
//! after a leading `U` for the root, e.g. `U.2.0`. A peer's overlay
//! identifier combines its current leaf zone with its peer name, e.g.
//! `U.2.1/p0042`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IdParseError {
    #[error("malformed zone id {0:?}")]
    Zone(String),
    #[error("malformed peer name {0:?}")]
    Peer(String),
    #[error("malformed overlay id {0:?}, expected \"zone/peer\"")]
    Overlay(String),
}

/// Hierarchical zone name: the label path from the universe root. The empty
/// path is the universe itself.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct ZoneId {
    path: Vec<u32>,
}

impl ZoneId {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn from_path(path: Vec<u32>) -> Self {
        Self { path }
    }

    pub fn path(&self) -> &[u32] {
        &self.path
    }

    pub fn depth(&self) -> usize {
        self.path.len()
    }

    pub fn is_root(&self) -> bool {
        self.path.is_empty()
    }

    /// Label of this zone among its siblings; `None` for the root.
    pub fn label(&self) -> Option<u32> {
        self.path.last().copied()
    }

    pub fn parent(&self) -> Option<ZoneId> {
        if self.path.is_empty() {
            return None;
        }
        Some(ZoneId {
            path: self.path[..self.path.len() - 1].to_vec(),
        })
    }

    pub fn child(&self, label: u32) -> ZoneId {
        let mut path = self.path.clone();
        path.push(label);
        ZoneId { path }
    }

    /// Strict-prefix test: the universe is an ancestor of every other zone.
    pub fn is_ancestor_of(&self, other: &ZoneId) -> bool {
        self.path.len() < other.path.len() && other.path[..self.path.len()] == self.path[..]
    }

    /// Ancestor-or-equal test.
    pub fn contains_zone(&self, other: &ZoneId) -> bool {
        self == other || self.is_ancestor_of(other)
    }

    /// Length of the common leading path with `other`; the depth of the
    /// lowest common zone.
    pub fn common_depth(&self, other: &ZoneId) -> usize {
        self.path
            .iter()
            .zip(other.path.iter())
            .take_while(|(a, b)| a == b)
            .count()
    }

    /// The ancestor of this zone at `depth` (a prefix of the path).
    pub fn ancestor_at(&self, depth: usize) -> ZoneId {
        ZoneId {
            path: self.path[..depth.min(self.path.len())].to_vec(),
        }
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "U")?;
        for label in &self.path {
            write!(f, ".{label}")?;
        }
        Ok(())
    }
}

impl FromStr for ZoneId {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IdParseError::Zone(s.to_string());
        let rest = s.strip_prefix('U').ok_or_else(bad)?;
        if rest.is_empty() {
            return Ok(ZoneId::root());
        }
        let rest = rest.strip_prefix('.').ok_or_else(bad)?;
        let path = rest
            .split('.')
            .map(|part| part.parse::<u32>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ZoneId { path })
    }
}

impl Serialize for ZoneId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ZoneId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// Peer name: the unique token handed out by the join counter, printed as
/// `p0042`. Ordering follows the counter, which makes "smallest peer name"
/// a total order shared by everyone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerName(pub u32);

impl fmt::Display for PeerName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{:04}", self.0)
    }
}

impl FromStr for PeerName {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IdParseError::Peer(s.to_string());
        let digits = s.strip_prefix('p').ok_or_else(bad)?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        Ok(PeerName(digits.parse().map_err(|_| bad())?))
    }
}

impl Serialize for PeerName {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PeerName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

/// A peer's position in the zoning hierarchy: its current leaf zone plus its
/// stable peer name, printed `U.2.1/p0042`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OverlayId {
    pub zone: ZoneId,
    pub peer: PeerName,
}

impl OverlayId {
    pub fn new(zone: ZoneId, peer: PeerName) -> Self {
        Self { zone, peer }
    }
}

impl fmt::Display for OverlayId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.zone, self.peer)
    }
}

impl FromStr for OverlayId {
    type Err = IdParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (zone, peer) = s
            .split_once('/')
            .ok_or_else(|| IdParseError::Overlay(s.to_string()))?;
        Ok(OverlayId {
            zone: zone.parse()?,
            peer: peer.parse()?,
        })
    }
}

impl Serialize for OverlayId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OverlayId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}
