use serde::{Deserialize, Serialize};

use super::{distance_km, GeomError, GeoPoint, Rect};
use crate::scalar::GeoFloat;

/// A zone's geometry: either a plain rectangle or a rectangle with
/// rectangular holes punched out (the shape a remainder-leaf-zone or a
/// merged zone takes).
///
/// A point belongs to a `Remainder` when it belongs to the outer rectangle
/// and to none of the holes; holes are contained in the outer rectangle and
/// pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region<T> {
    Whole { outer: Rect<T> },
    Remainder { outer: Rect<T>, holes: Vec<Rect<T>> },
}

impl<T: GeoFloat> Region<T> {
    pub fn whole(outer: Rect<T>) -> Self {
        Region::Whole { outer }
    }

    pub fn universe() -> Self {
        Region::Whole {
            outer: Rect::universe(),
        }
    }

    /// Builds a remainder region, collapsing to `Whole` when there are no
    /// holes. Holes must lie inside `outer` and be pairwise disjoint.
    pub fn remainder(outer: Rect<T>, holes: Vec<Rect<T>>) -> Result<Self, GeomError> {
        for h in &holes {
            if !outer.covers(h) {
                return Err(GeomError::InvalidRegion(format!(
                    "hole {h} not contained in outer {outer}"
                )));
            }
        }
        for (i, a) in holes.iter().enumerate() {
            for b in &holes[i + 1..] {
                if a.overlaps(b) {
                    return Err(GeomError::InvalidRegion(format!(
                        "holes {a} and {b} overlap"
                    )));
                }
            }
        }
        if holes.is_empty() {
            Ok(Region::Whole { outer })
        } else {
            Ok(Region::Remainder { outer, holes })
        }
    }

    pub fn outer(&self) -> &Rect<T> {
        match self {
            Region::Whole { outer } | Region::Remainder { outer, .. } => outer,
        }
    }

    pub fn holes(&self) -> &[Rect<T>] {
        match self {
            Region::Whole { .. } => &[],
            Region::Remainder { holes, .. } => holes,
        }
    }

    pub fn contains(&self, p: GeoPoint<T>) -> bool {
        self.outer().contains(p) && !self.holes().iter().any(|h| h.contains(p))
    }

    /// Disjoint rectangle decomposition of the region.
    pub fn to_rects(&self) -> Vec<Rect<T>> {
        let mut pieces = vec![*self.outer()];
        for hole in self.holes() {
            pieces = pieces.iter().flat_map(|p| p.subtract(hole)).collect();
        }
        pieces
    }

    /// Disjoint rectangle decomposition of the intersection of `self` and
    /// `r`; empty exactly when the intersection has no member points.
    pub fn intersection_pieces(&self, r: &Rect<T>) -> Vec<Rect<T>> {
        let Some(base) = self.outer().intersection(r) else {
            return Vec::new();
        };
        let mut pieces = vec![base];
        for hole in self.holes() {
            pieces = pieces.iter().flat_map(|p| p.subtract(hole)).collect();
        }
        pieces
    }

    /// Exact emptiness test of the intersection of `self` and `r`.
    pub fn intersects_rect(&self, r: &Rect<T>) -> bool {
        !self.intersection_pieces(r).is_empty()
    }

    /// Exact emptiness test of the intersection of two regions.
    pub fn intersects_region(&self, other: &Region<T>) -> bool {
        other.to_rects().iter().any(|r| self.intersects_rect(r))
    }

    /// `self` covers every member point of `r`.
    pub fn covers_rect(&self, r: &Rect<T>) -> bool {
        self.outer().covers(r) && !self.holes().iter().any(|h| h.overlaps(r))
    }

    /// Area in square degrees.
    pub fn area_deg2(&self) -> T {
        self.to_rects()
            .iter()
            .map(|r| r.area_deg2())
            .fold(T::zero(), |a, b| a + b)
    }

    /// Great-circle distance from `p` to the closest point of the region's
    /// closed decomposition, in kilometers; zero when `p` is a member.
    pub fn distance_km(&self, p: GeoPoint<T>) -> T {
        if self.contains(p) {
            return T::zero();
        }
        self.to_rects()
            .iter()
            .map(|r| distance_km(p, r.clamp(p)))
            .fold(T::infinity(), |a, b| a.min(b))
    }
}

impl<T: GeoFloat> std::fmt::Display for Region<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Region::Whole { outer } => write!(f, "{outer}"),
            Region::Remainder { outer, holes } => {
                write!(f, "{outer} minus {} hole(s)", holes.len())
            }
        }
    }
}
