use serde::{Deserialize, Serialize};

use super::{GeomError, GeoPoint};
use crate::scalar::GeoFloat;

/// Axis-parallel rectangle in degrees with a nonempty interior.
///
/// Membership is half-open on both axes, with the upper edge included only
/// when it coincides with the universe's upper edge (`lat_max = +90` or
/// `lon_max = +180`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect<T> {
    lat_min: T,
    lat_max: T,
    lon_min: T,
    lon_max: T,
}

impl<T: GeoFloat> Rect<T> {
    pub fn new(lat_min: T, lat_max: T, lon_min: T, lon_max: T) -> Result<Self, GeomError> {
        let ok = lat_min >= T::c(-90.0)
            && lat_max <= T::c(90.0)
            && lon_min >= T::c(-180.0)
            && lon_max <= T::c(180.0)
            && lat_min < lat_max
            && lon_min < lon_max;
        if !ok {
            return Err(GeomError::InvalidRect {
                lat_min: lat_min.to_string(),
                lat_max: lat_max.to_string(),
                lon_min: lon_min.to_string(),
                lon_max: lon_max.to_string(),
            });
        }
        Ok(Self {
            lat_min,
            lat_max,
            lon_min,
            lon_max,
        })
    }

    /// The whole coordinate space: `[-90, +90] x [-180, +180)`.
    pub fn universe() -> Self {
        Self {
            lat_min: T::c(-90.0),
            lat_max: T::c(90.0),
            lon_min: T::c(-180.0),
            lon_max: T::c(180.0),
        }
    }

    pub fn lat_min(&self) -> T {
        self.lat_min
    }

    pub fn lat_max(&self) -> T {
        self.lat_max
    }

    pub fn lon_min(&self) -> T {
        self.lon_min
    }

    pub fn lon_max(&self) -> T {
        self.lon_max
    }

    pub fn contains(&self, p: GeoPoint<T>) -> bool {
        let lat_hi_closed = self.lat_max == T::c(90.0);
        let lon_hi_closed = self.lon_max == T::c(180.0);
        let lat_ok =
            p.lat() >= self.lat_min && (p.lat() < self.lat_max || (lat_hi_closed && p.lat() == self.lat_max));
        let lon_ok =
            p.lon() >= self.lon_min && (p.lon() < self.lon_max || (lon_hi_closed && p.lon() == self.lon_max));
        lat_ok && lon_ok
    }

    /// Whether the interiors of the two rectangles overlap. Because
    /// membership is half-open, two valid rectangles share a member point
    /// exactly when their interiors overlap, so this doubles as the exact
    /// emptiness test of their intersection.
    pub fn overlaps(&self, other: &Rect<T>) -> bool {
        self.lat_min < other.lat_max
            && other.lat_min < self.lat_max
            && self.lon_min < other.lon_max
            && other.lon_min < self.lon_max
    }

    /// The intersection rectangle, when it has nonempty interior.
    pub fn intersection(&self, other: &Rect<T>) -> Option<Rect<T>> {
        if !self.overlaps(other) {
            return None;
        }
        Some(Rect {
            lat_min: self.lat_min.max(other.lat_min),
            lat_max: self.lat_max.min(other.lat_max),
            lon_min: self.lon_min.max(other.lon_min),
            lon_max: self.lon_max.min(other.lon_max),
        })
    }

    /// `self` fully contains `other` as a point set.
    pub fn covers(&self, other: &Rect<T>) -> bool {
        self.lat_min <= other.lat_min
            && other.lat_max <= self.lat_max
            && self.lon_min <= other.lon_min
            && other.lon_max <= self.lon_max
    }

    /// Set difference `self \ hole`, decomposed into at most four disjoint
    /// rectangles. Exact under the shared half-open membership rules: every
    /// point of `self` lands in exactly one output rectangle or in `hole`.
    pub fn subtract(&self, hole: &Rect<T>) -> Vec<Rect<T>> {
        let Some(ov) = self.intersection(hole) else {
            return vec![*self];
        };
        let mut out = Vec::with_capacity(4);
        if self.lat_min < ov.lat_min {
            out.push(Rect {
                lat_min: self.lat_min,
                lat_max: ov.lat_min,
                lon_min: self.lon_min,
                lon_max: self.lon_max,
            });
        }
        if ov.lat_max < self.lat_max {
            out.push(Rect {
                lat_min: ov.lat_max,
                lat_max: self.lat_max,
                lon_min: self.lon_min,
                lon_max: self.lon_max,
            });
        }
        if self.lon_min < ov.lon_min {
            out.push(Rect {
                lat_min: ov.lat_min,
                lat_max: ov.lat_max,
                lon_min: self.lon_min,
                lon_max: ov.lon_min,
            });
        }
        if ov.lon_max < self.lon_max {
            out.push(Rect {
                lat_min: ov.lat_min,
                lat_max: ov.lat_max,
                lon_min: ov.lon_max,
                lon_max: self.lon_max,
            });
        }
        out
    }

    /// Area in square degrees.
    pub fn area_deg2(&self) -> T {
        (self.lat_max - self.lat_min) * (self.lon_max - self.lon_min)
    }

    /// Center point; always a member (the interior is nonempty).
    pub fn center(&self) -> GeoPoint<T> {
        let two = T::c(2.0);
        GeoPoint::new(
            (self.lat_min + self.lat_max) / two,
            ((self.lon_min + self.lon_max) / two).min(T::c(180.0).next_down()),
        )
        .expect("rect center inside universe")
    }

    /// The point of the closed rectangle closest to `p` in coordinate space
    /// (clamping each axis independently); used for distance estimates, not
    /// membership.
    pub fn clamp(&self, p: GeoPoint<T>) -> GeoPoint<T> {
        let lat = p.lat().max(self.lat_min).min(self.lat_max);
        let lon = p
            .lon()
            .max(self.lon_min)
            .min(self.lon_max.min(T::c(180.0).next_down()));
        GeoPoint::new(lat, lon).expect("clamped point inside universe")
    }
}

impl<T: GeoFloat> std::fmt::Display for Rect<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{:.6},{:.6})x[{:.6},{:.6})",
            self.lat_min, self.lat_max, self.lon_min, self.lon_max
        )
    }
}
