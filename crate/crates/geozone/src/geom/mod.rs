//! Geometric primitives: geographic points, axis-parallel rectangles, and
//! rectangle-difference regions, plus great-circle distance.
//!
//! The universe is the single rectangle `[-90, +90] x [-180, +180)`; there is
//! no longitude wraparound and zones never span the antimeridian. Rectangle
//! membership is half-open (`min <= x < max`) except that a rectangle whose
//! upper edge coincides with the universe's upper edge also includes that
//! closed edge, so that sibling rectangles sharing an edge stay disjoint
//! while the universe still covers every valid point.

mod rect;
mod region;

pub use rect::Rect;
pub use region::Region;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::GeoFloat;

/// Degrees of latitude spanned by one kilometer of meridian arc, inverted:
/// `pi * R / 180` with `R = 6371.0`.
pub const KM_PER_DEGREE: f64 = 6371.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeomError {
    #[error("coordinate out of range: lat {lat}, lon {lon} (expected lat in [-90, 90], lon in [-180, 180))")]
    InvalidCoordinate { lat: String, lon: String },
    #[error("invalid rectangle: [{lat_min}, {lat_max}) x [{lon_min}, {lon_max}) (bounds must be inside the universe with min < max)")]
    InvalidRect {
        lat_min: String,
        lat_max: String,
        lon_min: String,
        lon_max: String,
    },
    #[error("invalid region: {0}")]
    InvalidRegion(String),
    #[error("radius must be positive, got {0}")]
    InvalidRadius(String),
    #[error("malformed point text {0:?}, expected \"lat,lon\"")]
    MalformedPoint(String),
}

/// A geographic coordinate in degrees. Latitude in `[-90, +90]`, longitude
/// in `[-180, +180)`; construction outside these bounds is rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint<T> {
    lat: T,
    lon: T,
}

impl<T: GeoFloat> GeoPoint<T> {
    pub fn new(lat: T, lon: T) -> Result<Self, GeomError> {
        let lat_ok = lat >= T::c(-90.0) && lat <= T::c(90.0);
        let lon_ok = lon >= T::c(-180.0) && lon < T::c(180.0);
        if !lat_ok || !lon_ok || lat.is_nan() || lon.is_nan() {
            return Err(GeomError::InvalidCoordinate {
                lat: lat.to_string(),
                lon: lon.to_string(),
            });
        }
        Ok(Self { lat, lon })
    }

    pub fn lat(&self) -> T {
        self.lat
    }

    pub fn lon(&self) -> T {
        self.lon
    }
}

impl<T: GeoFloat> std::fmt::Display for GeoPoint<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.6},{:.6}", self.lat, self.lon)
    }
}

impl<T: GeoFloat> std::str::FromStr for GeoPoint<T> {
    type Err = GeomError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || GeomError::MalformedPoint(s.to_string());
        let (lat, lon) = s.split_once(',').ok_or_else(bad)?;
        let lat: f64 = lat.trim().parse().map_err(|_| bad())?;
        let lon: f64 = lon.trim().parse().map_err(|_| bad())?;
        GeoPoint::new(T::c(lat), T::c(lon))
    }
}

/// Great-circle (haversine) distance in kilometers, Earth radius 6371.0 km.
/// Symmetric, and zero exactly for identical coordinates.
pub fn distance_km<T: GeoFloat>(a: GeoPoint<T>, b: GeoPoint<T>) -> T {
    let two = T::c(2.0);
    let lat1 = a.lat.to_radians();
    let lat2 = b.lat.to_radians();
    let dlat = (b.lat - a.lat).to_radians();
    let dlon = (b.lon - a.lon).to_radians();
    let h = (dlat / two).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / two).sin().powi(2);
    let c = two * h.sqrt().atan2((T::one() - h).sqrt());
    T::earth_radius_km() * c
}

/// Latitude/longitude rectangle guaranteed to contain the great-circle disk
/// of `radius_km` around `center`.
///
/// The latitude span is the central angle of the disk; the longitude span is
/// widened by the cosine of the most extreme latitude the disk can reach, so
/// the box never excludes a point of the disk. If the disk touches a pole
/// the longitude span degenerates to the full `[-180, +180)` range, and a
/// radius covering half the circumference yields the whole universe.
pub fn circle_bbox<T: GeoFloat>(center: GeoPoint<T>, radius_km: T) -> Result<Rect<T>, GeomError> {
    if !(radius_km > T::zero()) {
        return Err(GeomError::InvalidRadius(radius_km.to_string()));
    }
    let sigma = radius_km / T::earth_radius_km(); // central angle, radians
    if sigma >= T::c(std::f64::consts::PI) {
        return Ok(Rect::universe());
    }
    let sigma_deg = sigma.to_degrees();
    let lat_lo = (center.lat - sigma_deg).max(T::c(-90.0));
    let lat_hi = (center.lat + sigma_deg).min(T::c(90.0));

    let crosses_pole = center.lat.abs() + sigma_deg >= T::c(90.0);
    if crosses_pole {
        return Rect::new(lat_lo, lat_hi, T::c(-180.0), T::c(180.0));
    }

    // sin(dlon/2) <= sin(sigma/2) / sqrt(cos(lat_c) * cos(lat_p)) and every
    // disk point satisfies |lat_p| <= max(|lat_lo|, |lat_hi|).
    let worst = lat_lo.abs().max(lat_hi.abs()).to_radians();
    let s = (sigma / T::c(2.0)).sin() / worst.cos();
    if s >= T::one() {
        return Rect::new(lat_lo, lat_hi, T::c(-180.0), T::c(180.0));
    }
    let dlon = (T::c(2.0) * s.asin()).to_degrees();
    let lon_lo = center.lon - dlon;
    let lon_hi = center.lon + dlon;
    if lon_lo < T::c(-180.0) || lon_hi > T::c(180.0) {
        // A box that would spill over the antimeridian cannot be clamped
        // without losing disk points, so it widens to the full range.
        return Rect::new(lat_lo, lat_hi, T::c(-180.0), T::c(180.0));
    }
    Rect::new(lat_lo, lat_hi, lon_lo, lon_hi)
}
