//! Floating point scalar abstraction for the geometric core.
//!
//! All geometry (points, rectangles, regions, great-circle math) is generic
//! over [`GeoFloat`] so it can run at `f32` or `f64`. The rest of the crate
//! pins `f64` through the aliases at the crate root; `f32` stays available
//! for memory-tight embeddings of the geometric primitives.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Scalar type usable for geographic coordinates: `f32` or `f64`.
pub trait GeoFloat: Float + FromPrimitive + Display + Debug + Default + 'static {
    /// Lossless embedding of an `f64` constant into the scalar type.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("float constant conversion")
    }

    /// Mean Earth radius in kilometers.
    fn earth_radius_km() -> Self {
        Self::c(6371.0)
    }

    /// Least representable value strictly greater than `self`.
    fn next_up(self) -> Self;

    /// Greatest representable value strictly less than `self`.
    fn next_down(self) -> Self;
}

impl GeoFloat for f32 {
    fn next_up(self) -> Self {
        f32::next_up(self)
    }

    fn next_down(self) -> Self {
        f32::next_down(self)
    }
}

impl GeoFloat for f64 {
    fn next_up(self) -> Self {
        f64::next_up(self)
    }

    fn next_down(self) -> Self {
        f64::next_down(self)
    }
}
