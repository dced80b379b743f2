//! Spherical geometry and geofence classification.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius used for all distance computations, in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Fence radius applied when an activity source does not specify one.
pub const DEFAULT_RADIUS_M: f64 = 100.0;

/// Exit margin applied when an activity source does not specify one.
pub const DEFAULT_HYSTERESIS_M: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    LatOutOfRange(f64),
    #[error("longitude {0} outside (-180, 180]")]
    LonOutOfRange(f64),
    #[error("fence radius must be positive, got {0}")]
    RadiusInvalid(f64),
    #[error("hysteresis margin must be non-negative, got {0}")]
    HysteresisInvalid(f64),
}

/// A WGS84-style coordinate in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPoint", into = "RawPoint")]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPoint {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawPoint) -> Result<Self, GeoError> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl From<GeoPoint> for RawPoint {
    fn from(p: GeoPoint) -> Self {
        RawPoint { lat: p.lat, lon: p.lon }
    }
}

impl GeoPoint {
    /// Latitude must lie in `[-90, 90]` and longitude in `(-180, 180]`.
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatOutOfRange(lat));
        }
        if !(lon > -180.0 && lon <= 180.0) {
            return Err(GeoError::LonOutOfRange(lon));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

/// Great-circle distance in meters between two points (haversine formula).
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    // rounding can push h marginally past 1 for antipodal points
    2.0 * EARTH_RADIUS_M * h.clamp(0.0, 1.0).sqrt().asin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Zone {
    Inside,
    Outside,
}

/// Circular region with an exit dead band.
///
/// A point is inside once it is within `radius_m` of the center, and only
/// counts as outside again once it is at least `radius_m + hysteresis_m` away.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFence", into = "RawFence")]
pub struct Geofence {
    center: GeoPoint,
    radius_m: f64,
    hysteresis_m: f64,
}

#[derive(Serialize, Deserialize)]
struct RawFence {
    center: GeoPoint,
    hysteresis_m: f64,
    radius_m: f64,
}

impl TryFrom<RawFence> for Geofence {
    type Error = GeoError;

    fn try_from(raw: RawFence) -> Result<Self, GeoError> {
        Geofence::new(raw.center, raw.radius_m, raw.hysteresis_m)
    }
}

impl From<Geofence> for RawFence {
    fn from(f: Geofence) -> Self {
        RawFence {
            center: f.center,
            hysteresis_m: f.hysteresis_m,
            radius_m: f.radius_m,
        }
    }
}

impl Geofence {
    pub fn new(center: GeoPoint, radius_m: f64, hysteresis_m: f64) -> Result<Self, GeoError> {
        // written as negations so NaN is rejected as well
        if !(radius_m > 0.0 && radius_m.is_finite()) {
            return Err(GeoError::RadiusInvalid(radius_m));
        }
        if !(hysteresis_m >= 0.0 && hysteresis_m.is_finite()) {
            return Err(GeoError::HysteresisInvalid(hysteresis_m));
        }
        Ok(Geofence {
            center,
            radius_m,
            hysteresis_m,
        })
    }

    pub fn center(&self) -> GeoPoint {
        self.center
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn hysteresis_m(&self) -> f64 {
        self.hysteresis_m
    }

    pub fn distance_m(&self, p: GeoPoint) -> f64 {
        haversine_m(self.center, p)
    }
}

/// Classify `p` against the fence, keeping `prev` inside the dead band.
pub fn classify_zone(fence: &Geofence, prev: Zone, p: GeoPoint) -> Zone {
    classify_distance(fence, prev, fence.distance_m(p))
}

pub(crate) fn classify_distance(fence: &Geofence, prev: Zone, d: f64) -> Zone {
    if d <= fence.radius_m {
        Zone::Inside
    } else if d >= fence.radius_m + fence.hysteresis_m {
        Zone::Outside
    } else {
        prev
    }
}
