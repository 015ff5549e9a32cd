//! Flat-earth conversion of drone telemetry to the local ENU frame.
//!
//! East and north are arc lengths on a sphere of radius [`EARTH_RADIUS`]
//! around the first record: `east = Δlon·cos(lat₀)·R`, `north = Δlat·R`.
//! Good to well under a meter over a few hundred meters; larger spans are
//! rejected.

use saai_core::geometry::Pose;
use saai_core::math::Vec3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const EARTH_RADIUS: f64 = 6_371_000.0;
pub const MAX_SPAN: f64 = 5_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoRecord {
    /// Degrees.
    pub latitude: f64,
    /// Degrees.
    pub longitude: f64,
    /// Meters above ground.
    pub altitude: f64,
    /// Compass heading in degrees, clockwise from north.
    #[serde(default)]
    pub heading: f64,
    /// Degrees, 0 is nadir.
    #[serde(default)]
    pub gimbal_pitch: f64,
    #[serde(default)]
    pub gimbal_roll: f64,
}

pub fn import_geodetic(records: &[GeoRecord]) -> Result<Vec<Pose>> {
    let Some(origin) = records.first() else {
        return Err(saai_core::Error::EmptyInput("no geodetic records").into());
    };
    let (lat0, lon0) = (origin.latitude.to_radians(), origin.longitude.to_radians());
    let mut poses = Vec::with_capacity(records.len());
    let mut span: f64 = 0.0;
    for (i, r) in records.iter().enumerate() {
        let finite = [
            r.latitude,
            r.longitude,
            r.altitude,
            r.heading,
            r.gimbal_pitch,
            r.gimbal_roll,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite || r.latitude.abs() > 90.0 {
            return Err(Error::Invalid(format!("geodetic record {i} has invalid fields")));
        }
        let mut dlon = r.longitude.to_radians() - lon0;
        if dlon > std::f64::consts::PI {
            dlon -= std::f64::consts::TAU;
        } else if dlon < -std::f64::consts::PI {
            dlon += std::f64::consts::TAU;
        }
        let east = dlon * lat0.cos() * EARTH_RADIUS;
        let north = (r.latitude.to_radians() - lat0) * EARTH_RADIUS;
        span = span.max(east.hypot(north));
        poses.push(Pose::new(
            Vec3::new(east, north, r.altitude),
            r.heading.to_radians(),
            r.gimbal_pitch.to_radians(),
            r.gimbal_roll.to_radians(),
        ));
    }
    if span > MAX_SPAN {
        return Err(Error::GeodeticSpan {
            span_m: span,
            limit_m: MAX_SPAN,
        });
    }
    Ok(poses)
}
