//! TOML configuration for simulated flights.
//!
//! ```toml
//! [scene]              # every SceneSpec field, all optional
//! seed = 7
//! density = 400.0      # trees per hectare
//! condition = "sunny"  # or "cloudy"
//!
//! [camera]
//! fov_deg = 50.0
//! width = 512
//! height = 512
//!
//! [flight]
//! altitude = 35.0      # meters above ground
//! spacing = 1.0        # meters between frames
//! count = 10
//! direction_deg = 0.0  # counter-clockwise from east
//! ```
//!
//! The flight is a straight nadir line centered on the target.

use std::path::Path;

use saai_core::forest::SceneSpec;
use saai_core::geometry::{CameraIntrinsics, FocalPlaneSpec, Pose};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub fov_deg: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            fov_deg: 50.0,
            width: 512,
            height: 512,
        }
    }
}

impl CameraConfig {
    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        Ok(CameraIntrinsics::new(
            self.fov_deg.to_radians(),
            self.width,
            self.height,
        )?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlightConfig {
    pub altitude: f64,
    pub spacing: f64,
    pub count: usize,
    pub direction_deg: f64,
}

impl Default for FlightConfig {
    fn default() -> Self {
        FlightConfig {
            altitude: 35.0,
            spacing: 1.0,
            count: 10,
            direction_deg: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub scene: SceneSpec,
    pub camera: CameraConfig,
    pub flight: FlightConfig,
}

impl SimulationConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
        Self::parse(&text).map_err(|message| Error::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    /// Parse errors carry the line and column of the offending value.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let cfg: SimulationConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.camera.intrinsics()?;
        let f = &self.flight;
        if f.count == 0 {
            return Err(Error::Invalid("flight.count must be at least 1".into()));
        }
        if !(f.spacing >= 0.0 && f.spacing.is_finite() && f.altitude.is_finite() && f.direction_deg.is_finite()) {
            return Err(Error::Invalid("flight values must be finite, spacing >= 0".into()));
        }
        Ok(())
    }

    pub fn path(&self) -> Vec<Pose> {
        let f = &self.flight;
        saai_core::forest::linear_path(
            self.scene.target.center,
            f.altitude,
            f.direction_deg.to_radians(),
            f.spacing,
            f.count,
        )
    }

    /// Ground plane under the target, gridded at the camera's ground sample
    /// distance.
    pub fn truth_plane(&self) -> Result<FocalPlaneSpec> {
        let a = self.flight.altitude;
        Ok(FocalPlaneSpec::matched_to_camera(
            &self.camera.intrinsics()?,
            a,
            a,
            self.scene.target.center,
        ))
    }
}
