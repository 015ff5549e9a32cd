//! Rendering a frame window with visualization parameters; shared by the
//! command line and the service.

use std::path::Path;

use saai_core::geometry::{CameraIntrinsics, FocalPlaneSpec};
use saai_core::integration::{apply_contrast_raster, RxChannels};
use saai_core::raster::Raster;
use saai_core::rx::DEFAULT_EPSILON;
use saai_core::window::{detect_frame, Mode, SlidingWindow, VisualParams, WindowOutput};
use saai_core::Frame;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio;

/// Visualization parameters under their operator-facing names. Angles are
/// radians, `FP` is meters below the reference altitude, `R_x` a percentile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    #[serde(rename = "FP")]
    pub focal_distance: f64,
    #[serde(rename = "P_i")]
    pub pitch: f64,
    #[serde(rename = "R_o")]
    pub roll: f64,
    #[serde(rename = "CC")]
    pub compass_correction: f64,
    #[serde(rename = "C_n")]
    pub contrast: f64,
    #[serde(rename = "R_x")]
    pub rx_threshold: f64,
    pub mode: Mode,
    pub window_size: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub rx_channels: RxChannels,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

/// Partial update; absent fields keep their value.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamUpdate {
    #[serde(rename = "FP", default)]
    pub focal_distance: Option<f64>,
    #[serde(rename = "P_i", default)]
    pub pitch: Option<f64>,
    #[serde(rename = "R_o", default)]
    pub roll: Option<f64>,
    #[serde(rename = "CC", default)]
    pub compass_correction: Option<f64>,
    #[serde(rename = "C_n", default)]
    pub contrast: Option<f64>,
    #[serde(rename = "R_x", default)]
    pub rx_threshold: Option<f64>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub window_size: Option<usize>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub rx_channels: Option<RxChannels>,
}

/// A rejected parameter, named as on the wire.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid `{field}`: {reason}")]
pub struct ParamError {
    pub field: &'static str,
    pub reason: &'static str,
}

impl Params {
    /// Defaults for a plane: its own focal distance, no tilt, SAAI at `R_x` 90.
    pub fn for_plane(plane: &FocalPlaneSpec, window_size: usize) -> Self {
        Params {
            focal_distance: plane.fp_distance,
            pitch: plane.fp_pitch,
            roll: plane.fp_roll,
            compass_correction: plane.compass_correction,
            contrast: 1.0,
            rx_threshold: 90.0,
            mode: Mode::Saai,
            window_size,
            epsilon: DEFAULT_EPSILON,
            rx_channels: RxChannels::Thermal,
        }
    }

    pub fn apply(&self, u: &ParamUpdate) -> Params {
        Params {
            focal_distance: u.focal_distance.unwrap_or(self.focal_distance),
            pitch: u.pitch.unwrap_or(self.pitch),
            roll: u.roll.unwrap_or(self.roll),
            compass_correction: u.compass_correction.unwrap_or(self.compass_correction),
            contrast: u.contrast.unwrap_or(self.contrast),
            rx_threshold: u.rx_threshold.unwrap_or(self.rx_threshold),
            mode: u.mode.unwrap_or(self.mode),
            window_size: u.window_size.unwrap_or(self.window_size),
            epsilon: u.epsilon.unwrap_or(self.epsilon),
            rx_channels: u.rx_channels.unwrap_or(self.rx_channels),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), ParamError> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        let err = |field, reason| Err(ParamError { field, reason });
        if !self.focal_distance.is_finite() {
            return err("FP", "must be finite");
        }
        if !(self.pitch > -half_pi && self.pitch < half_pi) {
            return err("P_i", "must lie in (-pi/2, pi/2) radians");
        }
        if !(self.roll > -half_pi && self.roll < half_pi) {
            return err("R_o", "must lie in (-pi/2, pi/2) radians");
        }
        if !self.compass_correction.is_finite() {
            return err("CC", "must be finite");
        }
        if !(self.contrast >= 0.0 && self.contrast.is_finite()) {
            return err("C_n", "must be finite and >= 0");
        }
        if !(0.0..=100.0).contains(&self.rx_threshold) {
            return err("R_x", "must lie in [0, 100]");
        }
        if self.window_size == 0 {
            return err("window_size", "must be at least 1");
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return err("epsilon", "must be finite and >= 0");
        }
        Ok(())
    }

    /// Core parameters on the grid of `base`.
    pub fn visual(&self, base: &FocalPlaneSpec) -> VisualParams {
        let mut plane = *base;
        plane.fp_distance = self.focal_distance;
        plane.fp_pitch = self.pitch;
        plane.fp_roll = self.roll;
        plane.compass_correction = self.compass_correction;
        VisualParams {
            plane,
            rx_threshold: self.rx_threshold,
            contrast: self.contrast,
            epsilon: self.epsilon,
            mode: self.mode,
            rx_channels: self.rx_channels,
        }
    }
}

/// Ground plane centered under the mean camera position, gridded at the
/// nadir ground sample distance.
pub fn default_plane(frames: &[Frame], intrinsics: &CameraIntrinsics) -> Result<FocalPlaneSpec> {
    if frames.is_empty() {
        return Err(saai_core::Error::EmptyInput("no frames").into());
    }
    let n = frames.len() as f64;
    let (mut x, mut y, mut z) = (0.0, 0.0, 0.0);
    for f in frames {
        x += f.pose.position.x;
        y += f.pose.position.y;
        z += f.pose.position.z;
    }
    let alt = z / n;
    Ok(FocalPlaneSpec::matched_to_camera(intrinsics, alt, alt, [x / n, y / n]))
}

/// Raw values (no contrast gain) and the display raster of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub raw: Raster<f64>,
    pub output: WindowOutput,
}

/// Renders the last `window_size` frames.
pub fn render_window(
    frames: &[Frame],
    intrinsics: &CameraIntrinsics,
    params: &Params,
    base: &FocalPlaneSpec,
) -> Result<Rendered> {
    params.validate().map_err(|e| Error::Invalid(e.to_string()))?;
    let start = frames.len().saturating_sub(params.window_size);
    let mut visual = params.visual(base);
    visual.contrast = 1.0;
    let mut window = SlidingWindow::new(*intrinsics, params.window_size, visual)?;
    for f in &frames[start..] {
        window.push(detect_frame(f.clone(), &visual)?)?;
    }
    finish(&window, params.contrast)
}

/// Raw and display rasters of a window whose parameters carry gain 1.
pub(crate) fn finish(window: &SlidingWindow, contrast: f64) -> Result<Rendered> {
    let mut output = window.render()?;
    let raw = output.display.clone();
    output.display = apply_contrast_raster(&raw, contrast)?;
    Ok(Rendered { raw, output })
}

pub const RAW_PNG: &str = "raw.png";
pub const DISPLAY_PNG: &str = "display.png";
pub const PARAMS_JSON: &str = "params.json";

/// Parameter echo stored next to the rendered rasters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Echo {
    pub params: Params,
    pub plane: FocalPlaneSpec,
    pub frames: Vec<u64>,
}

pub fn write_outputs(dir: &Path, rendered: &Rendered, params: &Params, plane: &FocalPlaneSpec) -> Result<Echo> {
    std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    imageio::write_gray16(&dir.join(RAW_PNG), &rendered.raw)?;
    let display = imageio::colormapped(&rendered.output.display)?;
    imageio::write_rgb8(&dir.join(DISPLAY_PNG), &display)?;
    let echo = Echo {
        params: *params,
        plane: params.visual(plane).plane,
        frames: rendered.output.frames.clone(),
    };
    let path = dir.join(PARAMS_JSON);
    std::fs::write(&path, serde_json::to_string_pretty(&echo).expect("echo serializes")).map_err(Error::io(&path))?;
    Ok(echo)
}

pub fn read_outputs(dir: &Path) -> Result<(Raster<f64>, Echo)> {
    let raw = imageio::read_gray16(&dir.join(RAW_PNG))?;
    let path = dir.join(PARAMS_JSON);
    let text = std::fs::read_to_string(&path).map_err(Error::io(&path))?;
    let echo = serde_json::from_str(&text).map_err(|e| Error::Config {
        path,
        message: e.to_string(),
    })?;
    Ok((raw, echo))
}
