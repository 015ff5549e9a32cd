//! Registration and averaging on the focal-plane grid.
//!
//! Each grid cell is projected into every frame (gather, not splat). Thermal
//! frames are sampled bilinearly, anomaly masks by nearest pixel. Samples
//! accumulate in 32.32 fixed point; sums do not depend on frame order, and
//! the streaming window adds and removes frames without drift.

use alloc::vec;
use alloc::vec::Vec;

use crate::colormap::hot_colormap;
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{nearest_pixel, sample_bilinear_scalar, CameraIntrinsics, CellProjector, FocalPlaneSpec, Pose};
use crate::math;
use crate::raster::{Mask, Raster};
use crate::rx::{rx_score, rx_score_masked, threshold_mask, AnomalyMask};

/// Fixed-point scale of accumulated samples.
pub const ACCUMULATOR_SCALE: f64 = 4_294_967_296.0;
/// Largest sample magnitude the accumulator accepts.
pub const MAX_SAMPLE_MAGNITUDE: f64 = 1_048_576.0;

const NO_SAMPLE: i64 = i64::MIN;

/// Which representation of a thermal raster the RX detector sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum RxChannels {
    /// The scalar thermal value.
    #[default]
    Thermal,
    /// Three channels through [`hot_colormap`].
    HotColormap,
}

impl RxChannels {
    pub fn prepare(self, image: &Raster<f64>) -> Result<Raster<f64>> {
        match self {
            RxChannels::Thermal => Ok(image.clone()),
            RxChannels::HotColormap => image.map_channels(hot_colormap),
        }
    }
}

/// Accumulated sum and contribution count per focal-plane cell.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    sums: Vec<i64>,
    counts: Vec<u32>,
    pub plane: FocalPlaneSpec,
    /// Display gain `C_n`.
    pub contrast: f64,
}

impl IntegralImage {
    pub fn empty(plane: FocalPlaneSpec) -> Self {
        let n = plane.cell_count();
        IntegralImage {
            sums: vec![0; n],
            counts: vec![0; n],
            plane,
            contrast: 1.0,
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Accumulated sum of a cell in sample units.
    pub fn sum(&self, i: usize) -> f64 {
        self.sums[i] as f64 / ACCUMULATOR_SCALE
    }

    /// Mean of the contributing samples, `None` for uncovered cells.
    pub fn value(&self, i: usize) -> Option<f64> {
        let c = self.counts[i];
        (c > 0).then(|| self.sums[i] as f64 / c as f64 / ACCUMULATOR_SCALE)
    }

    pub fn covered(&self) -> Vec<bool> {
        self.counts.iter().map(|&c| c > 0).collect()
    }

    /// Normalized integral with uncovered cells set to `0`.
    pub fn normalized(&self) -> Raster<f64> {
        let data = (0..self.counts.len()).map(|i| self.value(i).unwrap_or(0.0)).collect();
        Raster::from_vec(self.plane.grid_width, self.plane.grid_height, 1, data).expect("grid dimensions validated")
    }

    fn add(&mut self, warp: &ThermalWarp) {
        for ((s, c), &v) in self.sums.iter_mut().zip(&mut self.counts).zip(&warp.samples) {
            if v != NO_SAMPLE {
                *s += v;
                *c += 1;
            }
        }
    }

    fn remove(&mut self, warp: &ThermalWarp) {
        for ((s, c), &v) in self.sums.iter_mut().zip(&mut self.counts).zip(&warp.samples) {
            if v != NO_SAMPLE {
                *s -= v;
                *c -= 1;
            }
        }
    }
}

/// Integrated anomaly masks: per cell, the fraction of covering frames whose
/// mask was set at the registered pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SaaiImage {
    hits: Vec<u32>,
    counts: Vec<u32>,
    pub plane: FocalPlaneSpec,
}

impl SaaiImage {
    pub fn empty(plane: FocalPlaneSpec) -> Self {
        let n = plane.cell_count();
        SaaiImage {
            hits: vec![0; n],
            counts: vec![0; n],
            plane,
        }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Number of covering frames that flagged each cell.
    pub fn hits(&self) -> &[u32] {
        &self.hits
    }

    /// Visibility in `[0, 1]`; `0` for uncovered cells.
    pub fn value(&self, i: usize) -> f64 {
        match self.counts[i] {
            0 => 0.0,
            c => self.hits[i] as f64 / c as f64,
        }
    }

    pub fn visibility(&self) -> Raster<f64> {
        let data = (0..self.counts.len()).map(|i| self.value(i)).collect();
        Raster::from_vec(self.plane.grid_width, self.plane.grid_height, 1, data).expect("grid dimensions validated")
    }

    fn add(&mut self, warp: &MaskWarp) {
        for ((h, c), &v) in self.hits.iter_mut().zip(&mut self.counts).zip(&warp.samples) {
            if v != MaskWarp::UNCOVERED {
                *c += 1;
                *h += (v == MaskWarp::SET) as u32;
            }
        }
    }

    fn remove(&mut self, warp: &MaskWarp) {
        for ((h, c), &v) in self.hits.iter_mut().zip(&mut self.counts).zip(&warp.samples) {
            if v != MaskWarp::UNCOVERED {
                *c -= 1;
                *h -= (v == MaskWarp::SET) as u32;
            }
        }
    }
}

/// One thermal frame resampled onto the grid, in accumulator units.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalWarp {
    samples: Vec<i64>,
}

impl ThermalWarp {
    pub fn new(frame: &Frame, intrinsics: &CameraIntrinsics, plane: &FocalPlaneSpec) -> Result<Self> {
        if frame.image.channels() != 1 {
            return Err(Error::ChannelMismatch {
                expected: 1,
                got: frame.image.channels(),
            });
        }
        check_frame_shape(&frame.image, intrinsics)?;
        let projector = CellProjector::new(intrinsics, &frame.pose, plane)?;
        let (w, h) = (frame.image.width(), frame.image.height());
        let data = frame.image.data();
        let mut samples = Vec::with_capacity(plane.cell_count());
        for row in 0..plane.grid_height {
            for col in 0..plane.grid_width {
                let v = projector
                    .project(col as f64, row as f64)
                    .and_then(|px| sample_bilinear_scalar(data, w, h, px));
                samples.push(match v {
                    Some(v) => to_fixed(v)?,
                    None => NO_SAMPLE,
                });
            }
        }
        Ok(ThermalWarp { samples })
    }

    /// The resampled frame, `None` where the cell is not covered.
    pub fn values(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.samples
            .iter()
            .map(|&v| (v != NO_SAMPLE).then(|| v as f64 / ACCUMULATOR_SCALE))
    }
}

/// One binary mask resampled onto the grid by nearest pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskWarp {
    samples: Vec<u8>,
}

impl MaskWarp {
    const UNCOVERED: u8 = 0;
    const CLEAR: u8 = 1;
    const SET: u8 = 2;

    pub fn new(mask: &Mask, pose: &Pose, intrinsics: &CameraIntrinsics, plane: &FocalPlaneSpec) -> Result<Self> {
        check_frame_shape(mask, intrinsics)?;
        let projector = CellProjector::new(intrinsics, pose, plane)?;
        let (w, h) = (mask.width(), mask.height());
        let mut samples = Vec::with_capacity(plane.cell_count());
        for row in 0..plane.grid_height {
            for col in 0..plane.grid_width {
                let s = projector
                    .project(col as f64, row as f64)
                    .and_then(|px| nearest_pixel(w, h, px))
                    .map_or(
                        Self::UNCOVERED,
                        |(x, y)| {
                            if mask.get(x, y) {
                                Self::SET
                            } else {
                                Self::CLEAR
                            }
                        },
                    );
                samples.push(s);
            }
        }
        Ok(MaskWarp { samples })
    }
}

fn check_frame_shape<T>(image: &Raster<T>, intrinsics: &CameraIntrinsics) -> Result<()> {
    if image.width() != intrinsics.width || image.height() != intrinsics.height {
        return Err(Error::ShapeMismatch {
            expected_width: intrinsics.width,
            expected_height: intrinsics.height,
            width: image.width(),
            height: image.height(),
        });
    }
    Ok(())
}

#[inline]
fn to_fixed(v: f64) -> Result<i64> {
    if !(math::abs(v) <= MAX_SAMPLE_MAGNITUDE) {
        return Err(Error::ValueOutOfRange(v));
    }
    Ok(math::round(v * ACCUMULATOR_SCALE) as i64)
}

fn sorted_by_index(frames: &[Frame]) -> Vec<&Frame> {
    let mut v: Vec<&Frame> = frames.iter().collect();
    v.sort_by_key(|f| f.index);
    v
}

/// Registers and averages single-channel frames on the focal plane.
pub fn integrate(frames: &[Frame], intrinsics: &CameraIntrinsics, plane: &FocalPlaneSpec) -> Result<IntegralImage> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to integrate"));
    }
    intrinsics.validate()?;
    plane.validate()?;
    let mut out = IntegralImage::empty(*plane);
    for f in sorted_by_index(frames) {
        let warp = ThermalWarp::new(f, intrinsics, plane).map_err(|e| e.in_frame(f.index))?;
        out.add(&warp);
    }
    Ok(out)
}

/// RX on a normalized integral, statistics over covered cells only.
pub fn detect_on_integral(integral: &IntegralImage, t: f64, epsilon: f64, channels: RxChannels) -> Result<AnomalyMask> {
    let covered = integral.covered();
    let input = channels.prepare(&integral.normalized())?;
    let scores = rx_score_masked(&input, Some(&covered), epsilon)?;
    threshold_mask(&scores, t)
}

/// Baseline: integrate thermal frames, then detect anomalies in the integral.
pub fn ad_on_integral(
    frames: &[Frame],
    intrinsics: &CameraIntrinsics,
    plane: &FocalPlaneSpec,
    t: f64,
    epsilon: f64,
) -> Result<AnomalyMask> {
    ad_on_integral_with(frames, intrinsics, plane, t, epsilon, RxChannels::Thermal)
}

pub fn ad_on_integral_with(
    frames: &[Frame],
    intrinsics: &CameraIntrinsics,
    plane: &FocalPlaneSpec,
    t: f64,
    epsilon: f64,
    channels: RxChannels,
) -> Result<AnomalyMask> {
    detect_on_integral(&integrate(frames, intrinsics, plane)?, t, epsilon, channels)
}

/// Per-frame RX mask using the frame's own statistics.
pub fn frame_anomaly_mask(frame: &Frame, t: f64, epsilon: f64, channels: RxChannels) -> Result<AnomalyMask> {
    let run = || threshold_mask(&rx_score(&channels.prepare(&frame.image)?, epsilon)?, t);
    run().map_err(|e| e.in_frame(frame.index))
}

/// Synthetic aperture anomaly imaging: detect per frame, then integrate the
/// binary masks.
pub fn saai(
    frames: &[Frame],
    intrinsics: &CameraIntrinsics,
    plane: &FocalPlaneSpec,
    t: f64,
    epsilon: f64,
) -> Result<SaaiImage> {
    saai_with(frames, intrinsics, plane, t, epsilon, RxChannels::Thermal)
}

pub fn saai_with(
    frames: &[Frame],
    intrinsics: &CameraIntrinsics,
    plane: &FocalPlaneSpec,
    t: f64,
    epsilon: f64,
    channels: RxChannels,
) -> Result<SaaiImage> {
    if frames.is_empty() {
        return Err(Error::EmptyInput("no frames to integrate"));
    }
    intrinsics.validate()?;
    plane.validate()?;
    let mut out = SaaiImage::empty(*plane);
    for f in sorted_by_index(frames) {
        let mask = frame_anomaly_mask(f, t, epsilon, channels)?;
        let warp = MaskWarp::new(&mask.mask, &f.pose, intrinsics, plane).map_err(|e| e.in_frame(f.index))?;
        out.add(&warp);
    }
    Ok(out)
}

/// Integrates precomputed per-frame masks.
pub fn integrate_masks<'a>(
    masks: impl IntoIterator<Item = (&'a Mask, &'a Pose)>,
    intrinsics: &CameraIntrinsics,
    plane: &FocalPlaneSpec,
) -> Result<SaaiImage> {
    plane.validate()?;
    let mut out = SaaiImage::empty(*plane);
    for (mask, pose) in masks {
        out.add(&MaskWarp::new(mask, pose, intrinsics, plane)?);
    }
    Ok(out)
}

/// Anything with a per-cell value that can be shown through a contrast gain.
pub trait PlaneValues {
    fn plane(&self) -> &FocalPlaneSpec;
    /// `None` for cells without data.
    fn cell_value(&self, i: usize) -> Option<f64>;
}

impl PlaneValues for IntegralImage {
    fn plane(&self) -> &FocalPlaneSpec {
        &self.plane
    }
    fn cell_value(&self, i: usize) -> Option<f64> {
        self.value(i)
    }
}

impl PlaneValues for SaaiImage {
    fn plane(&self) -> &FocalPlaneSpec {
        &self.plane
    }
    fn cell_value(&self, i: usize) -> Option<f64> {
        (self.counts[i] > 0).then(|| self.value(i))
    }
}

/// `clamp(value * gain, 0, 1)`; cells without data display as `0`.
pub fn apply_contrast(values: &impl PlaneValues, gain: f64) -> Result<Raster<f64>> {
    if !(gain >= 0.0 && gain.is_finite()) {
        return Err(Error::invalid("C_n", "contrast gain must be finite and >= 0"));
    }
    let plane = values.plane();
    let data = (0..plane.cell_count())
        .map(|i| values.cell_value(i).map_or(0.0, |v| (v * gain).clamp(0.0, 1.0)))
        .collect();
    Raster::from_vec(plane.grid_width, plane.grid_height, 1, data)
}

/// Contrast for plain rasters (e.g. binary masks as 0/1).
pub fn apply_contrast_raster(values: &Raster<f64>, gain: f64) -> Result<Raster<f64>> {
    if !(gain >= 0.0 && gain.is_finite()) {
        return Err(Error::invalid("C_n", "contrast gain must be finite and >= 0"));
    }
    Ok(values.map(|&v| (v * gain).clamp(0.0, 1.0)))
}

/// Incremental accumulators used by the streaming window.
pub(crate) mod incremental {
    use super::*;

    pub fn add_thermal(acc: &mut IntegralImage, warp: &ThermalWarp) {
        acc.add(warp)
    }
    pub fn remove_thermal(acc: &mut IntegralImage, warp: &ThermalWarp) {
        acc.remove(warp)
    }
    pub fn add_mask(acc: &mut SaaiImage, warp: &MaskWarp) {
        acc.add(warp)
    }
    pub fn remove_mask(acc: &mut SaaiImage, warp: &MaskWarp) {
        acc.remove(warp)
    }
}
