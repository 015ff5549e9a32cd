//! Sliding-window integration for the streaming pipeline.
//!
//! [`SlidingWindow`] keeps the latest `n` frames together with their
//! registered warps. While the visualization parameters stay the same, a new
//! frame adds its warp and the evicted frame's warp is subtracted; the fixed
//! point accumulators make that exact. A parameter change re-registers the
//! retained frames, so edits apply to the whole window at once. Either way the
//! output equals [`render_batch`] over the same frames, bit for bit.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{CameraIntrinsics, FocalPlaneSpec};
use crate::integration::{
    apply_contrast, apply_contrast_raster, detect_on_integral, incremental, integrate, saai_with, IntegralImage,
    MaskWarp, RxChannels, SaaiImage, ThermalWarp,
};
use crate::math;
use crate::raster::Raster;
use crate::rx::{rx_score, threshold_mask, AnomalyMask, RxScores, DEFAULT_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Mode {
    /// Plain integral of the thermal frames.
    ThermalIntegral,
    /// RX on the thermal integral.
    AdOnIntegral,
    /// Integral of the per-frame RX masks.
    #[default]
    Saai,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::ThermalIntegral => "thermal_integral",
            Mode::AdOnIntegral => "ad_on_integral",
            Mode::Saai => "saai",
        }
    }

    fn uses_masks(self) -> bool {
        self == Mode::Saai
    }
}

/// Everything that shapes the rendered window.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VisualParams {
    pub plane: FocalPlaneSpec,
    /// RX threshold `t`, percent.
    pub rx_threshold: f64,
    /// Display gain `C_n`.
    pub contrast: f64,
    pub epsilon: f64,
    pub mode: Mode,
    pub rx_channels: RxChannels,
}

impl VisualParams {
    pub fn new(plane: FocalPlaneSpec, mode: Mode, rx_threshold: f64) -> Self {
        VisualParams {
            plane,
            rx_threshold,
            contrast: 1.0,
            epsilon: DEFAULT_EPSILON,
            mode,
            rx_channels: RxChannels::Thermal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.plane.validate()?;
        if !(0.0..=100.0).contains(&self.rx_threshold) {
            return Err(Error::invalid("R_x", "must lie in [0, 100]"));
        }
        if !(self.contrast >= 0.0 && self.contrast.is_finite()) {
            return Err(Error::invalid("C_n", "must be finite and >= 0"));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", "must be finite and >= 0"));
        }
        Ok(())
    }

    fn detection_key(&self) -> (f64, RxChannels) {
        (self.epsilon, self.rx_channels)
    }
}

/// Per-frame RX result as produced by the detection stage.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRx {
    pub scores: RxScores,
    pub mask: AnomalyMask,
    pub epsilon: f64,
    pub channels: RxChannels,
}

/// A frame after the detection stage; `rx` is only filled in SAAI mode.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedFrame {
    pub frame: Frame,
    pub rx: Option<FrameRx>,
}

impl DetectedFrame {
    pub fn passthrough(frame: Frame) -> Self {
        DetectedFrame { frame, rx: None }
    }
}

/// Detection stage: per-frame RX when the mode needs masks.
pub fn detect_frame(frame: Frame, params: &VisualParams) -> Result<DetectedFrame> {
    if !params.mode.uses_masks() {
        return Ok(DetectedFrame::passthrough(frame));
    }
    let rx = run_rx(&frame, params).map_err(|e| e.in_frame(frame.index))?;
    Ok(DetectedFrame { frame, rx: Some(rx) })
}

fn run_rx(frame: &Frame, params: &VisualParams) -> Result<FrameRx> {
    let scores = rx_score(&params.rx_channels.prepare(&frame.image)?, params.epsilon)?;
    let mask = threshold_mask(&scores, params.rx_threshold)?;
    Ok(FrameRx {
        scores,
        mask,
        epsilon: params.epsilon,
        channels: params.rx_channels,
    })
}

/// One rendered window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutput {
    /// Display raster on the plane grid, values in `[0, 1]`.
    pub display: Raster<f64>,
    /// Indices of the integrated frames, oldest first.
    pub frames: Vec<u64>,
    pub mode: Mode,
}

struct Entry {
    frame: Frame,
    rx: Option<FrameRx>,
    thermal: Option<ThermalWarp>,
    mask: Option<MaskWarp>,
}

enum Accumulator {
    Thermal(IntegralImage),
    Saai(SaaiImage),
}

pub struct SlidingWindow {
    intrinsics: CameraIntrinsics,
    capacity: usize,
    params: VisualParams,
    entries: VecDeque<Entry>,
    acc: Accumulator,
    /// Frames whose warps were rebuilt by the last parameter change.
    rewarped: usize,
}

impl SlidingWindow {
    pub fn new(intrinsics: CameraIntrinsics, capacity: usize, params: VisualParams) -> Result<Self> {
        intrinsics.validate()?;
        params.validate()?;
        if capacity == 0 {
            return Err(Error::invalid("window_size", "must be at least 1"));
        }
        Ok(SlidingWindow {
            intrinsics,
            capacity,
            acc: Self::empty_acc(&params),
            params,
            entries: VecDeque::with_capacity(capacity + 1),
            rewarped: 0,
        })
    }

    fn empty_acc(params: &VisualParams) -> Accumulator {
        if params.mode.uses_masks() {
            Accumulator::Saai(SaaiImage::empty(params.plane))
        } else {
            Accumulator::Thermal(IntegralImage::empty(params.plane))
        }
    }

    pub fn params(&self) -> &VisualParams {
        &self.params
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of the retained frames, oldest first.
    pub fn frame_indices(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.frame.index).collect()
    }

    pub fn frames(&self) -> impl Iterator<Item = &Frame> {
        self.entries.iter().map(|e| &e.frame)
    }

    pub fn latest(&self) -> Option<&Frame> {
        self.entries.back().map(|e| &e.frame)
    }

    /// How many retained frames the last parameter change had to re-register.
    pub fn rewarped(&self) -> usize {
        self.rewarped
    }

    /// Appends a frame, evicting the oldest one when the window is full.
    pub fn push(&mut self, detected: DetectedFrame) -> Result<()> {
        let index = detected.frame.index;
        if let Some(last) = self.entries.back() {
            if index <= last.frame.index {
                return Err(Error::OutOfOrder {
                    previous: last.frame.index,
                    index,
                });
            }
        }
        let mut warps = Warps {
            rx: detected.rx,
            thermal: None,
            mask: None,
        };
        prepare(&detected.frame, &mut warps, &self.intrinsics, &self.params).map_err(|e| e.in_frame(index))?;
        let entry = Entry {
            frame: detected.frame,
            rx: warps.rx,
            thermal: warps.thermal,
            mask: warps.mask,
        };
        add(&mut self.acc, &entry);
        self.entries.push_back(entry);
        if self.entries.len() > self.capacity {
            let old = self.entries.pop_front().expect("window is not empty");
            remove(&mut self.acc, &old);
        }
        Ok(())
    }

    /// Changes the window size; shrinking drops the oldest frames.
    pub fn set_capacity(&mut self, capacity: usize) -> Result<()> {
        if capacity == 0 {
            return Err(Error::invalid("window_size", "must be at least 1"));
        }
        self.capacity = capacity;
        while self.entries.len() > capacity {
            let old = self.entries.pop_front().expect("window is not empty");
            remove(&mut self.acc, &old);
        }
        Ok(())
    }

    /// Applies new parameters to every retained frame. On error the window
    /// keeps its previous parameters.
    pub fn set_params(&mut self, params: VisualParams) -> Result<()> {
        params.validate()?;
        let old = self.params;
        if params == old {
            self.rewarped = 0;
            return Ok(());
        }
        let plane_changed = params.plane != old.plane;
        let mut staged = Vec::with_capacity(self.entries.len());
        for e in &self.entries {
            let mut warps = Warps {
                rx: e.rx.clone(),
                thermal: if plane_changed { None } else { e.thermal.clone() },
                mask: if plane_changed { None } else { e.mask.clone() },
            };
            let fresh =
                prepare(&e.frame, &mut warps, &self.intrinsics, &params).map_err(|err| err.in_frame(e.frame.index))?;
            staged.push((warps, fresh));
        }
        let mut rewarped = 0;
        for (e, (w, fresh)) in self.entries.iter_mut().zip(staged) {
            rewarped += fresh as usize;
            e.rx = w.rx;
            e.thermal = w.thermal;
            e.mask = w.mask;
        }
        self.params = params;
        self.acc = Self::empty_acc(&params);
        for e in &self.entries {
            add(&mut self.acc, e);
        }
        self.rewarped = rewarped;
        Ok(())
    }

    /// Renders the current window through the display gain.
    pub fn render(&self) -> Result<WindowOutput> {
        if self.entries.is_empty() {
            return Err(Error::EmptyInput("window holds no frames"));
        }
        let p = &self.params;
        let display = match (&self.acc, p.mode) {
            (Accumulator::Thermal(i), Mode::ThermalIntegral) => apply_contrast(i, p.contrast)?,
            (Accumulator::Thermal(i), Mode::AdOnIntegral) => {
                let m = detect_on_integral(i, p.rx_threshold, p.epsilon, p.rx_channels)?;
                mask_display(&m, p.contrast)?
            }
            (Accumulator::Saai(s), Mode::Saai) => apply_contrast(s, p.contrast)?,
            _ => unreachable!("accumulator always matches the mode"),
        };
        Ok(WindowOutput {
            display,
            frames: self.frame_indices(),
            mode: p.mode,
        })
    }
}

impl FrameRx {
    fn detection_key(&self) -> (f64, RxChannels) {
        (self.epsilon, self.channels)
    }
}

struct Warps {
    rx: Option<FrameRx>,
    thermal: Option<ThermalWarp>,
    mask: Option<MaskWarp>,
}

/// Fills in whatever the current parameters need; returns whether a warp had
/// to be (re)built.
fn prepare(frame: &Frame, w: &mut Warps, intrinsics: &CameraIntrinsics, params: &VisualParams) -> Result<bool> {
    if params.mode.uses_masks() {
        let stale =
            w.rx.as_ref()
                .is_none_or(|rx| rx.detection_key() != params.detection_key());
        if stale {
            w.rx = Some(run_rx(frame, params)?);
            w.mask = None;
        } else if let Some(rx) = w.rx.as_mut() {
            if rx.mask.threshold_t != params.rx_threshold {
                rx.mask = threshold_mask(&rx.scores, params.rx_threshold)?;
                w.mask = None;
            }
        }
        if w.mask.is_none() {
            let rx = w.rx.as_ref().expect("rx computed above");
            w.mask = Some(MaskWarp::new(&rx.mask.mask, &frame.pose, intrinsics, &params.plane)?);
            return Ok(true);
        }
    } else if w.thermal.is_none() {
        w.thermal = Some(ThermalWarp::new(frame, intrinsics, &params.plane)?);
        return Ok(true);
    }
    Ok(false)
}

fn add(acc: &mut Accumulator, e: &Entry) {
    match acc {
        Accumulator::Thermal(i) => incremental::add_thermal(i, e.thermal.as_ref().expect("thermal warp prepared")),
        Accumulator::Saai(s) => incremental::add_mask(s, e.mask.as_ref().expect("mask warp prepared")),
    }
}

fn remove(acc: &mut Accumulator, e: &Entry) {
    match acc {
        Accumulator::Thermal(i) => incremental::remove_thermal(i, e.thermal.as_ref().expect("thermal warp prepared")),
        Accumulator::Saai(s) => incremental::remove_mask(s, e.mask.as_ref().expect("mask warp prepared")),
    }
}

fn mask_display(mask: &AnomalyMask, contrast: f64) -> Result<Raster<f64>> {
    apply_contrast_raster(&mask.mask.map(|&b| if b { 1.0 } else { 0.0 }), contrast)
}

/// Batch reference: renders `frames` in one go with the same parameters.
pub fn render_batch(frames: &[Frame], intrinsics: &CameraIntrinsics, params: &VisualParams) -> Result<Raster<f64>> {
    params.validate()?;
    let p = params;
    match p.mode {
        Mode::ThermalIntegral => apply_contrast(&integrate(frames, intrinsics, &p.plane)?, p.contrast),
        Mode::AdOnIntegral => {
            let i = integrate(frames, intrinsics, &p.plane)?;
            mask_display(
                &detect_on_integral(&i, p.rx_threshold, p.epsilon, p.rx_channels)?,
                p.contrast,
            )
        }
        Mode::Saai => {
            let s = saai_with(frames, intrinsics, &p.plane, p.rx_threshold, p.epsilon, p.rx_channels)?;
            apply_contrast(&s, p.contrast)
        }
    }
}

/// Keeps frames that moved at least `sampling_distance` (horizontally) from
/// the last kept frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSelector {
    sampling_distance: f64,
    last_kept: Option<[f64; 2]>,
    last_index: Option<u64>,
}

impl FrameSelector {
    pub fn new(sampling_distance: f64) -> Result<Self> {
        if !(sampling_distance >= 0.0 && sampling_distance.is_finite()) {
            return Err(Error::invalid("sampling_distance", "must be finite and >= 0"));
        }
        Ok(FrameSelector {
            sampling_distance,
            last_kept: None,
            last_index: None,
        })
    }

    pub fn sampling_distance(&self) -> f64 {
        self.sampling_distance
    }

    /// Whether `frame` is selected. Indices must be strictly increasing.
    pub fn offer(&mut self, frame: &Frame) -> Result<bool> {
        if let Some(prev) = self.last_index {
            if frame.index <= prev {
                return Err(Error::OutOfOrder {
                    previous: prev,
                    index: frame.index,
                });
            }
        }
        self.last_index = Some(frame.index);
        let here = [frame.pose.position.x, frame.pose.position.y];
        let keep = match self.last_kept {
            None => true,
            Some(p) => {
                let (dx, dy) = (here[0] - p[0], here[1] - p[1]);
                math::sqrt(dx * dx + dy * dy) >= self.sampling_distance
            }
        };
        if keep {
            self.last_kept = Some(here);
        }
        Ok(keep)
    }
}

pub fn select_frames(frames: impl IntoIterator<Item = Frame>, sampling_distance: f64) -> Result<Vec<Frame>> {
    let mut sel = FrameSelector::new(sampling_distance)?;
    let mut out = Vec::new();
    for f in frames {
        if sel.offer(&f)? {
            out.push(f);
        }
    }
    Ok(out)
}
