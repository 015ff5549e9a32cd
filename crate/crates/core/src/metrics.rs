//! Target visibility and precision against simulator ground truth, and the
//! density × condition sweep built on them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forest::{generate_scene, linear_path, render_ground_truth, trace_view, Condition, GroundTruth, SceneSpec};
use crate::frame::Frame;
use crate::geometry::{CameraIntrinsics, FocalPlaneSpec};
use crate::integration::{ad_on_integral_with, saai_with, RxChannels, SaaiImage};
use crate::math;
use crate::raster::{Mask, Raster};
use crate::rx::{AnomalyMask, DEFAULT_EPSILON};

/// A detection result on the focal-plane grid.
#[derive(Debug, Clone, Copy)]
pub enum Detection<'a> {
    /// Binary detections, each set cell counting with intensity 1.
    Mask(&'a Mask),
    /// Visibility values; a cell is detected when its value is above zero.
    Saai(&'a SaaiImage),
    /// Plain per-cell intensities, e.g. a result read back from disk.
    Values(&'a Raster<f64>),
}

impl<'a> From<&'a Mask> for Detection<'a> {
    fn from(m: &'a Mask) -> Self {
        Detection::Mask(m)
    }
}

impl<'a> From<&'a AnomalyMask> for Detection<'a> {
    fn from(m: &'a AnomalyMask) -> Self {
        Detection::Mask(&m.mask)
    }
}

impl<'a> From<&'a Raster<f64>> for Detection<'a> {
    fn from(r: &'a Raster<f64>) -> Self {
        Detection::Values(r)
    }
}

impl<'a> From<&'a SaaiImage> for Detection<'a> {
    fn from(s: &'a SaaiImage) -> Self {
        Detection::Saai(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalResult {
    pub target_visibility: f64,
    pub precision: f64,
    pub tp_intensity: f64,
    pub fp_intensity: f64,
    pub tp_cells: usize,
    pub fp_cells: usize,
    pub footprint_area: usize,
    /// Nothing was detected; precision is reported as 0.
    pub no_detection: bool,
}

pub fn evaluate<'a>(result: impl Into<Detection<'a>>, truth: &GroundTruth) -> Result<EvalResult> {
    evaluate_with_cut(result, truth, 0.0)
}

/// Like [`evaluate`], but SAAI cells below `min_visibility` are ignored.
pub fn evaluate_with_cut<'a>(
    result: impl Into<Detection<'a>>,
    truth: &GroundTruth,
    min_visibility: f64,
) -> Result<EvalResult> {
    if !(0.0..=1.0).contains(&min_visibility) {
        return Err(Error::invalid("min_visibility", "must lie in [0, 1]"));
    }
    let footprint = &truth.footprint_mask;
    let (w, h) = (footprint.width(), footprint.height());
    let det = result.into();
    match det {
        Detection::Mask(m) if m.width() != w || m.height() != h => {
            return Err(shape_error(w, h, m.width(), m.height()));
        }
        Detection::Saai(s) if !s.plane.same_grid(&truth.plane) => {
            return Err(shape_error(w, h, s.plane.grid_width, s.plane.grid_height));
        }
        Detection::Values(r) if r.width() != w || r.height() != h || r.channels() != 1 => {
            return Err(shape_error(w, h, r.width(), r.height()));
        }
        _ => {}
    }
    let value = |i: usize| match det {
        Detection::Mask(m) => {
            if m.data()[i] {
                1.0
            } else {
                0.0
            }
        }
        Detection::Saai(_) | Detection::Values(_) => {
            let v = match det {
                Detection::Saai(s) => s.value(i),
                Detection::Values(r) => r.data()[i],
                Detection::Mask(_) => unreachable!(),
            };
            if v >= min_visibility {
                v
            } else {
                0.0
            }
        }
    };
    let mut r = EvalResult {
        target_visibility: 0.0,
        precision: 0.0,
        tp_intensity: 0.0,
        fp_intensity: 0.0,
        tp_cells: 0,
        fp_cells: 0,
        footprint_area: truth.footprint_area,
        no_detection: false,
    };
    for (i, &on_target) in footprint.data().iter().enumerate() {
        let v = value(i);
        if v <= 0.0 {
            continue;
        }
        if on_target {
            r.tp_cells += 1;
            r.tp_intensity += v;
        } else {
            r.fp_cells += 1;
            r.fp_intensity += v;
        }
    }
    r.target_visibility = r.tp_cells as f64 / truth.footprint_area as f64;
    let total = r.tp_intensity + r.fp_intensity;
    if total > 0.0 {
        r.precision = r.tp_intensity / total;
    } else {
        r.no_detection = true;
    }
    Ok(r)
}

fn shape_error(expected_width: u32, expected_height: u32, width: u32, height: u32) -> Error {
    Error::ShapeMismatch {
        expected_width,
        expected_height,
        width,
        height,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    AdOnIntegral,
    Saai,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::AdOnIntegral => "ad_on_integral",
            Method::Saai => "saai",
        }
    }
}

/// Flight and detector settings shared by every cell of a sweep.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SweepProtocol {
    pub densities: Vec<f64>,
    pub conditions: Vec<Condition>,
    pub seeds: Vec<u64>,
    /// Scene template; seed, density and condition are overridden per run.
    pub scene: SceneSpec,
    pub intrinsics: CameraIntrinsics,
    pub altitude: f64,
    /// Frame spacing along the path, meters.
    pub sampling_distance: f64,
    pub frame_count: usize,
    /// Flight direction, radians counter-clockwise from east.
    pub direction: f64,
    pub t_ad: f64,
    pub t_saai: f64,
    pub epsilon: f64,
    pub rx_channels: RxChannels,
}

impl Default for SweepProtocol {
    fn default() -> Self {
        SweepProtocol {
            densities: alloc::vec![300.0, 400.0, 500.0],
            conditions: alloc::vec![Condition::Cloudy, Condition::Sunny],
            seeds: (0..10).collect(),
            scene: SceneSpec::default(),
            intrinsics: CameraIntrinsics::new(50f64.to_radians(), 512, 512).expect("valid intrinsics"),
            altitude: 35.0,
            sampling_distance: 1.0,
            frame_count: 10,
            direction: 0.0,
            t_ad: 99.0,
            t_saai: 90.0,
            epsilon: DEFAULT_EPSILON,
            rx_channels: RxChannels::Thermal,
        }
    }
}

impl SweepProtocol {
    /// Synthetic aperture size `sampling_distance * frame_count`.
    pub fn aperture(&self) -> f64 {
        self.sampling_distance * self.frame_count as f64
    }

    /// Ground-level plane matched to the camera, centered on the target.
    pub fn plane(&self) -> FocalPlaneSpec {
        FocalPlaneSpec::matched_to_camera(&self.intrinsics, self.altitude, self.altitude, self.scene.target.center)
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if self.frame_count == 0 {
            return Err(Error::invalid("frame_count", "must be at least 1"));
        }
        if !(self.sampling_distance >= 0.0 && self.altitude > 0.0) {
            return Err(Error::invalid("altitude", "altitude must be positive, spacing >= 0"));
        }
        for t in [self.t_ad, self.t_saai] {
            if !(0.0..=100.0).contains(&t) {
                return Err(Error::invalid("t", "threshold must lie in [0, 100]"));
            }
        }
        if self.densities.is_empty() || self.conditions.is_empty() || self.seeds.is_empty() {
            return Err(Error::EmptyInput("sweep has an empty axis"));
        }
        self.scene.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepRow {
    pub method: Method,
    pub density: f64,
    pub condition: Condition,
    pub seed: u64,
    pub eval: EvalResult,
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Spread {
    pub mean: f64,
    pub std: f64,
}

impl Spread {
    pub fn of(values: &[f64]) -> Spread {
        if values.is_empty() {
            return Spread::default();
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Spread {
            mean,
            std: math::sqrt(var),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellSummary {
    pub method: Method,
    pub density: f64,
    pub condition: Condition,
    pub runs: usize,
    pub visibility: Spread,
    pub precision: Spread,
    pub fp_intensity: Spread,
}

/// Groups rows by (method, density, condition), in first-seen order.
pub fn summarize(rows: &[SweepRow]) -> Vec<CellSummary> {
    let mut keys: Vec<(Method, f64, Condition)> = Vec::new();
    for r in rows {
        let k = (r.method, r.density, r.condition);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, density, condition)| {
            let cell: Vec<&EvalResult> = rows
                .iter()
                .filter(|r| r.method == method && r.density == density && r.condition == condition)
                .map(|r| &r.eval)
                .collect();
            let col = |f: fn(&EvalResult) -> f64| Spread::of(&cell.iter().map(|e| f(e)).collect::<Vec<_>>());
            CellSummary {
                method,
                density,
                condition,
                runs: cell.len(),
                visibility: col(|e| e.target_visibility),
                precision: col(|e| e.precision),
                fp_intensity: col(|e| e.fp_intensity),
            }
        })
        .collect()
}

/// Runs both methods on one (density, seed) forest under every condition of
/// the protocol. The geometry is traced once and shaded per condition.
pub fn run_forest(protocol: &SweepProtocol, density: f64, seed: u64) -> Result<Vec<SweepRow>> {
    let spec = SceneSpec {
        seed,
        density,
        ..protocol.scene.clone()
    };
    let mut scene = generate_scene(&spec)?;
    let plane = protocol.plane();
    let truth = render_ground_truth(&scene, &plane)?;
    let path = linear_path(
        scene.target.center,
        protocol.altitude,
        protocol.direction,
        protocol.sampling_distance,
        protocol.frame_count,
    );
    let views = path
        .iter()
        .map(|p| trace_view(&scene, &protocol.intrinsics, p))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::with_capacity(2 * protocol.conditions.len());
    for &condition in &protocol.conditions {
        scene.condition = condition;
        let frames: Vec<Frame> = views
            .iter()
            .enumerate()
            .map(|(i, v)| v.shade(&scene, i as u64))
            .collect();
        let row = |method, eval| SweepRow {
            method,
            density,
            condition,
            seed,
            eval,
        };
        let ad = ad_on_integral_with(
            &frames,
            &protocol.intrinsics,
            &plane,
            protocol.t_ad,
            protocol.epsilon,
            protocol.rx_channels,
        )?;
        rows.push(row(Method::AdOnIntegral, evaluate(&ad, &truth)?));
        let s = saai_with(
            &frames,
            &protocol.intrinsics,
            &plane,
            protocol.t_saai,
            protocol.epsilon,
            protocol.rx_channels,
        )?;
        rows.push(row(Method::Saai, evaluate(&s, &truth)?));
    }
    Ok(rows)
}

/// Full density × condition × seed sweep. `on_row` sees every row as soon as
/// it is computed.
pub fn compare_conditions(protocol: &SweepProtocol, mut on_row: impl FnMut(&SweepRow)) -> Result<Vec<SweepRow>> {
    protocol.validate()?;
    let mut rows = Vec::new();
    for &density in &protocol.densities {
        for &seed in &protocol.seeds {
            for r in run_forest(protocol, density, seed)? {
                on_row(&r);
                rows.push(r);
            }
        }
    }
    Ok(rows)
}
