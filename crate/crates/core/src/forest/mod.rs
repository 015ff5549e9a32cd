//! Seeded procedural forest with a hidden thermal target.
//!
//! Trees are an ellipsoid crown on a cylindrical trunk. Crowns are opaque
//! voxel volumes perforated by gaps, so how much of the ground a ray reaches
//! depends on where it comes from. Thermal values are normalized to `[0, 1]`.
//!
//! Every tree draws its parameters from its own ChaCha8 stream
//! (`seed`, stream `i + 1`), so a denser forest with the same seed contains
//! the sparser one as a prefix. Rendering is a pure function of the scene and
//! the camera.

mod noise;
mod render;

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{CameraIntrinsics, FocalPlaneSpec, Pose};
use crate::math::{self, Vec3};
use crate::raster::{Mask, Raster};

pub use render::{render_frame, render_frame_indexed, trace_view, View};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Condition {
    Cloudy,
    Sunny,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Cloudy => "cloudy",
            Condition::Sunny => "sunny",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Posture {
    Lying,
    Sitting,
}

impl Posture {
    /// Footprint (length, width) in meters.
    pub fn default_footprint(self) -> [f64; 2] {
        match self {
            Posture::Lying => [1.8, 0.5],
            Posture::Sitting => [0.5, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TargetSpec {
    pub posture: Posture,
    /// Ground position (east, north).
    pub center: [f64; 2],
    /// Direction of the long axis, radians counter-clockwise from east.
    pub heading: f64,
    /// Length along the heading, width across it.
    pub footprint: [f64; 2],
    pub emission: f64,
}

impl Default for TargetSpec {
    fn default() -> Self {
        TargetSpec::new(Posture::Lying, [0.0, 0.0])
    }
}

impl TargetSpec {
    pub fn new(posture: Posture, center: [f64; 2]) -> Self {
        TargetSpec {
            posture,
            center,
            heading: 0.0,
            footprint: posture.default_footprint(),
            emission: 1.0,
        }
    }

    /// Whether a ground point lies on the footprint (edges included).
    #[inline]
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = (math::sin(self.heading), math::cos(self.heading));
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let along = c * dx + s * dy;
        let across = -s * dx + c * dy;
        math::abs(along) <= self.footprint[0] / 2.0 && math::abs(across) <= self.footprint[1] / 2.0
    }

    pub fn corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = (math::sin(self.heading), math::cos(self.heading));
        let (hl, hw) = (self.footprint[0] / 2.0, self.footprint[1] / 2.0);
        let at = |a: f64, b: f64| [self.center[0] + c * a - s * b, self.center[1] + s * a + c * b];
        [at(-hl, -hw), at(hl, -hw), at(hl, hw), at(-hl, hw)]
    }
}

/// Normalized thermal levels of the scene materials.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ThermalModel {
    pub crown_base: f64,
    /// Peak of sunlit crown patches.
    pub crown_hot_max: f64,
    /// Lattice spacing of the crown patch noise, meters.
    pub crown_patch_scale: f64,
    /// Noise level in `[0, 1)` above which crowns start to heat up.
    pub crown_patch_onset: f64,
    pub trunk: f64,
    pub ground_base: f64,
    /// Half-amplitude of the world-fixed ground noise. The default stays
    /// below half an 8-bit step, so quantized ground is flat.
    pub ground_noise: f64,
    /// Peak of sunlit open-ground patches.
    pub ground_hot_max: f64,
    pub ground_patch_scale: f64,
    pub ground_patch_onset: f64,
    /// Value of rays that miss the ground (sky).
    pub sky: f64,
    /// Output quantization levels (`255` mimics an 8-bit sensor, `0` disables).
    pub quantization_levels: u32,
}

impl Default for ThermalModel {
    fn default() -> Self {
        ThermalModel {
            crown_base: 0.25,
            crown_hot_max: 0.9,
            crown_patch_scale: 1.5,
            crown_patch_onset: 0.85,
            trunk: 0.22,
            ground_base: 0.2,
            ground_noise: 0.001,
            ground_hot_max: 0.85,
            ground_patch_scale: 4.0,
            ground_patch_onset: 0.97,
            sky: 0.0,
            quantization_levels: 255,
        }
    }
}

/// Crown perforation: voxel edge = `gap_cell_per_leaf * leaf_size`, and the
/// voxel occupancy grows linearly with leaf size across the leaf-size range.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FoliageModel {
    pub gap_cell_per_leaf: f64,
    pub occupancy_range: [f64; 2],
}

impl Default for FoliageModel {
    fn default() -> Self {
        FoliageModel {
            gap_cell_per_leaf: 4.0,
            occupancy_range: [0.05, 0.09],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SceneSpec {
    pub seed: u64,
    /// Extent (east, north) in meters, centered on the origin.
    pub area: [f64; 2],
    /// Trees per hectare.
    pub density: f64,
    pub condition: Condition,
    pub tree_height_range: [f64; 2],
    pub trunk_length_range: [f64; 2],
    pub trunk_radius_range: [f64; 2],
    pub leaf_size_range: [f64; 2],
    pub crown_radius_range: [f64; 2],
    /// Tree variety: `1` samples the full ranges, `0` makes every tree the
    /// range midpoint.
    pub variety: f64,
    /// Rays per pixel along each axis; pixel values average them.
    pub supersampling: u32,
    pub foliage: FoliageModel,
    pub thermal: ThermalModel,
    pub target: TargetSpec,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            area: [100.0, 100.0],
            density: 400.0,
            condition: Condition::Cloudy,
            tree_height_range: [20.0, 25.0],
            trunk_length_range: [4.0, 8.0],
            trunk_radius_range: [0.20, 0.50],
            leaf_size_range: [0.05, 0.20],
            crown_radius_range: [2.0, 3.5],
            variety: 1.0,
            supersampling: 1,
            foliage: FoliageModel::default(),
            thermal: ThermalModel::default(),
            target: TargetSpec::default(),
        }
    }
}

fn check_range(name: &'static str, r: [f64; 2], positive: bool) -> Result<()> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] <= r[1]) {
        return Err(Error::invalid(name, "range must be finite with min <= max"));
    }
    if positive && !(r[0] > 0.0) {
        return Err(Error::invalid(name, "range must be positive"));
    }
    Ok(())
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.density >= 0.0 && self.density.is_finite()) {
            return Err(Error::invalid("density", "must be finite and >= 0"));
        }
        if !(self.area[0] > 0.0 && self.area[1] > 0.0) {
            return Err(Error::invalid("area", "must be positive"));
        }
        check_range("tree_height_range", self.tree_height_range, true)?;
        check_range("trunk_length_range", self.trunk_length_range, true)?;
        check_range("trunk_radius_range", self.trunk_radius_range, true)?;
        check_range("leaf_size_range", self.leaf_size_range, true)?;
        check_range("crown_radius_range", self.crown_radius_range, true)?;
        check_range("foliage.occupancy_range", self.foliage.occupancy_range, false)?;
        if self.trunk_length_range[1] >= self.tree_height_range[0] {
            return Err(Error::invalid(
                "trunk_length_range",
                "trunks must end below the tree top",
            ));
        }
        if !(1..=8).contains(&self.supersampling) {
            return Err(Error::invalid("supersampling", "must lie in 1..=8"));
        }
        if !(self.variety >= 0.0 && self.variety <= 1.0) {
            return Err(Error::invalid("variety", "must be in [0, 1]"));
        }
        if !(self.foliage.gap_cell_per_leaf > 0.0) {
            return Err(Error::invalid("foliage.gap_cell_per_leaf", "must be positive"));
        }
        let [o0, o1] = self.foliage.occupancy_range;
        if !(o0 >= 0.0 && o1 <= 1.0) {
            return Err(Error::invalid("foliage.occupancy_range", "must lie in [0, 1]"));
        }
        let t = &self.target;
        if !(t.footprint[0] > 0.0 && t.footprint[1] > 0.0) {
            return Err(Error::invalid("target.footprint", "dimensions must be positive"));
        }
        let (hw, hh) = (self.area[0] / 2.0, self.area[1] / 2.0);
        if !(math::abs(t.center[0]) <= hw && math::abs(t.center[1]) <= hh) {
            return Err(Error::invalid("target.center", "must lie inside the scene area"));
        }
        let th = &self.thermal;
        if !(th.ground_patch_scale > 0.0 && th.crown_patch_scale > 0.0) {
            return Err(Error::invalid("thermal", "patch scales must be positive"));
        }
        if !((0.0..1.0).contains(&th.crown_patch_onset) && (0.0..1.0).contains(&th.ground_patch_onset)) {
            return Err(Error::invalid("thermal", "patch onsets must lie in [0, 1)"));
        }
        Ok(())
    }

    pub fn tree_count(&self) -> usize {
        math::round(self.density * self.area[0] * self.area[1] / 10_000.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub position: [f64; 2],
    pub height: f64,
    pub trunk_length: f64,
    pub trunk_radius: f64,
    pub leaf_size: f64,
    /// Horizontal semi-axis of the crown ellipsoid.
    pub crown_radius: f64,
    /// Vertical semi-axis; the crown spans `trunk_length..height`.
    pub crown_semi_height: f64,
    pub crown_center_z: f64,
    /// Edge length of the perforation voxels.
    pub gap_cell: f64,
    /// Probability that a crown voxel holds foliage.
    pub occupancy: f64,
    pub texture_seed: u64,
}

impl Tree {
    pub fn crown_center(&self) -> Vec3 {
        Vec3::new(self.position[0], self.position[1], self.crown_center_z)
    }

    /// Trunks continue inside the crown up to its center.
    pub fn trunk_top(&self) -> f64 {
        self.crown_center_z
    }
}

/// Uniform spatial hash of tree footprints, used by the ray caster.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TreeGrid {
    origin: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    offsets: Vec<u32>,
    items: Vec<u32>,
}

impl TreeGrid {
    const CELL: f64 = 4.0;

    fn build(trees: &[Tree], area: [f64; 2]) -> Self {
        let margin = trees
            .iter()
            .map(|t| t.crown_radius.max(t.trunk_radius))
            .fold(0.0, f64::max);
        let origin = [-area[0] / 2.0 - margin, -area[1] / 2.0 - margin];
        let cell = Self::CELL;
        let nx = (math::floor((area[0] + 2.0 * margin) / cell) as usize + 1).max(1);
        let ny = (math::floor((area[1] + 2.0 * margin) / cell) as usize + 1).max(1);
        let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); nx * ny];
        for (i, t) in trees.iter().enumerate() {
            let r = t.crown_radius.max(t.trunk_radius);
            let x0 = Self::clamp_index((t.position[0] - r - origin[0]) / cell, nx);
            let x1 = Self::clamp_index((t.position[0] + r - origin[0]) / cell, nx);
            let y0 = Self::clamp_index((t.position[1] - r - origin[1]) / cell, ny);
            let y1 = Self::clamp_index((t.position[1] + r - origin[1]) / cell, ny);
            for y in y0..=y1 {
                for x in x0..=x1 {
                    buckets[y * nx + x].push(i as u32);
                }
            }
        }
        let mut offsets = Vec::with_capacity(nx * ny + 1);
        let mut items = Vec::new();
        offsets.push(0);
        for b in &buckets {
            items.extend_from_slice(b);
            offsets.push(items.len() as u32);
        }
        TreeGrid {
            origin,
            cell,
            nx,
            ny,
            offsets,
            items,
        }
    }

    fn clamp_index(v: f64, n: usize) -> usize {
        if v <= 0.0 {
            0
        } else {
            (math::floor(v) as usize).min(n - 1)
        }
    }

    #[inline]
    fn bucket(&self, ix: usize, iy: usize) -> &[u32] {
        let k = iy * self.nx + ix;
        &self.items[self.offsets[k] as usize..self.offsets[k + 1] as usize]
    }

    /// Trees whose footprint bucket contains the point.
    #[inline]
    fn at(&self, x: f64, y: f64) -> &[u32] {
        let fx = (x - self.origin[0]) / self.cell;
        let fy = (y - self.origin[1]) / self.cell;
        if fx < 0.0 || fy < 0.0 || fx >= self.nx as f64 || fy >= self.ny as f64 {
            return &[];
        }
        self.bucket(fx as usize, fy as usize)
    }

    /// Appends the trees of every bucket crossed by the segment `a -> b`.
    fn collect_segment(&self, a: [f64; 2], b: [f64; 2], out: &mut Vec<u32>) {
        let to_grid = |p: [f64; 2]| [(p[0] - self.origin[0]) / self.cell, (p[1] - self.origin[1]) / self.cell];
        let (ga, gb) = (to_grid(a), to_grid(b));
        let (nx, ny) = (self.nx as i64, self.ny as i64);
        let mut ix = math::floor(ga[0]) as i64;
        let mut iy = math::floor(ga[1]) as i64;
        let ex = math::floor(gb[0]) as i64;
        let ey = math::floor(gb[1]) as i64;
        let (dx, dy) = (gb[0] - ga[0], gb[1] - ga[1]);
        let step_x = if dx > 0.0 { 1 } else { -1 };
        let step_y = if dy > 0.0 { 1 } else { -1 };
        let t_dx = if dx != 0.0 { math::abs(1.0 / dx) } else { f64::INFINITY };
        let t_dy = if dy != 0.0 { math::abs(1.0 / dy) } else { f64::INFINITY };
        let next = |g: f64, i: i64, d: f64| {
            if d > 0.0 {
                (i as f64 + 1.0 - g) / d
            } else if d < 0.0 {
                (g - i as f64) / -d
            } else {
                f64::INFINITY
            }
        };
        let mut t_x = next(ga[0], ix, dx);
        let mut t_y = next(ga[1], iy, dy);
        let max_steps = (math::abs((ex - ix) as f64) + math::abs((ey - iy) as f64)) as usize + 1;
        for _ in 0..=max_steps {
            if ix >= 0 && iy >= 0 && ix < nx && iy < ny {
                out.extend_from_slice(self.bucket(ix as usize, iy as usize));
            }
            if ix == ex && iy == ey {
                break;
            }
            if t_x < t_y {
                ix += step_x;
                t_x += t_dx;
            } else {
                iy += step_y;
                t_y += t_dy;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub trees: Vec<Tree>,
    pub target: TargetSpec,
    pub condition: Condition,
    pub thermal: ThermalModel,
    pub area: [f64; 2],
    pub seed: u64,
    pub canopy_top: f64,
    pub supersampling: u32,
    pub(crate) grid: TreeGrid,
}

fn draw(rng: &mut ChaCha8Rng, range: [f64; 2], variety: f64) -> f64 {
    let u: f64 = rng.random();
    let mid = (range[0] + range[1]) / 2.0;
    let half = (range[1] - range[0]) / 2.0 * variety;
    mid - half + 2.0 * half * u
}

fn tree_stream(seed: u64, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(i as u64 + 1);
    rng
}

/// Deterministically builds the forest described by `spec`.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let count = spec.tree_count();
    let [leaf_lo, leaf_hi] = spec.leaf_size_range;
    let [occ_lo, occ_hi] = spec.foliage.occupancy_range;
    let mut trees = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = tree_stream(spec.seed, i);
        let x = (rng.random::<f64>() - 0.5) * spec.area[0];
        let y = (rng.random::<f64>() - 0.5) * spec.area[1];
        let height = draw(&mut rng, spec.tree_height_range, spec.variety);
        let trunk_length = draw(&mut rng, spec.trunk_length_range, spec.variety);
        let trunk_radius = draw(&mut rng, spec.trunk_radius_range, spec.variety);
        let leaf_size = draw(&mut rng, spec.leaf_size_range, spec.variety);
        let crown_radius = draw(&mut rng, spec.crown_radius_range, spec.variety);
        let texture_seed: u64 = rng.random();
        let leaf_t = if leaf_hi > leaf_lo {
            (leaf_size - leaf_lo) / (leaf_hi - leaf_lo)
        } else {
            0.5
        };
        trees.push(Tree {
            position: [x, y],
            height,
            trunk_length,
            trunk_radius,
            leaf_size,
            crown_radius,
            crown_semi_height: (height - trunk_length) / 2.0,
            crown_center_z: (height + trunk_length) / 2.0,
            gap_cell: spec.foliage.gap_cell_per_leaf * leaf_size,
            occupancy: occ_lo + (occ_hi - occ_lo) * leaf_t,
            texture_seed,
        });
    }
    let canopy_top = trees.iter().map(|t| t.height).fold(0.0, f64::max);
    let grid = TreeGrid::build(&trees, spec.area);
    Ok(Scene {
        trees,
        target: spec.target,
        condition: spec.condition,
        thermal: spec.thermal,
        area: spec.area,
        seed: spec.seed,
        canopy_top,
        supersampling: spec.supersampling,
        grid,
    })
}

/// Unoccluded target footprint rasterized on a focal-plane grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub footprint_mask: Mask,
    pub footprint_area: usize,
    pub plane: FocalPlaneSpec,
}

/// Rasterizes the target rectangle on the plane grid, ignoring occlusion.
/// Cells whose center lies on the footprint are set.
pub fn render_ground_truth(scene: &Scene, plane: &FocalPlaneSpec) -> Result<GroundTruth> {
    plane.validate()?;
    let (w, h) = (plane.grid_width, plane.grid_height);
    let corners = [
        [0.0, 0.0],
        [w as f64 - 1.0, 0.0],
        [0.0, h as f64 - 1.0],
        [w as f64 - 1.0, h as f64 - 1.0],
    ]
    .map(|c| plane.cell_world(c));
    let half = plane.grid_resolution / 2.0;
    let lo_x = corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) - half;
    let hi_x = corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) + half;
    let lo_y = corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) - half;
    let hi_y = corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) + half;
    let covered = scene
        .target
        .corners()
        .iter()
        .all(|c| c[0] >= lo_x && c[0] <= hi_x && c[1] >= lo_y && c[1] <= hi_y);
    if !covered {
        return Err(Error::TargetOutsideGrid);
    }
    let mask = Raster::from_fn(w, h, |col, row| {
        let p = plane.cell_world([col as f64, row as f64]);
        scene.target.contains(p.x, p.y)
    });
    let area = mask.count_set();
    if area == 0 {
        return Err(Error::TargetUnresolved {
            cell_size: plane.grid_resolution,
        });
    }
    Ok(GroundTruth {
        footprint_mask: mask,
        footprint_area: area,
        plane: *plane,
    })
}

/// Renders one frame per pose, indexed in path order.
pub fn simulate_flight(scene: &Scene, intrinsics: &CameraIntrinsics, path: &[Pose]) -> Result<Vec<Frame>> {
    if path.is_empty() {
        return Err(Error::EmptyInput("flight path has no poses"));
    }
    path.iter()
        .enumerate()
        .map(|(i, pose)| render_frame_indexed(scene, intrinsics, pose, i as u64))
        .collect()
}

/// Straight nadir flight centered on `center`: `count` poses `spacing` apart
/// along `direction` (radians counter-clockwise from east), heading north.
pub fn linear_path(center: [f64; 2], altitude: f64, direction: f64, spacing: f64, count: usize) -> Vec<Pose> {
    let (s, c) = (math::sin(direction), math::cos(direction));
    let mid = (count as f64 - 1.0) / 2.0;
    (0..count)
        .map(|i| {
            let d = (i as f64 - mid) * spacing;
            Pose::nadir(center[0] + c * d, center[1] + s * d, altitude)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_count_follows_density() {
        for (d, n) in [(500.0, 500), (300.0, 300), (0.0, 0)] {
            let spec = SceneSpec {
                density: d,
                ..SceneSpec::default()
            };
            assert_eq!(generate_scene(&spec).unwrap().trees.len(), n);
        }
    }

    #[test]
    fn trees_within_ranges() {
        let spec = SceneSpec {
            density: 500.0,
            seed: 11,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let within = |v: f64, r: [f64; 2]| v >= r[0] && v <= r[1];
        for t in &scene.trees {
            assert!(within(t.height, spec.tree_height_range));
            assert!(within(t.trunk_length, spec.trunk_length_range));
            assert!(within(t.trunk_radius, spec.trunk_radius_range));
            assert!(within(t.leaf_size, spec.leaf_size_range));
            assert!(within(t.crown_radius, spec.crown_radius_range));
            assert!(t.position[0].abs() <= 50.0 && t.position[1].abs() <= 50.0);
            assert!((t.crown_center_z + t.crown_semi_height - t.height).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let spec = SceneSpec {
            seed: 42,
            ..SceneSpec::default()
        };
        assert_eq!(generate_scene(&spec).unwrap(), generate_scene(&spec).unwrap());
        let other = generate_scene(&SceneSpec {
            seed: 43,
            ..spec.clone()
        })
        .unwrap();
        assert_ne!(
            generate_scene(&spec).unwrap().trees[0].position,
            other.trees[0].position
        );
    }

    #[test]
    fn denser_forest_extends_sparser_one() {
        let sparse = generate_scene(&SceneSpec {
            seed: 5,
            density: 300.0,
            ..SceneSpec::default()
        })
        .unwrap();
        let dense = generate_scene(&SceneSpec {
            seed: 5,
            density: 500.0,
            ..SceneSpec::default()
        })
        .unwrap();
        assert_eq!(&dense.trees[..300], &sparse.trees[..]);
    }

    #[test]
    fn zero_variety_gives_identical_shapes() {
        let scene = generate_scene(&SceneSpec {
            variety: 0.0,
            ..SceneSpec::default()
        })
        .unwrap();
        assert!(scene.trees.iter().all(|t| t.height == 22.5 && t.crown_radius == 2.75));
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = [
            SceneSpec {
                density: -1.0,
                ..SceneSpec::default()
            },
            SceneSpec {
                tree_height_range: [25.0, 20.0],
                ..SceneSpec::default()
            },
            SceneSpec {
                trunk_length_range: [4.0, 30.0],
                ..SceneSpec::default()
            },
            SceneSpec {
                target: TargetSpec::new(Posture::Lying, [80.0, 0.0]),
                ..SceneSpec::default()
            },
        ];
        for spec in bad {
            assert!(generate_scene(&spec).is_err(), "{spec:?}");
        }
    }

    fn truth_plane() -> FocalPlaneSpec {
        // Shifted off the lattice so no cell center lies on a footprint edge.
        FocalPlaneSpec::centered(35.0, 35.0, [0.03, 0.03], 0.1, 40, 40)
    }

    #[test]
    fn lying_target_rasterizes_to_90_cells() {
        let scene = generate_scene(&SceneSpec {
            density: 0.0,
            ..SceneSpec::default()
        })
        .unwrap();
        let gt = render_ground_truth(&scene, &truth_plane()).unwrap();
        assert_eq!(gt.footprint_area, 18 * 5);
        assert_eq!(gt.footprint_mask.count_set(), gt.footprint_area);
    }

    #[test]
    fn half_turn_keeps_the_mask() {
        let mut spec = SceneSpec {
            density: 0.0,
            ..SceneSpec::default()
        };
        spec.target.heading = 0.4;
        let a = render_ground_truth(&generate_scene(&spec).unwrap(), &truth_plane()).unwrap();
        spec.target.heading = 0.4 + core::f64::consts::PI;
        let b = render_ground_truth(&generate_scene(&spec).unwrap(), &truth_plane()).unwrap();
        assert_eq!(a.footprint_mask, b.footprint_mask);
        assert!(a.footprint_area > 0);
    }

    #[test]
    fn target_outside_grid_is_an_error() {
        let mut spec = SceneSpec {
            density: 0.0,
            ..SceneSpec::default()
        };
        spec.target.center = [10.0, 10.0];
        let scene = generate_scene(&spec).unwrap();
        assert_eq!(
            render_ground_truth(&scene, &truth_plane()),
            Err(Error::TargetOutsideGrid)
        );
    }

    #[test]
    fn linear_path_spacing() {
        let p = linear_path([0.0, 0.0], 35.0, 0.0, 1.0, 10);
        assert_eq!(p.len(), 10);
        assert!((p[9].position.x - p[0].position.x - 9.0).abs() < 1e-12);
        assert!((p[0].position.x + 4.5).abs() < 1e-12);
        let p = linear_path([0.0, 0.0], 35.0, 0.0, 0.5, 30);
        assert!((p[29].position.x - p[0].position.x - 14.5).abs() < 1e-12);
    }

    #[test]
    fn segment_walk_visits_endpoint_buckets() {
        let scene = generate_scene(&SceneSpec {
            density: 500.0,
            seed: 3,
            ..SceneSpec::default()
        })
        .unwrap();
        let mut out = Vec::new();
        scene.grid.collect_segment([-10.0, -3.0], [7.0, 12.0], &mut out);
        for &i in scene.grid.at(-10.0, -3.0).iter().chain(scene.grid.at(7.0, 12.0)) {
            assert!(out.contains(&i));
        }
    }
}
