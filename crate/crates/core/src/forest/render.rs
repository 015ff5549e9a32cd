use alloc::vec::Vec;

use super::noise::{smoothstep, unit3, value_noise2, value_noise3};
use super::{Condition, Scene, Tree};
use crate::error::{Error, Result};
use crate::frame::Frame;
use crate::geometry::{pixel_ray_unchecked, CameraIntrinsics, Pose, Ray};
use crate::math::{self, Vec3};
use crate::raster::Raster;

/// Width of the world-fixed ground noise cells, meters.
const GROUND_NOISE_CELL: f64 = 0.1;
const GROUND_PATCH_SALT: u64 = 0x6a09_e667_f3bc_c908;
const GROUND_NOISE_SALT: u64 = 0xbb67_ae85_84ca_a73b;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Hit {
    Ground(Vec3),
    Crown(u32, Vec3),
    Trunk,
    Sky,
}

/// First-hit thermal render of one frame (index 0).
pub fn render_frame(scene: &Scene, intrinsics: &CameraIntrinsics, pose: &Pose) -> Result<Frame> {
    render_frame_indexed(scene, intrinsics, pose, 0)
}

pub fn render_frame_indexed(scene: &Scene, intrinsics: &CameraIntrinsics, pose: &Pose, index: u64) -> Result<Frame> {
    Ok(trace_view(scene, intrinsics, pose)?.shade(scene, index))
}

/// First hits of every pixel ray of one camera, before shading.
///
/// Shading only depends on the hit and on the scene's thermal model and
/// condition, so one trace can be shaded under several conditions.
#[derive(Debug, Clone)]
pub struct View {
    width: u32,
    height: u32,
    /// Rays per pixel.
    samples: usize,
    pose: Pose,
    hits: Vec<Hit>,
}

/// Casts one ray per pixel center and records the first hit.
pub fn trace_view(scene: &Scene, intrinsics: &CameraIntrinsics, pose: &Pose) -> Result<View> {
    intrinsics.validate()?;
    let altitude = pose.position.z;
    if !(altitude > scene.canopy_top && altitude > 0.0) {
        return Err(Error::InvalidPose {
            altitude,
            canopy_top: scene.canopy_top,
        });
    }
    let rot = pose.camera_to_world();
    let mut candidates = Vec::with_capacity(64);
    let mut crowns: Vec<(f64, f64, u32)> = Vec::with_capacity(16);
    let n = scene.supersampling.max(1);
    let offsets: Vec<f64> = (0..n).map(|k| (k as f64 + 0.5) / n as f64 - 0.5).collect();
    let mut hits = Vec::with_capacity(intrinsics.width as usize * intrinsics.height as usize * (n * n) as usize);
    for y in 0..intrinsics.height {
        for x in 0..intrinsics.width {
            for &oy in &offsets {
                for &ox in &offsets {
                    let ray = pixel_ray_unchecked(intrinsics, &rot, pose.position, x as f64 + ox, y as f64 + oy);
                    hits.push(trace(scene, &ray, &mut candidates, &mut crowns));
                }
            }
        }
    }
    Ok(View {
        width: intrinsics.width,
        height: intrinsics.height,
        samples: (n * n) as usize,
        pose: *pose,
        hits,
    })
}

impl View {
    /// Thermal frame of this view under the scene's condition.
    pub fn shade(&self, scene: &Scene, index: u64) -> Frame {
        let levels = scene.thermal.quantization_levels;
        let k = self.samples as f64;
        let data = self
            .hits
            .chunks_exact(self.samples)
            .map(|px| quantize(px.iter().map(|&h| shade(scene, h)).sum::<f64>() / k, levels))
            .collect();
        let image = Raster::from_vec(self.width, self.height, 1, data).expect("view dimensions");
        Frame::new(index, self.pose, image)
    }
}

fn quantize(v: f64, levels: u32) -> f64 {
    let v = v.clamp(0.0, 1.0);
    if levels == 0 {
        return v;
    }
    let l = levels as f64;
    math::round(v * l) / l
}

fn trace(scene: &Scene, ray: &Ray, candidates: &mut Vec<u32>, crowns: &mut Vec<(f64, f64, u32)>) -> Hit {
    let (o, d) = (ray.origin, ray.direction);
    if d.z >= 0.0 {
        return Hit::Sky;
    }
    let t_ground = -o.z / d.z;
    let mut best_t = t_ground;
    let mut best = Hit::Ground(ray.at(t_ground));
    if scene.trees.is_empty() {
        return best;
    }
    let t_top = ((o.z - scene.canopy_top) / -d.z).max(0.0);
    let a = ray.at(t_top);
    let b = ray.at(t_ground);
    candidates.clear();
    scene.grid.collect_segment([a.x, a.y], [b.x, b.y], candidates);
    candidates.sort_unstable();
    candidates.dedup();

    crowns.clear();
    for &i in candidates.iter() {
        let tree = &scene.trees[i as usize];
        if let Some(t) = trunk_hit(tree, ray) {
            if t < best_t {
                best_t = t;
                best = Hit::Trunk;
            }
        }
        if let Some((t0, t1)) = crown_interval(tree, ray) {
            crowns.push((t0, t1, i));
        }
    }
    crowns.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
    for &(t0, t1, i) in crowns.iter() {
        if t0 >= best_t {
            break;
        }
        let tree = &scene.trees[i as usize];
        if let Some(t) = foliage_hit(tree, ray, t0.max(0.0), t1.min(best_t)) {
            best_t = t;
            best = Hit::Crown(i, ray.at(t));
        }
    }
    best
}

fn trunk_hit(tree: &Tree, ray: &Ray) -> Option<f64> {
    let (o, d) = (ray.origin, ray.direction);
    let (px, py) = (o.x - tree.position[0], o.y - tree.position[1]);
    let a = d.x * d.x + d.y * d.y;
    if a < 1e-18 {
        return None;
    }
    let b = px * d.x + py * d.y;
    let c = px * px + py * py - tree.trunk_radius * tree.trunk_radius;
    let disc = b * b - a * c;
    if disc < 0.0 {
        return None;
    }
    let t = (-b - math::sqrt(disc)) / a;
    let z = o.z + t * d.z;
    (t > 0.0 && z >= 0.0 && z <= tree.trunk_top()).then_some(t)
}

fn crown_interval(tree: &Tree, ray: &Ray) -> Option<(f64, f64)> {
    let c = tree.crown_center();
    let (r, s) = (tree.crown_radius, tree.crown_semi_height);
    let o = ray.origin - c;
    let o = Vec3::new(o.x / r, o.y / r, o.z / s);
    let d = Vec3::new(ray.direction.x / r, ray.direction.y / r, ray.direction.z / s);
    let a = d.dot(d);
    let b = o.dot(d);
    let cc = o.dot(o) - 1.0;
    let disc = b * b - a * cc;
    if disc <= 0.0 {
        return None;
    }
    let q = math::sqrt(disc);
    let (t0, t1) = ((-b - q) / a, (-b + q) / a);
    (t1 > 0.0).then_some((t0, t1))
}

/// Walks the crown's foliage voxels along the ray (3-D DDA) and returns the
/// entry distance of the first occupied one inside `[t_start, t_end)`.
fn foliage_hit(tree: &Tree, ray: &Ray, t_start: f64, t_end: f64) -> Option<f64> {
    if !(t_end > t_start) {
        return None;
    }
    let s = tree.gap_cell;
    let p = ray.at(t_start);
    let d = ray.direction;
    let g = [p.x / s, p.y / s, p.z / s];
    let dir = [d.x, d.y, d.z];
    let mut cell = [0i64; 3];
    let mut step = [0i64; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for k in 0..3 {
        let f = math::floor(g[k]);
        cell[k] = f as i64;
        if dir[k] > 0.0 {
            step[k] = 1;
            t_delta[k] = s / dir[k];
            t_max[k] = t_start + (f + 1.0 - g[k]) * s / dir[k];
        } else if dir[k] < 0.0 {
            step[k] = -1;
            t_delta[k] = -s / dir[k];
            t_max[k] = t_start + (g[k] - f) * s / -dir[k];
        }
    }
    let mut t = t_start;
    while t < t_end {
        if unit3(tree.texture_seed, cell[0], cell[1], cell[2]) < tree.occupancy {
            return Some(t);
        }
        let k = if t_max[0] < t_max[1] {
            if t_max[0] < t_max[2] {
                0
            } else {
                2
            }
        } else if t_max[1] < t_max[2] {
            1
        } else {
            2
        };
        t = t_max[k];
        t_max[k] += t_delta[k];
        cell[k] += step[k];
    }
    None
}

fn shade(scene: &Scene, hit: Hit) -> f64 {
    let th = &scene.thermal;
    match hit {
        Hit::Sky => th.sky,
        Hit::Trunk => th.trunk,
        Hit::Ground(p) => {
            if scene.target.contains(p.x, p.y) {
                return scene.target.emission;
            }
            let n = unit3(
                scene.seed ^ GROUND_NOISE_SALT,
                math::floor(p.x / GROUND_NOISE_CELL) as i64,
                math::floor(p.y / GROUND_NOISE_CELL) as i64,
                0,
            );
            let mut v = th.ground_base + th.ground_noise * (2.0 * n - 1.0);
            if scene.condition == Condition::Sunny {
                let heat = ground_patch(scene, p);
                if heat > 0.0 && is_open_ground(scene, p) {
                    v = v.max(th.ground_base + (th.ground_hot_max - th.ground_base) * heat);
                }
            }
            v
        }
        Hit::Crown(i, p) => {
            let tree = &scene.trees[i as usize];
            match scene.condition {
                Condition::Cloudy => th.crown_base,
                Condition::Sunny => {
                    let up = ((p.z - tree.crown_center_z) / tree.crown_semi_height).clamp(0.0, 1.0);
                    let sc = th.crown_patch_scale;
                    let n = value_noise3(tree.texture_seed, p.x / sc, p.y / sc, p.z / sc);
                    let heat = patch_heat(th.crown_patch_onset, n) * math::sqrt(up);
                    th.crown_base + (th.crown_hot_max - th.crown_base) * heat
                }
            }
        }
    }
}

fn ground_patch(scene: &Scene, p: Vec3) -> f64 {
    let sc = scene.thermal.ground_patch_scale;
    patch_heat(
        scene.thermal.ground_patch_onset,
        value_noise2(scene.seed ^ GROUND_PATCH_SALT, p.x / sc, p.y / sc),
    )
}

/// Ramps from 0 at `onset` to 1 halfway between `onset` and 1.
fn patch_heat(onset: f64, n: f64) -> f64 {
    smoothstep(onset, onset + (1.0 - onset) / 2.0, n)
}

/// Ground not covered by any crown's vertical projection.
fn is_open_ground(scene: &Scene, p: Vec3) -> bool {
    scene.grid.at(p.x, p.y).iter().all(|&i| {
        let t = &scene.trees[i as usize];
        let (dx, dy) = (p.x - t.position[0], p.y - t.position[1]);
        dx * dx + dy * dy > t.crown_radius * t.crown_radius
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{generate_scene, render_ground_truth, SceneSpec};
    use crate::geometry::FocalPlaneSpec;

    fn cam(px: u32) -> CameraIntrinsics {
        CameraIntrinsics::new(50f64.to_radians(), px, px).unwrap()
    }

    #[test]
    fn empty_forest_shows_exactly_the_target() {
        let spec = SceneSpec {
            density: 0.0,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let intr = cam(128);
        let pose = Pose::nadir(0.0, 0.0, 35.0);
        let frame = render_frame(&scene, &intr, &pose).unwrap();
        // Expected: pixels whose ground point falls on the footprint.
        let rot = pose.camera_to_world();
        let mut expected = 0;
        for y in 0..128 {
            for x in 0..128 {
                let r = pixel_ray_unchecked(&intr, &rot, pose.position, x as f64, y as f64);
                let g = r.at(-r.origin.z / r.direction.z);
                let on = scene.target.contains(g.x, g.y);
                expected += on as usize;
                assert_eq!(frame.image.get(x, y) > 0.5, on, "pixel {x},{y}");
            }
        }
        assert!(expected > 0);
    }

    #[test]
    fn renders_are_deterministic() {
        let scene = generate_scene(&SceneSpec {
            density: 500.0,
            seed: 9,
            ..SceneSpec::default()
        })
        .unwrap();
        let intr = cam(96);
        let pose = Pose::nadir(1.0, -2.0, 35.0);
        assert_eq!(render_frame(&scene, &intr, &pose), render_frame(&scene, &intr, &pose));
    }

    #[test]
    fn camera_below_canopy_is_rejected() {
        let scene = generate_scene(&SceneSpec {
            density: 300.0,
            ..SceneSpec::default()
        })
        .unwrap();
        let r = render_frame(&scene, &cam(16), &Pose::nadir(0.0, 0.0, scene.canopy_top - 1.0));
        assert!(matches!(r, Err(Error::InvalidPose { .. })));
    }

    #[test]
    fn values_are_quantized_and_bounded() {
        let spec = SceneSpec {
            density: 400.0,
            seed: 2,
            condition: Condition::Sunny,
            ..SceneSpec::default()
        };
        let scene = generate_scene(&spec).unwrap();
        let f = render_frame(&scene, &cam(96), &Pose::nadir(0.0, 0.0, 35.0)).unwrap();
        for &v in f.image.data() {
            assert!((0.0..=1.0).contains(&v));
            assert!((v * 255.0 - (v * 255.0).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn forest_occludes_part_of_the_target() {
        let intr = cam(256);
        let pose = Pose::nadir(0.0, 0.0, 35.0);
        let plane = FocalPlaneSpec::matched_to_camera(&intr, 35.0, 35.0, [0.0, 0.0]);
        let mut seen = Vec::new();
        for density in [0.0, 500.0] {
            let scene = generate_scene(&SceneSpec {
                density,
                seed: 4,
                ..SceneSpec::default()
            })
            .unwrap();
            let gt = render_ground_truth(&scene, &plane).unwrap();
            let f = render_frame(&scene, &intr, &pose).unwrap();
            // Grid matches the camera one-to-one for a nadir view at the plane.
            let hot = f
                .image
                .data()
                .iter()
                .zip(gt.footprint_mask.data())
                .filter(|(&v, &m)| m && v > 0.9)
                .count();
            seen.push(hot as f64 / gt.footprint_area as f64);
        }
        assert!(seen[0] > 0.95, "{seen:?}");
        assert!(seen[1] < seen[0], "{seen:?}");
    }
}
