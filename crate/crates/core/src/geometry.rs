//! Pinhole camera, pose conventions and the focal-plane registration mapping.
//!
//! World frame: local east-north-up meters, ground at `z = 0`.
//!
//! Camera frame: `x` right in the image, `y` down in the image, `z` along the
//! optical axis. The canonical camera looks straight down with image-up
//! pointing north. A pose rotates that canonical camera by, in order:
//!
//! 1. yaw about world `z`, clockwise from north (compass heading);
//! 2. gimbal pitch about the camera `x` axis, positive tilts the optical axis
//!    forward (towards the heading);
//! 3. gimbal roll about the camera `y` axis, positive tilts the optical axis
//!    to the right of the image.
//!
//! so `camera_to_world = Rz(-yaw) · R_nadir · Rx(pitch) · Ry(roll)`.
//!
//! Compass correction is positive counter-clockwise: applying `+θ` is the same
//! as flying with yaw `−θ`. The sign is a convention (the source material
//! only gives the stick direction), see [`Pose::with_compass_correction`].
//!
//! Pixel centers sit at integer coordinates, so a `W` pixel wide image spans
//! `[-0.5, W - 0.5]` and the default principal point is `((W-1)/2, (H-1)/2)`.

use crate::error::{Error, Result};
use crate::math::{self, Mat3, Vec3};
use crate::raster::Raster;

const DEGENERATE_DISTANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    /// East, north, up in meters.
    pub position: Vec3,
    /// Compass heading in radians, clockwise from north, in `[0, 2π)`.
    pub yaw: f64,
    /// Radians, `0` is nadir.
    pub gimbal_pitch: f64,
    pub gimbal_roll: f64,
}

impl Pose {
    pub fn new(position: Vec3, yaw: f64, gimbal_pitch: f64, gimbal_roll: f64) -> Self {
        Pose {
            position,
            yaw: math::wrap_two_pi(yaw),
            gimbal_pitch,
            gimbal_roll,
        }
    }

    /// Nadir-looking camera, heading north.
    pub fn nadir(x: f64, y: f64, z: f64) -> Self {
        Pose::new(Vec3::new(x, y, z), 0.0, 0.0, 0.0)
    }

    pub fn altitude(&self) -> f64 {
        self.position.z
    }

    /// Positive corrections rotate the registration counter-clockwise, which
    /// is equivalent to a yaw of `yaw - correction`.
    pub fn with_compass_correction(&self, correction: f64) -> Pose {
        Pose::new(
            self.position,
            self.yaw - correction,
            self.gimbal_pitch,
            self.gimbal_roll,
        )
    }

    pub fn camera_to_world(&self) -> Mat3 {
        // Camera x -> east, camera y -> south, optical axis -> down.
        let nadir = Mat3::from_columns(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, -1.0),
        );
        Mat3::rot_z(-self.yaw)
            .mul_mat(&nadir)
            .mul_mat(&Mat3::rot_x(self.gimbal_pitch))
            .mul_mat(&Mat3::rot_y(self.gimbal_roll))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CameraIntrinsics {
    /// Full horizontal field of view, radians.
    pub fov: f64,
    pub width: u32,
    pub height: u32,
    pub principal_point: [f64; 2],
}

impl CameraIntrinsics {
    pub fn new(fov: f64, width: u32, height: u32) -> Result<Self> {
        let c = CameraIntrinsics {
            fov,
            width,
            height,
            principal_point: [(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0],
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov > 0.0 && self.fov < core::f64::consts::PI) {
            return Err(Error::invalid("fov", "must be in (0, pi)"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid("width/height", "must be at least 1"));
        }
        Ok(())
    }

    /// Focal length in pixels; the horizontal FOV spans the full image width.
    #[inline]
    pub fn focal_px(&self) -> f64 {
        self.width as f64 / 2.0 / math::tan(self.fov / 2.0)
    }

    /// Vertical FOV implied by square pixels.
    pub fn vertical_fov(&self) -> f64 {
        2.0 * math::atan(self.height as f64 / 2.0 / self.focal_px())
    }

    /// Footprint of one pixel on a fronto-parallel plane at `distance`.
    pub fn ground_sample_distance(&self, distance: f64) -> f64 {
        2.0 * distance * math::tan(self.fov / 2.0) / self.width as f64
    }

    #[inline]
    fn in_image(&self, x: f64, y: f64) -> bool {
        x >= -0.5 && x <= self.width as f64 - 0.5 && y >= -0.5 && y <= self.height as f64 - 0.5
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit length.
    pub direction: Vec3,
}

impl Ray {
    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// World ray through a subpixel location.
pub fn pixel_ray(intrinsics: &CameraIntrinsics, pose: &Pose, pixel: [f64; 2]) -> Result<Ray> {
    let [x, y] = pixel;
    if !(x >= 0.0 && x < intrinsics.width as f64 && y >= 0.0 && y < intrinsics.height as f64) {
        return Err(Error::PixelOutOfBounds {
            x,
            y,
            width: intrinsics.width,
            height: intrinsics.height,
        });
    }
    Ok(pixel_ray_unchecked(
        intrinsics,
        &pose.camera_to_world(),
        pose.position,
        x,
        y,
    ))
}

#[inline]
pub(crate) fn pixel_ray_unchecked(
    intrinsics: &CameraIntrinsics,
    camera_to_world: &Mat3,
    origin: Vec3,
    x: f64,
    y: f64,
) -> Ray {
    let f = intrinsics.focal_px();
    let d = Vec3::new(
        (x - intrinsics.principal_point[0]) / f,
        (y - intrinsics.principal_point[1]) / f,
        1.0,
    );
    Ray {
        origin,
        direction: camera_to_world.mul_vec(d).normalized(),
    }
}

/// Projects a world point; `None` when behind the camera or outside the
/// image rectangle `[-0.5, W-0.5] x [-0.5, H-0.5]`.
pub fn project_point(intrinsics: &CameraIntrinsics, pose: &Pose, point: Vec3) -> Option<[f64; 2]> {
    let d = pose.camera_to_world().transpose().mul_vec(point - pose.position);
    project_camera(intrinsics, d)
}

#[inline]
fn project_camera(intrinsics: &CameraIntrinsics, d: Vec3) -> Option<[f64; 2]> {
    if d.z <= 0.0 {
        return None;
    }
    let f = intrinsics.focal_px();
    let x = intrinsics.principal_point[0] + f * d.x / d.z;
    let y = intrinsics.principal_point[1] + f * d.y / d.z;
    intrinsics.in_image(x, y).then_some([x, y])
}

/// The virtual focal plane and the output grid laid on it.
///
/// The plane sits `fp_distance` below `reference_altitude` and is tilted by
/// `fp_pitch` (about east, positive raises the northern half) and `fp_roll`
/// (about north, positive raises the eastern half) around the grid center.
/// Cell `(col, row)` has its center at plane coordinates
/// `grid_origin + (col, -row) * grid_resolution`, so rows run southwards and
/// rasters display north-up.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FocalPlaneSpec {
    pub reference_altitude: f64,
    pub fp_distance: f64,
    pub fp_pitch: f64,
    pub fp_roll: f64,
    pub compass_correction: f64,
    /// Plane coordinates (east, north) of the center of cell `(0, 0)`.
    pub grid_origin: [f64; 2],
    pub grid_resolution: f64,
    pub grid_width: u32,
    pub grid_height: u32,
}

impl FocalPlaneSpec {
    /// Untilted plane with a `width x height` grid centered on `center`.
    pub fn centered(
        reference_altitude: f64,
        fp_distance: f64,
        center: [f64; 2],
        grid_resolution: f64,
        grid_width: u32,
        grid_height: u32,
    ) -> Self {
        FocalPlaneSpec {
            reference_altitude,
            fp_distance,
            fp_pitch: 0.0,
            fp_roll: 0.0,
            compass_correction: 0.0,
            grid_origin: [
                center[0] - (grid_width as f64 - 1.0) / 2.0 * grid_resolution,
                center[1] + (grid_height as f64 - 1.0) / 2.0 * grid_resolution,
            ],
            grid_resolution,
            grid_width,
            grid_height,
        }
    }

    /// Square grid at the nadir ground sample distance for `fp_distance`,
    /// sized so it spans one camera footprint.
    pub fn matched_to_camera(
        intrinsics: &CameraIntrinsics,
        reference_altitude: f64,
        fp_distance: f64,
        center: [f64; 2],
    ) -> Self {
        let res = intrinsics.ground_sample_distance(fp_distance);
        FocalPlaneSpec::centered(
            reference_altitude,
            fp_distance,
            center,
            res,
            intrinsics.width,
            intrinsics.height,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let half_pi = core::f64::consts::FRAC_PI_2;
        if !(self.grid_resolution > 0.0 && self.grid_resolution.is_finite()) {
            return Err(Error::invalid("grid_resolution", "must be positive"));
        }
        if self.grid_width == 0 || self.grid_height == 0 {
            return Err(Error::invalid("grid", "dimensions must be at least 1"));
        }
        if !(self.fp_pitch > -half_pi && self.fp_pitch < half_pi) {
            return Err(Error::invalid("fp_pitch", "must be in (-pi/2, pi/2)"));
        }
        if !(self.fp_roll > -half_pi && self.fp_roll < half_pi) {
            return Err(Error::invalid("fp_roll", "must be in (-pi/2, pi/2)"));
        }
        if !(self.fp_distance.is_finite() && self.reference_altitude.is_finite() && self.compass_correction.is_finite())
        {
            return Err(Error::invalid("focal plane", "values must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn cell_count(&self) -> usize {
        self.grid_width as usize * self.grid_height as usize
    }

    pub fn same_grid(&self, other: &FocalPlaneSpec) -> bool {
        self.grid_width == other.grid_width && self.grid_height == other.grid_height
    }

    pub fn plane_height(&self) -> f64 {
        self.reference_altitude - self.fp_distance
    }

    fn tilt(&self) -> Mat3 {
        Mat3::rot_x(self.fp_pitch).mul_mat(&Mat3::rot_y(-self.fp_roll))
    }

    fn center_uv(&self) -> [f64; 2] {
        [
            self.grid_origin[0] + (self.grid_width as f64 - 1.0) / 2.0 * self.grid_resolution,
            self.grid_origin[1] - (self.grid_height as f64 - 1.0) / 2.0 * self.grid_resolution,
        ]
    }

    /// Pivot point of the tilt (world position of the grid center).
    pub fn pivot(&self) -> Vec3 {
        let [u, v] = self.center_uv();
        Vec3::new(u, v, self.plane_height())
    }

    pub fn normal(&self) -> Vec3 {
        self.tilt().mul_vec(Vec3::new(0.0, 0.0, 1.0))
    }

    /// World position of a (possibly fractional) cell coordinate.
    pub fn cell_world(&self, cell: [f64; 2]) -> Vec3 {
        let [cu, cv] = self.center_uv();
        let u = self.grid_origin[0] + cell[0] * self.grid_resolution;
        let v = self.grid_origin[1] - cell[1] * self.grid_resolution;
        self.pivot() + self.tilt().mul_vec(Vec3::new(u - cu, v - cv, 0.0))
    }

    /// Intersection of a ray with the plane, `None` if parallel or behind.
    pub fn intersect(&self, ray: &Ray) -> Option<Vec3> {
        let n = self.normal();
        let denom = n.dot(ray.direction);
        if math::abs(denom) < 1e-15 {
            return None;
        }
        let t = n.dot(self.pivot() - ray.origin) / denom;
        (t > 0.0).then(|| ray.at(t))
    }

    /// Signed distance of a point above the plane.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal().dot(p - self.pivot())
    }
}

/// Precomputed plane-to-image mapping for one camera and one focal plane.
///
/// Cell centers are affine in `(col, row)` in camera coordinates, so each
/// projection is three multiply-adds and a division.
#[derive(Debug, Clone, Copy)]
pub struct CellProjector {
    base: Vec3,
    d_col: Vec3,
    d_row: Vec3,
    focal: f64,
    principal: [f64; 2],
    width: f64,
    height: f64,
}

impl CellProjector {
    /// The plane's compass correction is applied to the pose here.
    pub fn new(intrinsics: &CameraIntrinsics, pose: &Pose, plane: &FocalPlaneSpec) -> Result<Self> {
        let distance = plane.signed_distance(pose.position);
        if !(math::abs(distance) >= DEGENERATE_DISTANCE) {
            return Err(Error::DegeneratePlane { distance });
        }
        let pose = pose.with_compass_correction(plane.compass_correction);
        let world_to_camera = pose.camera_to_world().transpose();
        let tilt = plane.tilt();
        let res = plane.grid_resolution;
        Ok(CellProjector {
            base: world_to_camera.mul_vec(plane.cell_world([0.0, 0.0]) - pose.position),
            d_col: world_to_camera.mul_vec(tilt.mul_vec(Vec3::new(res, 0.0, 0.0))),
            d_row: world_to_camera.mul_vec(tilt.mul_vec(Vec3::new(0.0, -res, 0.0))),
            focal: intrinsics.focal_px(),
            principal: intrinsics.principal_point,
            width: intrinsics.width as f64,
            height: intrinsics.height as f64,
        })
    }

    /// Subpixel location of a cell, or `None` when behind the camera or out
    /// of the image rectangle.
    #[inline]
    pub fn project(&self, col: f64, row: f64) -> Option<[f64; 2]> {
        let d = self.base + self.d_col * col + self.d_row * row;
        if d.z <= 0.0 {
            return None;
        }
        let inv = 1.0 / d.z;
        let x = self.principal[0] + self.focal * d.x * inv;
        let y = self.principal[1] + self.focal * d.y * inv;
        if x >= -0.5 && x <= self.width - 0.5 && y >= -0.5 && y <= self.height - 0.5 {
            Some([x, y])
        } else {
            None
        }
    }
}

/// Registration mapping from a focal-plane cell to a subpixel in one camera.
pub fn plane_cell_to_pixel(
    intrinsics: &CameraIntrinsics,
    pose: &Pose,
    plane: &FocalPlaneSpec,
    cell: [f64; 2],
) -> Result<Option<[f64; 2]>> {
    let [col, row] = cell;
    let inside =
        col >= 0.0 && col <= plane.grid_width as f64 - 1.0 && row >= 0.0 && row <= plane.grid_height as f64 - 1.0;
    if !inside {
        return Err(Error::CellOutOfBounds {
            col,
            row,
            width: plane.grid_width,
            height: plane.grid_height,
        });
    }
    Ok(CellProjector::new(intrinsics, pose, plane)?.project(col, row))
}

/// Bilinear interpolation; exact at integer coordinates. `None` outside
/// `[0, W-1] x [0, H-1]`.
pub fn sample_bilinear(raster: &Raster<f64>, at: [f64; 2]) -> Option<alloc::vec::Vec<f64>> {
    let (x0, y0, fx, fy) = bilinear_cell(raster.width(), raster.height(), at)?;
    let c = raster.channels();
    let w = raster.width() as usize;
    let data = raster.data();
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let idx = |x: usize, y: usize| (y * w + x) * c;
    Some(
        (0..c)
            .map(|k| {
                let top = lerp(data[idx(x0, y0) + k], data[idx(x1, y0) + k], fx);
                let bottom = lerp(data[idx(x0, y1) + k], data[idx(x1, y1) + k], fx);
                lerp(top, bottom, fy)
            })
            .collect(),
    )
}

/// Single-channel fast path of [`sample_bilinear`] over a raw buffer.
#[inline]
pub fn sample_bilinear_scalar(data: &[f64], width: u32, height: u32, at: [f64; 2]) -> Option<f64> {
    let (x0, y0, fx, fy) = bilinear_cell(width, height, at)?;
    let w = width as usize;
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let top = lerp(data[y0 * w + x0], data[y0 * w + x1], fx);
    let bottom = lerp(data[y1 * w + x0], data[y1 * w + x1], fx);
    Some(lerp(top, bottom, fy))
}

/// Nearest pixel for a subpixel location inside the bilinear domain.
#[inline]
pub fn nearest_pixel(width: u32, height: u32, at: [f64; 2]) -> Option<(u32, u32)> {
    let [x, y] = at;
    let in_domain = x >= 0.0 && x <= width as f64 - 1.0 && y >= 0.0 && y <= height as f64 - 1.0;
    in_domain.then(|| (math::round(x) as u32, math::round(y) as u32))
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

#[inline]
fn bilinear_cell(width: u32, height: u32, at: [f64; 2]) -> Option<(usize, usize, f64, f64)> {
    let [x, y] = at;
    let (wm, hm) = (width as f64 - 1.0, height as f64 - 1.0);
    if !(x >= 0.0 && x <= wm && y >= 0.0 && y <= hm) {
        return None;
    }
    let x0 = math::floor(x);
    let y0 = math::floor(y);
    Some((x0 as usize, y0 as usize, x - x0, y - y0))
}
