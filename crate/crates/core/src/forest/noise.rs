//! Stateless hashing and lattice value noise for world-fixed textures.

use crate::math;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn hash3(seed: u64, a: i64, b: i64, c: i64) -> u64 {
    let mut h = mix(seed ^ 0x9e37_79b9_7f4a_7c15);
    h = mix(h ^ (a as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    h = mix(h ^ (b as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f));
    mix(h ^ (c as u64).wrapping_mul(0x1656_67b1_9e37_79f9))
}

/// Uniform in `[0, 1)`.
#[inline]
pub fn unit(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
pub fn unit3(seed: u64, a: i64, b: i64, c: i64) -> f64 {
    unit(hash3(seed, a, b, c))
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Smooth noise in `[0, 1)` with unit lattice spacing.
pub fn value_noise2(seed: u64, x: f64, y: f64) -> f64 {
    let (fx, fy) = (math::floor(x), math::floor(y));
    let (ix, iy) = (fx as i64, fy as i64);
    let (tx, ty) = (fade(x - fx), fade(y - fy));
    let v = |dx: i64, dy: i64| unit3(seed, ix + dx, iy + dy, 0);
    lerp(lerp(v(0, 0), v(1, 0), tx), lerp(v(0, 1), v(1, 1), tx), ty)
}

pub fn value_noise3(seed: u64, x: f64, y: f64, z: f64) -> f64 {
    let (fx, fy, fz) = (math::floor(x), math::floor(y), math::floor(z));
    let (ix, iy, iz) = (fx as i64, fy as i64, fz as i64);
    let (tx, ty, tz) = (fade(x - fx), fade(y - fy), fade(z - fz));
    let v = |dx: i64, dy: i64, dz: i64| unit3(seed, ix + dx, iy + dy, iz + dz);
    let plane = |dz: i64| {
        lerp(
            lerp(v(0, 0, dz), v(1, 0, dz), tx),
            lerp(v(0, 1, dz), v(1, 1, dz), tx),
            ty,
        )
    };
    lerp(plane(0), plane(1), tz)
}

pub fn smoothstep(edge0: f64, edge1: f64, x: f64) -> f64 {
    if edge1 <= edge0 {
        return if x >= edge1 { 1.0 } else { 0.0 };
    }
    fade(((x - edge0) / (edge1 - edge0)).clamp(0.0, 1.0))
}
