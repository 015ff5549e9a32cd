//! PNG encoding of rasters: 16-bit grayscale for data, 8-bit for display.

use std::path::Path;

use image::{GrayImage, ImageBuffer, Luma, RgbImage};
use saai_core::colormap::hot_colormap;
use saai_core::raster::{Mask, Raster};

use crate::error::{Error, Result};

/// Value stored for 1.0 in 16-bit images.
pub const SCALE_16: f64 = 65535.0;

pub fn quantize_16(v: f64) -> Result<u16> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Invalid(format!(
            "value {v} outside [0, 1] cannot be stored as 16-bit"
        )));
    }
    Ok((v * SCALE_16).round() as u16)
}

fn single_channel(r: &Raster<f64>) -> Result<()> {
    if r.channels() != 1 {
        return Err(saai_core::Error::ChannelMismatch {
            expected: 1,
            got: r.channels(),
        }
        .into());
    }
    Ok(())
}

pub fn write_gray16(path: &Path, raster: &Raster<f64>) -> Result<()> {
    single_channel(raster)?;
    let data = raster
        .data()
        .iter()
        .map(|&v| quantize_16(v))
        .collect::<Result<Vec<u16>>>()?;
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(raster.width(), raster.height(), data).expect("buffer matches raster size");
    img.save(path).map_err(Error::image(path))
}

pub fn read_gray16(path: &Path) -> Result<Raster<f64>> {
    let img = image::open(path).map_err(Error::image(path))?.into_luma16();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f64 / SCALE_16).collect();
    Ok(Raster::from_vec(w, h, 1, data)?)
}

/// 3-channel raster in `[0, 1]` as 8-bit RGB.
pub fn write_rgb8(path: &Path, raster: &Raster<f64>) -> Result<()> {
    if raster.channels() != 3 {
        return Err(saai_core::Error::ChannelMismatch {
            expected: 3,
            got: raster.channels(),
        }
        .into());
    }
    let data = raster
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = RgbImage::from_raw(raster.width(), raster.height(), data).expect("buffer matches raster size");
    img.save(path).map_err(Error::image(path))
}

pub fn read_rgb8(path: &Path) -> Result<Raster<f64>> {
    let img = image::open(path).map_err(Error::image(path))?.into_rgb8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v as f64 / 255.0).collect();
    Ok(Raster::from_vec(w, h, 3, data)?)
}

/// Display copy of a scalar raster through the hot colormap.
pub fn colormapped(raster: &Raster<f64>) -> Result<Raster<f64>> {
    Ok(raster.map_channels(hot_colormap)?)
}

pub fn encode_colormapped_png(raster: &Raster<f64>) -> Result<Vec<u8>> {
    encode_rgb8_png(&colormapped(raster)?)
}

/// 3-channel raster in `[0, 1]` as an in-memory 8-bit PNG.
pub fn encode_rgb8_png(rgb: &Raster<f64>) -> Result<Vec<u8>> {
    if rgb.channels() != 3 {
        return Err(saai_core::Error::ChannelMismatch {
            expected: 3,
            got: rgb.channels(),
        }
        .into());
    }
    let data = rgb
        .data()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = RgbImage::from_raw(rgb.width(), rgb.height(), data).expect("buffer matches raster size");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(Error::image("<memory>"))?;
    Ok(out.into_inner())
}

pub fn encode_gray16_png(raster: &Raster<f64>) -> Result<Vec<u8>> {
    single_channel(raster)?;
    let data = raster
        .data()
        .iter()
        .map(|&v| quantize_16(v))
        .collect::<Result<Vec<u16>>>()?;
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(raster.width(), raster.height(), data).expect("buffer matches raster size");
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png)
        .map_err(Error::image("<memory>"))?;
    Ok(out.into_inner())
}

pub fn write_mask(path: &Path, mask: &Mask) -> Result<()> {
    let data = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width(), mask.height(), data).expect("buffer matches mask size");
    img.save(path).map_err(Error::image(path))
}

pub fn read_mask(path: &Path) -> Result<Mask> {
    let img = image::open(path).map_err(Error::image(path))?.into_luma8();
    let (w, h) = img.dimensions();
    let data = img.into_raw().into_iter().map(|v| v >= 128).collect();
    Ok(Raster::from_vec(w, h, 1, data)?)
}
