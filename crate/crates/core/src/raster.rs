use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Row-major raster with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Raster<T> {
    width: u32,
    height: u32,
    channels: usize,
    data: Vec<T>,
}

/// Single-channel binary raster.
pub type Mask = Raster<bool>;

impl<T: Clone> Raster<T> {
    pub fn filled(width: u32, height: u32, channels: usize, value: T) -> Self {
        let len = width as usize * height as usize * channels;
        Raster {
            width,
            height,
            channels,
            data: vec![value; len],
        }
    }
}

impl<T> Raster<T> {
    pub fn from_vec(width: u32, height: u32, channels: usize, data: Vec<T>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::invalid("raster", "dimensions must be nonzero"));
        }
        if data.len() != width as usize * height as usize * channels {
            return Err(Error::invalid("raster", "data length does not match dimensions"));
        }
        Ok(Raster {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> T) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Raster {
            width,
            height,
            channels: 1,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }
    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }
    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }
    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }
    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[T] {
        let i = (y as usize * self.width as usize + x as usize) * self.channels;
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [T] {
        let i = (y as usize * self.width as usize + x as usize) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Raster<U> {
        Raster {
            width: self.width,
            height: self.height,
            channels: self.channels,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl<T: Copy> Raster<T> {
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> T {
        self.data[(y as usize * self.width as usize + x as usize) * self.channels]
    }
}

impl Raster<bool> {
    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

impl Raster<f64> {
    /// Expands a scalar raster to `n` channels through `f`.
    pub fn map_channels<const N: usize>(&self, f: impl Fn(f64) -> [f64; N]) -> Result<Raster<f64>> {
        if self.channels != 1 {
            return Err(Error::ChannelMismatch {
                expected: 1,
                got: self.channels,
            });
        }
        let mut data = Vec::with_capacity(self.data.len() * N);
        for &v in &self.data {
            data.extend_from_slice(&f(v));
        }
        Ok(Raster {
            width: self.width,
            height: self.height,
            channels: N,
            data,
        })
    }
}
