//! Core domain types shared across the pipeline.

use crate::error::{Error, Result};

/// Single rectified view. Samples are row-major, `channels` interleaved,
/// one byte per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<u8>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be >= 1".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "images must have 1 or 3 channels, got {channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::Malformed(format!(
                "sample buffer has {} bytes, expected {}",
                data.len(),
                width * height * channels
            )));
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: u8) -> Self {
        Image::new(width, height, channels, vec![value; width * height * channels]).unwrap()
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    /// Luminance of a pixel: identity for grayscale, BT.601 weights rounded
    /// to the nearest integer for RGB.
    #[inline]
    pub fn luma(&self, x: usize, y: usize) -> u8 {
        if self.channels == 1 {
            self.sample(x, y, 0)
        } else {
            let r = self.sample(x, y, 0) as f32;
            let g = self.sample(x, y, 1) as f32;
            let b = self.sample(x, y, 2) as f32;
            (0.299 * r + 0.587 * g + 0.114 * b).round() as u8
        }
    }

    /// Channel-wise maximum absolute intensity difference between two pixels.
    #[inline]
    pub fn max_abs_diff(&self, ax: usize, ay: usize, bx: usize, by: usize) -> u8 {
        let mut best = 0u8;
        for c in 0..self.channels {
            let d = self.sample(ax, ay, c).abs_diff(self.sample(bx, by, c));
            best = best.max(d);
        }
        best
    }
}

/// Rectified left/right pair with identical geometry.
#[derive(Debug, Clone)]
pub struct ImagePair {
    pub left: Image,
    pub right: Image,
}

impl ImagePair {
    pub fn new(left: Image, right: Image) -> Result<Self> {
        if left.width != right.width
            || left.height != right.height
            || left.channels != right.channels
        {
            return Err(Error::DimensionMismatch(format!(
                "left is {}x{}x{}, right is {}x{}x{}",
                left.width, left.height, left.channels, right.width, right.height, right.channels
            )));
        }
        Ok(ImagePair { left, right })
    }

    pub fn width(&self) -> usize {
        self.left.width
    }

    pub fn height(&self) -> usize {
        self.left.height
    }
}

/// Dense disparity map. Invalid pixels are encoded as NaN so that 0 stays a
/// legal disparity; use [`DisparityMap::INVALID`] and [`DisparityMap::is_valid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl DisparityMap {
    pub const INVALID: f32 = f32::NAN;

    pub fn invalid(width: usize, height: usize) -> Self {
        DisparityMap {
            width,
            height,
            data: vec![Self::INVALID; width * height],
        }
    }

    pub fn from_values(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "disparity buffer has {} values, expected {}",
                data.len(),
                width * height
            )));
        }
        Ok(DisparityMap {
            width,
            height,
            data,
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f32) {
        self.data[y * self.width + x] = d;
    }

    #[inline]
    pub fn is_valid(v: f32) -> bool {
        !v.is_nan()
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| Self::is_valid(**v)).count()
    }
}

/// One trusted external guidance point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cue {
    pub x: usize,
    pub y: usize,
    pub d: f32,
}

/// The external set S of sparse (x, y, d) guidance points. N is typically
/// far smaller than H*W but that is not enforced.
#[derive(Debug, Clone)]
pub struct SparseCueSet {
    pub cues: Vec<Cue>,
    pub d_max: usize,
}

impl SparseCueSet {
    /// Validates bounds and rejects duplicate pixels.
    pub fn new(cues: Vec<Cue>, width: usize, height: usize, d_max: usize) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(cues.len());
        for cue in &cues {
            if cue.x >= width || cue.y >= height {
                return Err(Error::Malformed(format!(
                    "cue at ({}, {}) outside {}x{} image",
                    cue.x, cue.y, width, height
                )));
            }
            if !cue.d.is_finite() || cue.d < 0.0 || cue.d >= d_max as f32 {
                return Err(Error::Malformed(format!(
                    "cue disparity {} out of [0, {})",
                    cue.d, d_max
                )));
            }
            if !seen.insert((cue.x, cue.y)) {
                return Err(Error::Malformed(format!(
                    "duplicate cue at ({}, {})",
                    cue.x, cue.y
                )));
            }
        }
        Ok(SparseCueSet { cues, d_max })
    }

    pub fn len(&self) -> usize {
        self.cues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cues.is_empty()
    }
}
