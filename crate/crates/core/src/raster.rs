//! In-memory raster types.
//!
//! All rasters are row-major with `(x, y)` = (column, row), origin top-left.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RasterError {
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    ZeroDimension { width: usize, height: usize },
    #[error("expected {expected} samples for a {width}x{height} raster, got {actual}")]
    LengthMismatch {
        width: usize,
        height: usize,
        expected: usize,
        actual: usize,
    },
    #[error("mask value {value} at index {index} is not 0 or 1")]
    NotBinary { index: usize, value: u8 },
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
}

fn check_len(width: usize, height: usize, actual: usize, per_pixel: usize) -> Result<(), RasterError> {
    if width == 0 || height == 0 {
        return Err(RasterError::ZeroDimension { width, height });
    }
    let expected = width * height * per_pixel;
    if actual != expected {
        return Err(RasterError::LengthMismatch {
            width,
            height,
            expected,
            actual,
        });
    }
    Ok(())
}

/// 8-bit single-channel raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

/// A class-activation heatmap rendered to 8 bits; `H(x, y)` is `get(x, y)`.
pub type Heatmap = GrayImage;

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self, RasterError> {
        check_len(width, height, values.len(), 1)?;
        Ok(Self { width, height, values })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self, RasterError> {
        Self::new(width, height, vec![value; width * height])
    }

    /// Builds a raster by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Result<Self, RasterError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn into_values(self) -> Vec<u8> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.values[y * self.width + x]
    }
}

/// Quantizes a normalized activation in `[0, 1]` to an 8-bit intensity.
///
/// Negative inputs and NaN map to 0, inputs above 1 saturate at 255.
pub fn quantize(value: f64) -> u8 {
    if value.is_nan() || value <= 0.0 {
        return 0;
    }
    (value * 255.0).round().min(255.0) as u8
}

/// Per-pixel foreground/background raster with values in `{0, 1}`.
///
/// Also used for segmenter output (pseudo-masks).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self, RasterError> {
        check_len(width, height, values.len(), 1)?;
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, &v)| v > 1) {
            return Err(RasterError::NotBinary { index, value });
        }
        Ok(Self { width, height, values })
    }

    pub fn from_bools(width: usize, height: usize, bits: &[bool]) -> Result<Self, RasterError> {
        Self::new(width, height, bits.iter().map(|&b| b as u8).collect())
    }

    pub fn empty(width: usize, height: usize) -> Result<Self, RasterError> {
        Self::new(width, height, vec![0; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.values[y * self.width + x] != 0
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.values[y * self.width + x] = on as u8;
    }

    pub fn foreground_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn same_dims(&self, other: &BinaryMask) -> Result<(), RasterError> {
        if self.width != other.width || self.height != other.height {
            return Err(RasterError::DimensionMismatch {
                left_w: self.width,
                left_h: self.height,
                right_w: other.width,
                right_h: other.height,
            });
        }
        Ok(())
    }
}

/// Interleaved 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RgbImage {
    width: usize,
    height: usize,
    values: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, values: Vec<u8>) -> Result<Self, RasterError> {
        check_len(width, height, values.len(), 3)?;
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.values[i], self.values[i + 1], self.values[i + 2]]
    }

    /// Integer Rec. 601 luma, rounded to nearest.
    pub fn to_luma(&self) -> GrayImage {
        let values = self
            .values
            .chunks_exact(3)
            .map(|p| {
                let l = 299 * p[0] as u32 + 587 * p[1] as u32 + 114 * p[2] as u32;
                ((l + 500) / 1000) as u8
            })
            .collect();
        GrayImage {
            width: self.width,
            height: self.height,
            values,
        }
    }
}

/// An input image `X_i`: grayscale or RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Image {
    Gray(GrayImage),
    Rgb(RgbImage),
}

impl Image {
    pub fn width(&self) -> usize {
        match self {
            Image::Gray(g) => g.width(),
            Image::Rgb(c) => c.width(),
        }
    }

    pub fn height(&self) -> usize {
        match self {
            Image::Gray(g) => g.height(),
            Image::Rgb(c) => c.height(),
        }
    }

    /// Single-channel intensity view; RGB is reduced to luma.
    pub fn intensity(&self) -> std::borrow::Cow<'_, GrayImage> {
        match self {
            Image::Gray(g) => std::borrow::Cow::Borrowed(g),
            Image::Rgb(c) => std::borrow::Cow::Owned(c.to_luma()),
        }
    }
}
