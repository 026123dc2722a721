//! Bounding boxes, raw moments and centroids of contour regions.
//!
//! Moments are summed over the filled region (every pixel of the component),
//! not over the boundary ring, so `m00` is the component's area.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contour::PixelCoord;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("contour region is empty")]
    EmptyContour,
}

/// Axis-aligned box in `(x0, y0, w, h)` form with inclusive pixel extent:
/// it covers columns `x0..x0 + w` and rows `y0..y0 + h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl BoundingBox {
    pub const fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    /// Last covered column.
    pub fn x1(&self) -> usize {
        self.x0 + self.w - 1
    }

    /// Last covered row.
    pub fn y1(&self) -> usize {
        self.y0 + self.h - 1
    }

    pub fn contains_pixel(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h
    }

    pub fn contains_point(&self, cx: f64, cy: f64) -> bool {
        cx >= self.x0 as f64 && cx <= self.x1() as f64 && cy >= self.y0 as f64 && cy <= self.y1() as f64
    }

    /// Non-degenerate and inside a `width x height` raster.
    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.w >= 1 && self.h >= 1 && self.x0 + self.w <= width && self.y0 + self.h <= height
    }

    /// Center pixel, rounding toward the top-left on even extents.
    pub fn center_pixel(&self) -> (usize, usize) {
        (self.x0 + (self.w - 1) / 2, self.y0 + (self.h - 1) / 2)
    }
}

/// Tight box around `region`.
pub fn bounding_rect(region: &[PixelCoord]) -> Result<BoundingBox, GeometryError> {
    let first = region.first().ok_or(GeometryError::EmptyContour)?;
    let (mut x_min, mut x_max, mut y_min, mut y_max) = (first.x, first.x, first.y, first.y);
    for p in &region[1..] {
        x_min = x_min.min(p.x);
        x_max = x_max.max(p.x);
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    Ok(BoundingBox::new(x_min, y_min, x_max - x_min + 1, y_max - y_min + 1))
}

/// Raw moments of order at most one, in exact integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct MomentSet {
    pub m00: u64,
    pub m10: u64,
    pub m01: u64,
}

pub fn moments(region: &[PixelCoord]) -> MomentSet {
    region.iter().fold(MomentSet::default(), |m, p| MomentSet {
        m00: m.m00 + 1,
        m10: m.m10 + p.x as u64,
        m01: m.m01 + p.y as u64,
    })
}

/// Polarity of a point prompt. Generated prompts are always foreground.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum PointLabel {
    #[default]
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrompt {
    pub cx: f64,
    pub cy: f64,
    pub label: PointLabel,
}

impl PointPrompt {
    pub fn positive(cx: f64, cy: f64) -> Self {
        Self {
            cx,
            cy,
            label: PointLabel::Positive,
        }
    }

    /// Nearest pixel, rounding halves up.
    pub fn nearest_pixel(&self) -> (usize, usize) {
        ((self.cx + 0.5).floor() as usize, (self.cy + 0.5).floor() as usize)
    }
}

/// `(m10 / m00, m01 / m00)`, or `None` when `m00 == 0`.
///
/// Each coordinate is a single correctly rounded division of two exact
/// integers.
pub fn centroid(m: &MomentSet) -> Option<PointPrompt> {
    if m.m00 == 0 {
        return None;
    }
    let area = m.m00 as f64;
    Some(PointPrompt::positive(m.m10 as f64 / area, m.m01 as f64 / area))
}
