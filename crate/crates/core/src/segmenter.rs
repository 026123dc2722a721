//! Promptable segmenter backends.
//!
//! Every backend decodes one mask per prompt pair; the pseudo-mask is the
//! union of those masks. An empty prompt set always yields an all-background
//! mask, without consulting the backend.

use std::fs;
use std::path::PathBuf;
use std::process::Command;

use thiserror::Error;

use crate::pnm::{self, PnmError};
use crate::prompt::{self, PromptError, PromptSet};
use crate::raster::{BinaryMask, GrayImage, Image, RasterError};

#[derive(Debug, Error)]
pub enum SegmenterError {
    #[error("prompts are for a {prompt_w}x{prompt_h} image but the image is {image_w}x{image_h}")]
    DimensionMismatch {
        prompt_w: usize,
        prompt_h: usize,
        image_w: usize,
        image_h: usize,
    },
    #[error("prompt pair {k} lies outside the image")]
    PromptOutOfBounds { k: usize },
    #[error("backend failure: {0}")]
    Backend(String),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

pub struct SegmenterRequest<'a> {
    pub image: &'a Image,
    pub prompts: &'a PromptSet,
}

impl SegmenterRequest<'_> {
    pub fn validate(&self) -> Result<(), SegmenterError> {
        let (w, h) = (self.image.width(), self.image.height());
        if self.prompts.width != w || self.prompts.height != h {
            return Err(SegmenterError::DimensionMismatch {
                prompt_w: self.prompts.width,
                prompt_h: self.prompts.height,
                image_w: w,
                image_h: h,
            });
        }
        for pair in &self.prompts.pairs {
            let box_ok = pair.bbox.is_none_or(|b| b.fits(w, h));
            let point_ok = pair
                .point
                .is_none_or(|p| p.cx >= 0.0 && p.cy >= 0.0 && p.cx <= (w - 1) as f64 && p.cy <= (h - 1) as f64);
            if !box_ok || !point_ok || (pair.bbox.is_none() && pair.point.is_none()) {
                return Err(SegmenterError::PromptOutOfBounds { k: pair.k });
            }
        }
        Ok(())
    }
}

pub trait Segmenter: Send + Sync {
    fn name(&self) -> &str;

    /// Backends holding exclusive resources return `true`; the pipeline
    /// then never issues two requests at once.
    fn exclusive(&self) -> bool {
        false
    }

    /// Decodes a validated, non-empty request.
    fn decode(&self, request: &SegmenterRequest<'_>) -> Result<BinaryMask, SegmenterError>;

    /// Validates the request and short-circuits empty prompt sets.
    fn segment(&self, request: &SegmenterRequest<'_>) -> Result<BinaryMask, SegmenterError> {
        request.validate()?;
        if request.prompts.is_empty() {
            return Ok(BinaryMask::empty(request.image.width(), request.image.height())?);
        }
        let mask = self.decode(request)?;
        if mask.width() != request.image.width() || mask.height() != request.image.height() {
            return Err(SegmenterError::Backend(format!(
                "backend returned a {}x{} mask for a {}x{} image",
                mask.width(),
                mask.height(),
                request.image.width(),
                request.image.height()
            )));
        }
        Ok(mask)
    }
}

/// Pixel-wise OR of equally sized masks.
pub fn union_masks(masks: &[BinaryMask]) -> Result<BinaryMask, SegmenterError> {
    let (first, rest) = masks
        .split_first()
        .ok_or_else(|| SegmenterError::Backend("no masks to combine".into()))?;
    let mut out = first.values().to_vec();
    for m in rest {
        first.same_dims(m)?;
        for (o, &v) in out.iter_mut().zip(m.values()) {
            *o |= v;
        }
    }
    Ok(BinaryMask::new(first.width(), first.height(), out)?)
}

pub const DEFAULT_DELTA: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MockSegmenterConfig {
    /// Intensity tolerance around the seed pixel.
    pub delta: u8,
}

impl Default for MockSegmenterConfig {
    fn default() -> Self {
        Self { delta: DEFAULT_DELTA }
    }
}

/// Deterministic stand-in for a learned decoder: an intensity flood fill.
///
/// For each pair the seed is the point prompt (nearest pixel) or, for
/// box-only pairs, the box center. The 8-connected region of pixels within
/// `delta` of the seed intensity is grown over the whole image and then
/// clipped to the pair's box, if any.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockSegmenter {
    pub config: MockSegmenterConfig,
}

impl MockSegmenter {
    pub fn new(delta: u8) -> Self {
        Self {
            config: MockSegmenterConfig { delta },
        }
    }
}

/// 8-connected flood fill of pixels with `|I - I(seed)| <= delta`.
pub fn grow_region(intensity: &GrayImage, seed: (usize, usize), delta: u8) -> Vec<bool> {
    let (w, h) = (intensity.width(), intensity.height());
    let reference = intensity.get(seed.0, seed.1);
    let accept = |v: u8| v.abs_diff(reference) <= delta;
    let mut grown = vec![false; w * h];
    let mut stack = vec![seed];
    grown[seed.1 * w + seed.0] = true;
    while let Some((x, y)) = stack.pop() {
        for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
            for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                let i = ny * w + nx;
                if !grown[i] && accept(intensity.values()[i]) {
                    grown[i] = true;
                    stack.push((nx, ny));
                }
            }
        }
    }
    grown
}

impl Segmenter for MockSegmenter {
    fn name(&self) -> &str {
        "mock"
    }

    fn decode(&self, request: &SegmenterRequest<'_>) -> Result<BinaryMask, SegmenterError> {
        let intensity = request.image.intensity();
        let (w, h) = (intensity.width(), intensity.height());
        let mut out = vec![0u8; w * h];
        for pair in &request.prompts.pairs {
            let seed = match (pair.point, pair.bbox) {
                (Some(p), _) => p.nearest_pixel(),
                (None, Some(b)) => b.center_pixel(),
                (None, None) => continue,
            };
            let grown = grow_region(&intensity, seed, self.config.delta);
            for (i, _) in grown.iter().enumerate().filter(|(_, &g)| g) {
                let (x, y) = (i % w, i / w);
                if pair.bbox.is_none_or(|b| b.contains_pixel(x, y)) {
                    out[i] = 1;
                }
            }
        }
        Ok(BinaryMask::new(w, h, out)?)
    }
}

/// Decode strategy requested from an external bridge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BridgeMode {
    #[default]
    PerPair,
    SingleCall,
}

impl BridgeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BridgeMode::PerPair => "per-pair",
            BridgeMode::SingleCall => "single-call",
        }
    }
}

/// Runs an external bridge process per image:
///
/// `<program> [args..] --image P --prompts P --out P --mode per-pair|single-call`
///
/// A zero exit status means the mask PGM was written to `--out`; anything
/// else is a backend failure whose first stderr line is the reason.
#[derive(Debug, Clone)]
pub struct ExternalSegmenter {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub scratch_dir: PathBuf,
    pub mode: BridgeMode,
}

impl ExternalSegmenter {
    fn scratch_path(&self, image_id: &str, ext: &str) -> PathBuf {
        let safe: String = image_id
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                    c
                } else {
                    '_'
                }
            })
            .collect();
        self.scratch_dir.join(format!("{safe}.{ext}"))
    }
}

fn backend<E: std::fmt::Display>(e: E) -> SegmenterError {
    SegmenterError::Backend(e.to_string())
}

impl Segmenter for ExternalSegmenter {
    fn name(&self) -> &str {
        "external"
    }

    fn exclusive(&self) -> bool {
        true
    }

    fn decode(&self, request: &SegmenterRequest<'_>) -> Result<BinaryMask, SegmenterError> {
        fs::create_dir_all(&self.scratch_dir).map_err(backend)?;
        let id = &request.prompts.image_id;
        let image_path = match request.image {
            Image::Gray(_) => self.scratch_path(id, "pgm"),
            Image::Rgb(_) => self.scratch_path(id, "ppm"),
        };
        let prompt_path = self.scratch_path(id, "json");
        let out_path = self.scratch_path(id, "mask.pgm");
        pnm::write_image(request.image, &image_path).map_err(|e: PnmError| backend(e))?;
        prompt::write_prompts(request.prompts, &prompt_path).map_err(|e: PromptError| backend(e))?;
        let _ = fs::remove_file(&out_path);

        let output = Command::new(&self.program)
            .args(&self.args)
            .arg("--image")
            .arg(&image_path)
            .arg("--prompts")
            .arg(&prompt_path)
            .arg("--out")
            .arg(&out_path)
            .arg("--mode")
            .arg(self.mode.as_str())
            .output()
            .map_err(|e| SegmenterError::Backend(format!("{}: {e}", self.program.display())))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let reason = stderr.lines().next().unwrap_or("").trim();
            return Err(SegmenterError::Backend(format!(
                "{} exited with {}: {}",
                self.program.display(),
                output.status,
                if reason.is_empty() { "no reason given" } else { reason }
            )));
        }
        pnm::read_mask(&out_path).map_err(backend)
    }
}
