//! Deterministic synthetic scenes: image, ground truth, heatmap and label.
//!
//! Objects are irregular blobs (unions of discs dropped along a bounded
//! random walk) at a bright, nearly flat intensity over a dark textured
//! background. The heatmap imitates a coarse activation map: it saturates in
//! object interiors, spills a decaying halo past the object edges, and is
//! box-blurred, peak-normalized to 1 and quantized to 8 bits. Straight
//! strips sharing an object's intensity (roads, bare soil) cross some scenes
//! without being labeled or activated.
//!
//! All randomness comes from [`SplitMix64`], so a seed reproduces a scene
//! bit for bit on any platform.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::manifest::{self, ImageSample, Manifest, ManifestError};
use crate::pnm::{self, PnmError};
use crate::raster::{quantize, BinaryMask, GrayImage, Heatmap};
use crate::segmenter::DEFAULT_DELTA;

/// SplitMix64 (Steele, Lea & Flood): `state += 0x9E3779B97F4A7C15`, then
/// mix with multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB` and
/// shifts 30, 27, 31.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub const fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `lo..=hi` by modulo reduction.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }

    pub fn range_usize(&mut self, lo: usize, hi: usize) -> usize {
        self.range_i64(lo as i64, hi as i64) as usize
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seed of the `index`-th sample of a corpus.
pub fn sample_seed(corpus_seed: u64, index: u64) -> u64 {
    let mut rng = SplitMix64::new(corpus_seed ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectLayout {
    /// Random blobs; radii are in pixels.
    Random {
        min_objects: usize,
        max_objects: usize,
        min_radius: usize,
        max_radius: usize,
    },
    /// Axis-aligned rectangles at fixed positions.
    Rects(Vec<BoundingBox>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub layout: ObjectLayout,
    /// Inclusive range object intensities are drawn from (one per object).
    pub object_band: (u8, u8),
    /// Inclusive range the background intensity is drawn from.
    pub background_band: (u8, u8),
    /// Per-pixel uniform noise amplitude added to both.
    pub texture: u8,
    /// Minimum Chebyshev gap between random blobs.
    pub min_gap: usize,
    /// Inclusive range of straight distractor strips per scene. A strip
    /// copies the intensity of a random object (or draws from the object
    /// band when there is none) but is neither ground truth nor activated.
    pub strips: (usize, usize),
    pub strip_width: usize,
    pub blur_radius: usize,
    /// Decay length of the activation halo outside objects, in pixels.
    pub peak_decay: f64,
    /// Activation at an object's edge, relative to its saturated core.
    pub edge_level: f64,
    /// Depth at which interior activation saturates, in pixels.
    pub core_depth: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            width: 256,
            height: 256,
            layout: ObjectLayout::Random {
                min_objects: 0,
                max_objects: 3,
                min_radius: 8,
                max_radius: 20,
            },
            object_band: (160, 230),
            background_band: (20, 80),
            texture: 4,
            min_gap: 10,
            strips: (0, 2),
            strip_width: 2,
            blur_radius: 2,
            peak_decay: 2.0,
            edge_level: 0.7,
            core_depth: 4.0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Pnm(#[from] PnmError),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SceneSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidSpec(msg));
        if self.width == 0 || self.height == 0 {
            return bad("scene must be at least 1x1".into());
        }
        let (olo, ohi) = self.object_band;
        let (blo, bhi) = self.background_band;
        if olo > ohi || blo > bhi {
            return bad("intensity bands must be ordered (lo, hi)".into());
        }
        let delta = u32::from(DEFAULT_DELTA);
        let tex = u32::from(self.texture);
        if u32::from(olo) < u32::from(bhi) + 2 * delta + 2 * tex {
            return bad(format!(
                "object band must clear the background band by at least {} (2 x delta + 2 x texture)",
                2 * delta + 2 * tex
            ));
        }
        if 2 * tex > delta {
            return bad(format!(
                "texture {tex} makes objects wider than the default tolerance {delta}"
            ));
        }
        if !(self.peak_decay > 0.0 && self.core_depth > 0.0 && (0.0..=1.0).contains(&self.edge_level)) {
            return bad("heatmap shape parameters out of range".into());
        }
        if self.strips.0 > self.strips.1 || (self.strips.1 > 0 && self.strip_width == 0) {
            return bad("strip range must be ordered and strips at least 1 pixel wide".into());
        }
        match &self.layout {
            ObjectLayout::Random {
                min_objects,
                max_objects,
                min_radius,
                max_radius,
            } => {
                if min_objects > max_objects || min_radius > max_radius || *min_radius == 0 {
                    return bad("random layout ranges must be ordered with radius >= 1".into());
                }
            }
            ObjectLayout::Rects(rects) => {
                if let Some(r) = rects.iter().find(|r| !r.fits(self.width, self.height)) {
                    return bad(format!("rectangle {r:?} outside the scene"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: GrayImage,
    pub gt_mask: BinaryMask,
    pub heatmap: Heatmap,
    /// Image-level label: at least one object present.
    pub label: bool,
    pub objects: usize,
}

fn disc(mask: &mut [bool], w: usize, h: usize, cx: i64, cy: i64, r: i64) {
    for y in (cy - r).max(0)..=(cy + r).min(h as i64 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(w as i64 - 1) {
            let (dx, dy) = (x - cx, y - cy);
            if dx * dx + dy * dy <= r * r {
                mask[y as usize * w + x as usize] = true;
            }
        }
    }
}

fn random_blob(rng: &mut SplitMix64, w: usize, h: usize, radius: usize) -> Vec<bool> {
    let r = radius as i64;
    let (cx, cy) = (rng.range_i64(0, w as i64 - 1), rng.range_i64(0, h as i64 - 1));
    let mut blob = vec![false; w * h];
    let (mut x, mut y) = (cx, cy);
    let wander = (r / 2).max(1);
    for _ in 0..8 {
        let rr = rng.range_i64((r / 2).max(1), r);
        disc(&mut blob, w, h, x, y, rr);
        x = (x + rng.range_i64(-wander, wander)).clamp(cx - wander, cx + wander);
        y = (y + rng.range_i64(-wander, wander)).clamp(cy - wander, cy + wander);
    }
    blob
}

/// Two-pass 3-4 chamfer distance (in pixels) from every pixel to the
/// nearest pixel where `target` is true. Pixels with no target get a large
/// finite value.
fn chamfer_distance(target: &[bool], w: usize, h: usize) -> Vec<f64> {
    const FAR: u32 = u32::MAX / 4;
    let mut d: Vec<u32> = target.iter().map(|&t| if t { 0 } else { FAR }).collect();
    let at = |x: usize, y: usize| y * w + x;
    for y in 0..h {
        for x in 0..w {
            let mut v = d[at(x, y)];
            if x > 0 {
                v = v.min(d[at(x - 1, y)] + 3);
            }
            if y > 0 {
                v = v.min(d[at(x, y - 1)] + 3);
                if x > 0 {
                    v = v.min(d[at(x - 1, y - 1)] + 4);
                }
                if x + 1 < w {
                    v = v.min(d[at(x + 1, y - 1)] + 4);
                }
            }
            d[at(x, y)] = v;
        }
    }
    for y in (0..h).rev() {
        for x in (0..w).rev() {
            let mut v = d[at(x, y)];
            if x + 1 < w {
                v = v.min(d[at(x + 1, y)] + 3);
            }
            if y + 1 < h {
                v = v.min(d[at(x, y + 1)] + 3);
                if x + 1 < w {
                    v = v.min(d[at(x + 1, y + 1)] + 4);
                }
                if x > 0 {
                    v = v.min(d[at(x - 1, y + 1)] + 4);
                }
            }
            d[at(x, y)] = v;
        }
    }
    d.into_iter().map(|v| f64::from(v) / 3.0).collect()
}

/// Separable mean filter over a `(2r+1)^2` window truncated at the borders.
fn box_blur(values: &[f64], w: usize, h: usize, r: usize) -> Vec<f64> {
    if r == 0 {
        return values.to_vec();
    }
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let (c, extent) = if horizontal { (x, w) } else { (y, h) };
                let (lo, hi) = (c.saturating_sub(r), (c + r).min(extent - 1));
                let sum: f64 = (lo..=hi)
                    .map(|i| if horizontal { src[y * w + i] } else { src[i * w + x] })
                    .sum();
                out[y * w + x] = sum / (hi - lo + 1) as f64;
            }
        }
        out
    };
    pass(&pass(values, true), false)
}

fn render_heatmap(spec: &SceneSpec, objects: &[bool]) -> Heatmap {
    let (w, h) = (spec.width, spec.height);
    if !objects.iter().any(|&o| o) {
        return Heatmap::filled(w, h, 0).expect("valid dims");
    }
    let background: Vec<bool> = objects.iter().map(|&o| !o).collect();
    let depth = chamfer_distance(&background, w, h);
    let reach = chamfer_distance(objects, w, h);
    let activation: Vec<f64> = objects
        .iter()
        .zip(depth.iter().zip(&reach))
        .map(|(&inside, (&d_in, &d_out))| {
            if inside {
                spec.edge_level + (1.0 - spec.edge_level) * (d_in / spec.core_depth).min(1.0)
            } else {
                spec.edge_level * (-d_out / spec.peak_decay).exp()
            }
        })
        .collect();
    let blurred = box_blur(&activation, w, h, spec.blur_radius);
    let peak = blurred.iter().copied().fold(0.0, f64::max);
    Heatmap::new(w, h, blurred.iter().map(|&v| quantize(v / peak)).collect()).expect("valid dims")
}

pub fn generate(spec: &SceneSpec) -> Result<Scene, SynthError> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut rng = SplitMix64::new(spec.seed);

    // Object id per pixel, 0 = background.
    let mut owner = vec![0usize; w * h];
    let mut count = 0;
    match &spec.layout {
        ObjectLayout::Rects(rects) => {
            for r in rects {
                count += 1;
                for y in r.y0..r.y0 + r.h {
                    for x in r.x0..r.x0 + r.w {
                        owner[y * w + x] = count;
                    }
                }
            }
        }
        ObjectLayout::Random {
            min_objects,
            max_objects,
            min_radius,
            max_radius,
        } => {
            let wanted = rng.range_usize(*min_objects, *max_objects);
            for _ in 0..wanted {
                for _attempt in 0..32 {
                    let radius = rng.range_usize(*min_radius, *max_radius);
                    let blob = random_blob(&mut rng, w, h, radius);
                    let g = spec.min_gap as i64;
                    let clear = blob.iter().enumerate().filter(|(_, &b)| b).all(|(i, _)| {
                        let (x, y) = ((i % w) as i64, (i / w) as i64);
                        ((y - g).max(0)..=(y + g).min(h as i64 - 1)).all(|ny| {
                            ((x - g).max(0)..=(x + g).min(w as i64 - 1))
                                .all(|nx| owner[ny as usize * w + nx as usize] == 0)
                        })
                    });
                    if clear {
                        count += 1;
                        for (o, _) in owner.iter_mut().zip(&blob).filter(|(_, &b)| b) {
                            *o = count;
                        }
                        break;
                    }
                }
            }
        }
    }

    let intensities: Vec<i64> = (0..count)
        .map(|_| rng.range_i64(spec.object_band.0.into(), spec.object_band.1.into()))
        .collect();
    let background = rng.range_i64(spec.background_band.0.into(), spec.background_band.1.into());

    // Distractor strips: lines through a random point at a random angle.
    let mut strip = vec![None::<i64>; w * h];
    for _ in 0..rng.range_usize(spec.strips.0, spec.strips.1) {
        let level = if count > 0 {
            intensities[rng.range_usize(0, count - 1)]
        } else {
            rng.range_i64(spec.object_band.0.into(), spec.object_band.1.into())
        };
        let (px, py) = ((rng.next_f64() * w as f64), (rng.next_f64() * h as f64));
        let angle = rng.next_f64() * std::f64::consts::PI;
        let (nx, ny) = (-angle.sin(), angle.cos());
        let half = spec.strip_width as f64 / 2.0;
        for (i, s) in strip.iter_mut().enumerate() {
            let (x, y) = ((i % w) as f64 + 0.5, (i / w) as f64 + 0.5);
            if ((x - px) * nx + (y - py) * ny).abs() < half {
                *s = Some(level);
            }
        }
    }

    let tex = i64::from(spec.texture);
    let pixels = owner
        .iter()
        .zip(&strip)
        .map(|(&o, &s)| {
            let base = match (o, s) {
                (0, Some(level)) => level,
                (0, None) => background,
                (o, _) => intensities[o - 1],
            };
            (base + rng.range_i64(-tex, tex)).clamp(0, 255) as u8
        })
        .collect();

    let objects: Vec<bool> = owner.iter().map(|&o| o != 0).collect();
    let gt_mask = BinaryMask::from_bools(w, h, &objects).expect("valid dims");
    Ok(Scene {
        image: GrayImage::new(w, h, pixels).expect("valid dims"),
        heatmap: render_heatmap(spec, &objects),
        label: gt_mask.foreground_count() > 0,
        gt_mask,
        objects: count,
    })
}

pub fn sample_id(index: usize) -> String {
    format!("s{index:04}")
}

fn create_dir(path: &Path) -> Result<(), SynthError> {
    fs::create_dir_all(path).map_err(|source| SynthError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `count` scenes under `out_dir` (`images/`, `heatmaps/`, `masks/`
/// plus `manifest.csv`). Sample `i` uses `sample_seed(template.seed, i)`.
pub fn emit_corpus(template: &SceneSpec, count: usize, out_dir: impl AsRef<Path>) -> Result<Manifest, SynthError> {
    template.validate()?;
    let out_dir = out_dir.as_ref();
    for sub in ["images", "heatmaps", "masks"] {
        create_dir(&out_dir.join(sub))?;
    }
    let samples = (0..count)
        .into_par_iter()
        .map(|i| {
            let spec = SceneSpec {
                seed: sample_seed(template.seed, i as u64),
                ..template.clone()
            };
            let scene = generate(&spec)?;
            let id = sample_id(i);
            let sample = ImageSample {
                image_path: out_dir.join("images").join(format!("{id}.pgm")),
                heatmap_path: out_dir.join("heatmaps").join(format!("{id}.pgm")),
                label: scene.label,
                gt_mask_path: Some(out_dir.join("masks").join(format!("{id}.pgm"))),
                id,
            };
            pnm::write_pgm(&scene.image, &sample.image_path)?;
            pnm::write_pgm(&scene.heatmap, &sample.heatmap_path)?;
            pnm::write_mask(&scene.gt_mask, sample.gt_mask_path.as_ref().expect("set above"))?;
            Ok(sample)
        })
        .collect::<Result<Vec<_>, SynthError>>()?;
    let manifest = Manifest { samples };
    manifest::write_manifest(&manifest, out_dir.join("manifest.csv"), out_dir)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::{binarize, BinarizeConfig};
    use crate::metrics::evaluate;

    #[test]
    fn splitmix_reference_values() {
        // First outputs for seed 0 from the published reference implementation.
        let mut rng = SplitMix64::new(0);
        assert_eq!(rng.next_u64(), 0xE220_A839_7B1D_CDAF);
        assert_eq!(rng.next_u64(), 0x6E78_9E6A_A1B9_65F4);
        assert_eq!(rng.next_u64(), 0x06C4_5D18_8009_454F);
    }

    #[test]
    fn unit_floats_stay_in_range() {
        let mut rng = SplitMix64::new(99);
        assert!((0..1000).map(|_| rng.next_f64()).all(|v| (0.0..1.0).contains(&v)));
    }

    #[test]
    fn no_objects_means_negative() {
        let spec = SceneSpec {
            layout: ObjectLayout::Random {
                min_objects: 0,
                max_objects: 0,
                min_radius: 4,
                max_radius: 8,
            },
            width: 32,
            height: 32,
            ..SceneSpec::default()
        };
        let s = generate(&spec).unwrap();
        assert!(!s.label);
        assert_eq!(s.gt_mask.foreground_count(), 0);
        assert!(s.heatmap.values().iter().all(|&v| v == 0));
    }

    #[test]
    fn square_object_peaks_inside() {
        let square = BoundingBox::new(10, 12, 6, 6);
        let spec = SceneSpec {
            width: 32,
            height: 32,
            layout: ObjectLayout::Rects(vec![square]),
            ..SceneSpec::default()
        };
        let s = generate(&spec).unwrap();
        assert!(s.label);
        assert_eq!(s.gt_mask.foreground_count(), 36);
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(s.gt_mask.get(x, y), square.contains_pixel(x, y));
            }
        }
        let peak = *s.heatmap.values().iter().max().unwrap();
        assert_eq!(peak, 255);
        for (i, &v) in s.heatmap.values().iter().enumerate() {
            if v == 255 {
                let (x, y) = (i % 32, i / 32);
                assert!(square.contains_pixel(x, y) && x > 10 && x < 15 && y > 12 && y < 17);
            }
        }
    }

    #[test]
    fn same_seed_same_scene() {
        let spec = SceneSpec {
            seed: 1234,
            width: 96,
            height: 80,
            ..SceneSpec::default()
        };
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    }

    #[test]
    fn label_matches_ground_truth_and_heatmap_overlaps() {
        for i in 0..40 {
            let spec = SceneSpec {
                seed: sample_seed(7, i),
                ..SceneSpec::default()
            };
            let s = generate(&spec).unwrap();
            assert_eq!(s.label, s.gt_mask.foreground_count() > 0);
            if s.label {
                let cam = binarize(&s.heatmap, BinarizeConfig::default());
                let iou = evaluate(&cam, &s.gt_mask).unwrap().iou;
                assert!(iou >= 0.5, "sample {i}: heatmap IoU {iou}");
            }
        }
    }

    #[test]
    fn rejects_overlapping_bands() {
        let spec = SceneSpec {
            object_band: (90, 120),
            ..SceneSpec::default()
        };
        assert!(matches!(generate(&spec), Err(SynthError::InvalidSpec(_))));
    }

    #[test]
    fn empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_corpus(&SceneSpec::default(), 0, dir.path()).unwrap();
        assert!(m.is_empty());
        assert_eq!(
            fs::read_to_string(dir.path().join("manifest.csv")).unwrap(),
            "id,image,heatmap,label,gt_mask\n"
        );
    }
}
