//! Naive reference implementations shared by the integration tests.
//!
//! Each oracle is written the obvious way and shares no code with the
//! library beyond the raster containers.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use apg_core::raster::{BinaryMask, GrayImage};
use rand::rngs::StdRng;
use rand::Rng;

pub fn threshold_oracle(values: &[u8], t: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        out.push(if v > t { 1 } else { 0 });
    }
    out
}

/// 8-connected components by breadth-first search. Components come out in
/// order of their first pixel in raster order; each one is sorted
/// row-major.
pub fn bfs_components(mask: &BinaryMask) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut seen = vec![false; (w * h) as usize];
    let mut comps = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if seen[i] || !mask.get(x as usize, y as usize) {
                continue;
            }
            seen[i] = true;
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([(x, y)]);
            while let Some((cx, cy)) = queue.pop_front() {
                comp.push((cx as usize, cy as usize));
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (cx + dx, cy + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            continue;
                        }
                        let j = (ny * w + nx) as usize;
                        if !seen[j] && mask.get(nx as usize, ny as usize) {
                            seen[j] = true;
                            queue.push_back((nx, ny));
                        }
                    }
                }
            }
            comp.sort_by_key(|&(x, y)| (y, x));
            comps.push(comp);
        }
    }
    comps
}

/// `(x0, y0, w, h)` by min/max scan.
pub fn bbox_oracle(pixels: &[(usize, usize)]) -> (usize, usize, usize, usize) {
    let xmin = pixels.iter().map(|p| p.0).min().unwrap();
    let xmax = pixels.iter().map(|p| p.0).max().unwrap();
    let ymin = pixels.iter().map(|p| p.1).min().unwrap();
    let ymax = pixels.iter().map(|p| p.1).max().unwrap();
    (xmin, ymin, xmax - xmin + 1, ymax - ymin + 1)
}

/// Region centroid from direct sums.
pub fn centroid_oracle(pixels: &[(usize, usize)]) -> (f64, f64) {
    let n = pixels.len() as f64;
    let sx: usize = pixels.iter().map(|p| p.0).sum();
    let sy: usize = pixels.iter().map(|p| p.1).sum();
    (sx as f64 / n, sy as f64 / n)
}

/// `(tp, fp, fn, tn)` by explicit case analysis.
pub fn confusion_oracle(pred: &BinaryMask, gt: &BinaryMask) -> (u64, u64, u64, u64) {
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for y in 0..pred.height() {
        for x in 0..pred.width() {
            match (pred.get(x, y), gt.get(x, y)) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                (false, false) => tn += 1,
            }
        }
    }
    (tp, fp, fn_, tn)
}

/// Breadth-first intensity flood from `seed`, 8-connected, `|v - v_seed| <= delta`.
pub fn flood_oracle(image: &GrayImage, seed: (usize, usize), delta: u8) -> Vec<bool> {
    let (w, h) = (image.width(), image.height());
    let reference = i32::from(image.get(seed.0, seed.1));
    let mut inside = vec![false; w * h];
    inside[seed.1 * w + seed.0] = true;
    let mut queue = VecDeque::from([seed]);
    while let Some((x, y)) = queue.pop_front() {
        for ny in y.saturating_sub(1)..(y + 2).min(h) {
            for nx in x.saturating_sub(1)..(x + 2).min(w) {
                let j = ny * w + nx;
                if !inside[j] && (i32::from(image.get(nx, ny)) - reference).abs() <= i32::from(delta) {
                    inside[j] = true;
                    queue.push_back((nx, ny));
                }
            }
        }
    }
    inside
}

pub fn random_heatmap(rng: &mut StdRng, max_side: usize) -> GrayImage {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let values = (0..w * h).map(|_| rng.gen()).collect();
    GrayImage::new(w, h, values).unwrap()
}

/// Random mask with a random fill density, so both sparse specks and
/// large merged blobs show up.
pub fn random_mask(rng: &mut StdRng, max_side: usize) -> BinaryMask {
    let w = rng.gen_range(1..=max_side);
    let h = rng.gen_range(1..=max_side);
    let p: f64 = rng.gen_range(0.05..0.75);
    let values = (0..w * h).map(|_| u8::from(rng.gen_bool(p))).collect();
    BinaryMask::new(w, h, values).unwrap()
}

pub fn random_mask_sized(rng: &mut StdRng, w: usize, h: usize) -> BinaryMask {
    let p: f64 = rng.gen_range(0.0..1.0);
    let values = (0..w * h).map(|_| u8::from(rng.gen_bool(p))).collect();
    BinaryMask::new(w, h, values).unwrap()
}

/// Every regular file under `root` with its contents, sorted by relative path.
pub fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).unwrap();
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), bytes));
            }
        }
    }
    out.sort();
    out
}
