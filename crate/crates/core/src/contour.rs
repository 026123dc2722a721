//! Outer contours of 8-connected foreground components.
//!
//! Components are labeled with a two-pass union-find scan. Each component's
//! outer border is then traced with Moore-neighbour following, clockwise in
//! image coordinates (x right, y down), starting at the component's top-most,
//! then left-most pixel. Holes are not traced; hole pixels are background and
//! never part of any region.

use serde::{Deserialize, Serialize};

use crate::geometry::bounding_rect;
use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: usize,
    pub y: usize,
}

impl PixelCoord {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

/// One connected foreground component.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contour {
    /// 1-based index in the owning [`ContourSet`].
    pub id: usize,
    /// Closed outer ring; consecutive entries (cyclically) are 8-adjacent.
    /// A pixel may repeat where the border passes through it twice.
    pub boundary: Vec<PixelCoord>,
    /// Every pixel of the component, in raster order.
    pub region: Vec<PixelCoord>,
}

impl Contour {
    pub fn area(&self) -> usize {
        self.region.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContourSet {
    pub width: usize,
    pub height: usize,
    /// Ordered by starting pixel (top-most, then left-most).
    pub contours: Vec<Contour>,
    /// Foreground pixels belonging to components below `min_area`.
    pub discarded_pixels: usize,
}

impl ContourSet {
    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }

    /// Debug dump: one `k,area,x0,y0,w,h` line per contour.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.contours {
            let b = bounding_rect(&c.region).expect("regions are non-empty");
            out.push_str(&format!("{},{},{},{},{},{}\n", c.id, c.area(), b.x0, b.y0, b.w, b.h));
        }
        out
    }
}

/// Clockwise in image coordinates, starting west.
const DIRS: [(isize, isize); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];
const WEST: usize = 0;

fn dir_index(dx: isize, dy: isize) -> usize {
    DIRS.iter()
        .position(|&d| d == (dx, dy))
        .expect("offset is a Moore neighbour")
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let next = parent[i as usize];
        parent[i as usize] = parent[next as usize];
        i = next;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) -> u32 {
    let ra = find(parent, a);
    let rb = find(parent, b);
    let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
    parent[hi as usize] = lo;
    lo
}

/// Labels 8-connected components. Returns per-pixel labels (0 = background,
/// components numbered from 1 in raster order of their first pixel) and the
/// component count.
fn label_components(mask: &BinaryMask) -> (Vec<u32>, usize) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = vec![0u32; w * h];
    let mut parent: Vec<u32> = vec![0];

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut current = 0u32;
            let mut consider = |l: u32, parent: &mut Vec<u32>| {
                if l != 0 {
                    current = if current == 0 {
                        find(parent, l)
                    } else {
                        union(parent, current, l)
                    };
                }
            };
            if x > 0 {
                consider(labels[y * w + x - 1], &mut parent);
            }
            if y > 0 {
                let up = (y - 1) * w;
                if x > 0 {
                    consider(labels[up + x - 1], &mut parent);
                }
                consider(labels[up + x], &mut parent);
                if x + 1 < w {
                    consider(labels[up + x + 1], &mut parent);
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[y * w + x] = current;
        }
    }

    // Compact roots in raster order of first appearance.
    let mut compact = vec![0u32; parent.len()];
    let mut count = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if compact[root] == 0 {
            count += 1;
            compact[root] = count;
        }
        *l = compact[root];
    }
    (labels, count as usize)
}

/// Moore-neighbour border following around the component `label`.
///
/// `start` must be the component's first pixel in raster order, so its west
/// neighbour is background. Tracing stops when the walk is back at `start`
/// and about to repeat its first move.
fn trace_outer(labels: &[u32], w: usize, h: usize, label: u32, start: PixelCoord) -> Vec<PixelCoord> {
    let inside = |p: PixelCoord, d: usize| -> Option<PixelCoord> {
        let (dx, dy) = DIRS[d];
        let x = p.x.checked_add_signed(dx)?;
        let y = p.y.checked_add_signed(dy)?;
        (x < w && y < h && labels[y * w + x] == label).then_some(PixelCoord::new(x, y))
    };
    // From `p` with background neighbour in direction `back`, sweep clockwise
    // to the first component pixel; the new backtrack is the last background
    // cell seen, expressed relative to the new pixel.
    let step = |p: PixelCoord, back: usize| -> Option<(PixelCoord, usize)> {
        (1..8).find_map(|i| {
            let d = (back + i) % 8;
            inside(p, d).map(|q| {
                let prev = DIRS[(back + i - 1) % 8];
                let cur = DIRS[d];
                (q, dir_index(prev.0 - cur.0, prev.1 - cur.1))
            })
        })
    };

    let mut boundary = vec![start];
    let Some((second, back)) = step(start, WEST) else {
        return boundary;
    };
    let (mut p, mut back) = (second, back);
    // Every (pixel, backtrack) state occurs at most once per lap.
    let limit = 8 * labels.iter().filter(|&&l| l == label).count() + 8;
    for _ in 0..limit {
        let (q, next_back) = step(p, back).expect("a pixel reached from a neighbour has a neighbour");
        if p == start && q == second {
            return boundary;
        }
        boundary.push(p);
        p = q;
        back = next_back;
    }
    unreachable!("outer border trace did not close");
}

/// Finds one outer contour per 8-connected foreground component whose area
/// is at least `min_area`.
pub fn find_contours(mask: &BinaryMask, min_area: usize) -> ContourSet {
    let (w, h) = (mask.width(), mask.height());
    let (labels, count) = label_components(mask);

    let mut regions: Vec<Vec<PixelCoord>> = vec![Vec::new(); count];
    for y in 0..h {
        for x in 0..w {
            let l = labels[y * w + x];
            if l != 0 {
                regions[l as usize - 1].push(PixelCoord::new(x, y));
            }
        }
    }

    let mut contours = Vec::new();
    let mut discarded_pixels = 0;
    for (i, region) in regions.into_iter().enumerate() {
        if region.len() < min_area {
            discarded_pixels += region.len();
            continue;
        }
        let boundary = trace_outer(&labels, w, h, i as u32 + 1, region[0]);
        contours.push(Contour {
            id: contours.len() + 1,
            boundary,
            region,
        });
    }
    ContourSet {
        width: w,
        height: h,
        contours,
        discarded_pixels,
    }
}
