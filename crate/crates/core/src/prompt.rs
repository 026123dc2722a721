//! Per-image prompt sets and their JSON interchange format.
//!
//! A prompt set pairs each contour's bounding box with its centroid point.
//! The interchange file is the contract with external segmenter bridges:
//!
//! ```json
//! {"schema":"apg/1","image_id":"s0001","width":256,"height":256,
//!  "mode":"point+box","convention":"xywh",
//!  "pairs":[{"k":1,"box":[10,12,30,25],"point":[24.5,23.75],"label":1}]}
//! ```
//!
//! Boxes are `[x0, y0, w, h]`; a bridge that needs corner form must use
//! `[x0, y0, x0 + w, y0 + h]`.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::contour::ContourSet;
use crate::geometry::{bounding_rect, centroid, moments, BoundingBox, PointPrompt};

pub const SCHEMA: &str = "apg/1";
pub const CONVENTION: &str = "xywh";

/// Which prompts a set carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PromptMode {
    PointBox,
    BoxOnly,
    PointOnly,
    /// Uniform N x N point lattice, independent of the heatmap.
    Grid,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::PointBox => "point+box",
            PromptMode::BoxOnly => "box-only",
            PromptMode::PointOnly => "point-only",
            PromptMode::Grid => "grid",
        }
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point+box" => Ok(PromptMode::PointBox),
            "box-only" | "box" => Ok(PromptMode::BoxOnly),
            "point-only" | "point" => Ok(PromptMode::PointOnly),
            "grid" => Ok(PromptMode::Grid),
            other => Err(format!(
                "unknown prompt mode `{other}` (expected point+box, box-only, point-only or grid)"
            )),
        }
    }
}

/// The contour-derived subset of [`PromptMode`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContourPromptMode {
    PointBox,
    BoxOnly,
    PointOnly,
}

impl ContourPromptMode {
    /// Row order of the prompt-combination ablation table.
    pub const ABLATION_ORDER: [ContourPromptMode; 3] = [
        ContourPromptMode::PointBox,
        ContourPromptMode::BoxOnly,
        ContourPromptMode::PointOnly,
    ];

    fn uses_box(self) -> bool {
        !matches!(self, ContourPromptMode::PointOnly)
    }

    fn uses_point(self) -> bool {
        !matches!(self, ContourPromptMode::BoxOnly)
    }
}

impl From<ContourPromptMode> for PromptMode {
    fn from(m: ContourPromptMode) -> Self {
        match m {
            ContourPromptMode::PointBox => PromptMode::PointBox,
            ContourPromptMode::BoxOnly => PromptMode::BoxOnly,
            ContourPromptMode::PointOnly => PromptMode::PointOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptPair {
    /// Source contour id (or lattice index in grid mode), 1-based.
    pub k: usize,
    pub bbox: Option<BoundingBox>,
    pub point: Option<PointPrompt>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub mode: PromptMode,
    pub pairs: Vec<PromptPair>,
}

impl PromptSet {
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// One pair per contour: its tight box and/or its region centroid.
pub fn build_prompts(
    image_id: &str,
    contours: &ContourSet,
    mode: ContourPromptMode,
    width: usize,
    height: usize,
) -> PromptSet {
    let pairs = contours
        .contours
        .iter()
        .map(|c| PromptPair {
            k: c.id,
            bbox: if mode.uses_box() {
                bounding_rect(&c.region).ok()
            } else {
                None
            },
            point: if mode.uses_point() {
                centroid(&moments(&c.region))
            } else {
                None
            },
        })
        .collect();
    PromptSet {
        image_id: image_id.to_string(),
        width,
        height,
        mode: mode.into(),
        pairs,
    }
}

pub const DEFAULT_GRID_N: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    /// Points per image edge.
    pub n: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { n: DEFAULT_GRID_N }
    }
}

/// `n x n` positive points at uniform cell centers,
/// `x_i = (i + 0.5) * W / n - 0.5`, row-major.
///
/// When `n` exceeds an image edge the outer cell centers fall off the pixel
/// grid; they are clamped to `[0, W - 1]`.
pub fn build_grid_prompts(image_id: &str, cfg: GridConfig, width: usize, height: usize) -> PromptSet {
    assert!(cfg.n >= 1, "grid needs at least one point per edge");
    let n = cfg.n;
    let coord =
        |i: usize, extent: usize| ((i as f64 + 0.5) * extent as f64 / n as f64 - 0.5).clamp(0.0, (extent - 1) as f64);
    let mut pairs = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            pairs.push(PromptPair {
                k: pairs.len() + 1,
                bbox: None,
                point: Some(PointPrompt::positive(coord(i, width), coord(j, height))),
            });
        }
    }
    PromptSet {
        image_id: image_id.to_string(),
        width,
        height,
        mode: PromptMode::Grid,
        pairs,
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema violation at `{path}`: {reason}")]
    Schema { path: String, reason: String },
}

fn schema_err(path: impl Into<String>, reason: impl Into<String>) -> PromptError {
    PromptError::Schema {
        path: path.into(),
        reason: reason.into(),
    }
}

pub fn to_json(ps: &PromptSet) -> Value {
    let pairs: Vec<Value> = ps
        .pairs
        .iter()
        .map(|p| {
            json!({
                "k": p.k,
                "box": p.bbox.map(|b| json!([b.x0, b.y0, b.w, b.h])),
                "point": p.point.map(|pt| json!([pt.cx, pt.cy])),
                "label": 1,
            })
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "image_id": ps.image_id,
        "width": ps.width,
        "height": ps.height,
        "mode": ps.mode.as_str(),
        "convention": CONVENTION,
        "pairs": pairs,
    })
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str, path: &str) -> Result<&'a Value, PromptError> {
    obj.get(name)
        .ok_or_else(|| schema_err(format!("{path}{name}"), "missing"))
}

fn as_uint(v: &Value, path: &str) -> Result<usize, PromptError> {
    v.as_u64()
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| schema_err(path, "expected a non-negative integer"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str, PromptError> {
    v.as_str().ok_or_else(|| schema_err(path, "expected a string"))
}

fn as_array<'a>(v: &'a Value, path: &str, len: Option<usize>) -> Result<&'a Vec<Value>, PromptError> {
    let a = v.as_array().ok_or_else(|| schema_err(path, "expected an array"))?;
    if let Some(n) = len {
        if a.len() != n {
            return Err(schema_err(path, format!("expected {n} elements, found {}", a.len())));
        }
    }
    Ok(a)
}

/// Parses and validates an interchange document.
pub fn from_json(doc: &Value) -> Result<PromptSet, PromptError> {
    let root = doc.as_object().ok_or_else(|| schema_err("$", "expected an object"))?;
    let schema = as_str(field(root, "schema", "")?, "schema")?;
    if schema != SCHEMA {
        return Err(schema_err(
            "schema",
            format!("unsupported `{schema}`, expected `{SCHEMA}`"),
        ));
    }
    let image_id = as_str(field(root, "image_id", "")?, "image_id")?.to_string();
    let width = as_uint(field(root, "width", "")?, "width")?;
    let height = as_uint(field(root, "height", "")?, "height")?;
    if width == 0 || height == 0 {
        return Err(schema_err("width", "image dimensions must be at least 1x1"));
    }
    let mode: PromptMode = as_str(field(root, "mode", "")?, "mode")?
        .parse()
        .map_err(|e: String| schema_err("mode", e))?;
    let convention = as_str(field(root, "convention", "")?, "convention")?;
    if convention != CONVENTION {
        return Err(schema_err("convention", format!("expected `{CONVENTION}`")));
    }

    let raw_pairs = as_array(field(root, "pairs", "")?, "pairs", None)?;
    let mut pairs = Vec::with_capacity(raw_pairs.len());
    for (i, raw) in raw_pairs.iter().enumerate() {
        let at = format!("pairs[{i}].");
        let obj = raw
            .as_object()
            .ok_or_else(|| schema_err(format!("pairs[{i}]"), "expected an object"))?;
        let k = as_uint(field(obj, "k", &at)?, &format!("{at}k"))?;
        let label = field(obj, "label", &at)?;
        if label.as_i64() != Some(1) {
            return Err(schema_err(
                format!("{at}label"),
                "only positive (1) labels are supported",
            ));
        }

        let box_path = format!("{at}box");
        let bbox = match field(obj, "box", &at)? {
            Value::Null => None,
            v => {
                let a = as_array(v, &box_path, Some(4))?;
                let mut xywh = [0usize; 4];
                for (j, slot) in xywh.iter_mut().enumerate() {
                    *slot = as_uint(&a[j], &format!("{box_path}[{j}]"))?;
                }
                let b = BoundingBox::new(xywh[0], xywh[1], xywh[2], xywh[3]);
                if !b.fits(width, height) {
                    return Err(schema_err(
                        box_path,
                        format!("box {xywh:?} outside {width}x{height} image"),
                    ));
                }
                Some(b)
            }
        };

        let point_path = format!("{at}point");
        let point = match field(obj, "point", &at)? {
            Value::Null => None,
            v => {
                let a = as_array(v, &point_path, Some(2))?;
                let coord = |j: usize| {
                    a[j].as_f64()
                        .ok_or_else(|| schema_err(format!("{point_path}[{j}]"), "expected a number"))
                };
                let (cx, cy) = (coord(0)?, coord(1)?);
                let inside = (0.0..=(width - 1) as f64).contains(&cx) && (0.0..=(height - 1) as f64).contains(&cy);
                if !inside {
                    return Err(schema_err(
                        point_path,
                        format!("point ({cx}, {cy}) outside {width}x{height} image"),
                    ));
                }
                if let Some(b) = bbox {
                    if !b.contains_point(cx, cy) {
                        return Err(schema_err(point_path, "point lies outside its box"));
                    }
                }
                Some(PointPrompt::positive(cx, cy))
            }
        };

        match mode {
            PromptMode::BoxOnly if point.is_some() => {
                return Err(schema_err(point_path, "box-only sets carry no points"))
            }
            PromptMode::BoxOnly if bbox.is_none() => return Err(schema_err(box_path, "box-only pairs need a box")),
            PromptMode::PointOnly | PromptMode::Grid if bbox.is_some() => {
                return Err(schema_err(box_path, format!("{mode} sets carry no boxes")))
            }
            PromptMode::PointOnly | PromptMode::Grid if point.is_none() => {
                return Err(schema_err(point_path, format!("{mode} pairs need a point")))
            }
            PromptMode::PointBox if bbox.is_none() => return Err(schema_err(box_path, "point+box pairs need a box")),
            _ => {}
        }
        pairs.push(PromptPair { k, bbox, point });
    }

    Ok(PromptSet {
        image_id,
        width,
        height,
        mode,
        pairs,
    })
}

pub fn parse_prompts(text: &str) -> Result<PromptSet, PromptError> {
    from_json(&serde_json::from_str(text)?)
}

pub fn write_prompts(ps: &PromptSet, path: impl AsRef<Path>) -> Result<(), PromptError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(&to_json(ps))?;
    text.push('\n');
    fs::write(path, text).map_err(|source| PromptError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_prompts(path: impl AsRef<Path>) -> Result<PromptSet, PromptError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PromptError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_prompts(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::find_contours;
    use crate::raster::BinaryMask;
    use proptest::prelude::*;

    fn square_contours() -> ContourSet {
        let mut m = BinaryMask::empty(6, 6).unwrap();
        for y in 1..4 {
            for x in 1..4 {
                m.set(x, y, true);
            }
        }
        find_contours(&m, 0)
    }

    #[test]
    fn no_contours_no_prompts() {
        let cs = find_contours(&BinaryMask::empty(4, 4).unwrap(), 0);
        let ps = build_prompts("a", &cs, ContourPromptMode::PointBox, 4, 4);
        assert!(ps.is_empty());
    }

    #[test]
    fn square_point_and_box() {
        let ps = build_prompts("a", &square_contours(), ContourPromptMode::PointBox, 6, 6);
        assert_eq!(ps.mode, PromptMode::PointBox);
        assert_eq!(
            ps.pairs,
            vec![PromptPair {
                k: 1,
                bbox: Some(BoundingBox::new(1, 1, 3, 3)),
                point: Some(PointPrompt::positive(2.0, 2.0)),
            }]
        );
    }

    #[test]
    fn square_box_only_and_point_only() {
        let b = build_prompts("a", &square_contours(), ContourPromptMode::BoxOnly, 6, 6);
        assert_eq!(b.pairs[0].bbox, Some(BoundingBox::new(1, 1, 3, 3)));
        assert_eq!(b.pairs[0].point, None);
        let p = build_prompts("a", &square_contours(), ContourPromptMode::PointOnly, 6, 6);
        assert_eq!(p.pairs[0].bbox, None);
        assert_eq!(p.pairs[0].point, Some(PointPrompt::positive(2.0, 2.0)));
    }

    #[test]
    fn grid_single_point_is_center() {
        let ps = build_grid_prompts("g", GridConfig { n: 1 }, 10, 10);
        assert_eq!(ps.pairs.len(), 1);
        assert_eq!(ps.pairs[0].point, Some(PointPrompt::positive(4.5, 4.5)));
    }

    #[test]
    fn grid_default_has_64_points() {
        let ps = build_grid_prompts("g", GridConfig::default(), 256, 256);
        assert_eq!(ps.pairs.len(), 64);
        assert!(ps.pairs.iter().all(|p| p.bbox.is_none()));
    }

    #[test]
    fn grid_two_by_two_on_4x4() {
        // cells span pixels 0..=1 and 2..=3; centers in pixel-index coordinates
        let ps = build_grid_prompts("g", GridConfig { n: 2 }, 4, 4);
        let got: Vec<_> = ps
            .pairs
            .iter()
            .map(|p| {
                let pt = p.point.unwrap();
                (pt.cx, pt.cy)
            })
            .collect();
        assert_eq!(got, vec![(0.5, 0.5), (2.5, 0.5), (0.5, 2.5), (2.5, 2.5)]);
    }

    #[test]
    fn grid_is_symmetric_under_transpose() {
        let ps = build_grid_prompts("g", GridConfig { n: 5 }, 37, 37);
        let mut a: Vec<_> = ps
            .pairs
            .iter()
            .map(|p| p.point.unwrap())
            .map(|p| (p.cx.to_bits(), p.cy.to_bits()))
            .collect();
        let mut b: Vec<_> = a.iter().map(|&(x, y)| (y, x)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_image_id_is_rejected() {
        let mut doc = to_json(&build_grid_prompts("g", GridConfig { n: 1 }, 4, 4));
        doc.as_object_mut().unwrap().remove("image_id");
        match from_json(&doc) {
            Err(PromptError::Schema { path, .. }) => assert_eq!(path, "image_id"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn point_outside_dims_is_rejected() {
        let text = r#"{"schema":"apg/1","image_id":"a","width":4,"height":4,"mode":"point-only",
            "convention":"xywh","pairs":[{"k":1,"box":null,"point":[4.5,1.0],"label":1}]}"#;
        match parse_prompts(text) {
            Err(PromptError::Schema { path, .. }) => assert_eq!(path, "pairs[0].point"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn box_outside_dims_and_bad_convention() {
        let text = r#"{"schema":"apg/1","image_id":"a","width":4,"height":4,"mode":"box-only",
            "convention":"xywh","pairs":[{"k":1,"box":[2,0,3,1],"point":null,"label":1}]}"#;
        assert!(matches!(parse_prompts(text), Err(PromptError::Schema { path, .. }) if path == "pairs[0].box"));
        let text = text.replace("xywh", "xyxy").replace("[2,0,3,1]", "[0,0,1,1]");
        assert!(matches!(parse_prompts(&text), Err(PromptError::Schema { path, .. }) if path == "convention"));
    }

    #[test]
    fn wrong_schema_version() {
        let mut doc = to_json(&build_grid_prompts("g", GridConfig { n: 1 }, 4, 4));
        doc["schema"] = json!("apg/2");
        assert!(matches!(from_json(&doc), Err(PromptError::Schema { path, .. }) if path == "schema"));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let ps = build_prompts("a", &square_contours(), ContourPromptMode::PointBox, 6, 6);
        write_prompts(&ps, &path).unwrap();
        assert_eq!(read_prompts(&path).unwrap(), ps);
    }

    fn prompt_set_strategy() -> impl Strategy<Value = PromptSet> {
        (1usize..300, 1usize..300)
            .prop_flat_map(|(w, h)| {
                let pair = (0..w, 0..h).prop_flat_map(move |(x0, y0)| {
                    (Just(x0), Just(y0), 1..=w - x0, 1..=h - y0, 0.0f64..=1.0, 0.0f64..=1.0)
                });
                (
                    Just(w),
                    Just(h),
                    proptest::collection::vec(pair, 0..6),
                    "[a-z0-9_]{1,8}",
                )
            })
            .prop_map(|(w, h, raw, id)| {
                let pairs = raw
                    .into_iter()
                    .enumerate()
                    .map(|(i, (x0, y0, bw, bh, fx, fy))| {
                        let b = BoundingBox::new(x0, y0, bw, bh);
                        PromptPair {
                            k: i + 1,
                            bbox: Some(b),
                            point: Some(PointPrompt::positive(
                                x0 as f64 + fx * (bw - 1) as f64,
                                y0 as f64 + fy * (bh - 1) as f64,
                            )),
                        }
                    })
                    .collect();
                PromptSet {
                    image_id: id,
                    width: w,
                    height: h,
                    mode: PromptMode::PointBox,
                    pairs,
                }
            })
    }

    proptest! {
        #[test]
        fn interchange_round_trip(ps in prompt_set_strategy()) {
            let text = serde_json::to_string(&to_json(&ps)).unwrap();
            prop_assert_eq!(parse_prompts(&text).unwrap(), ps);
        }
    }
}
