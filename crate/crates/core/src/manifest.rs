//! Dataset manifest: one row per sample with its image-level label.
//!
//! CSV with the fixed header `id,image,heatmap,label,gt_mask`. Paths are
//! resolved relative to the directory holding the manifest. `gt_mask` may be
//! empty.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const HEADER: [&str; 5] = ["id", "image", "heatmap", "label", "gt_mask"];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: label `{value}` is not 0 or 1")]
    LabelOutOfRange { line: u64, value: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: u64, id: String },
    #[error("line {line}: empty value in required column `{column}`")]
    EmptyField { line: u64, column: &'static str },
}

/// One training sample `(X_i, Y_i)` with its heatmap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageSample {
    pub id: String,
    pub image_path: PathBuf,
    pub heatmap_path: PathBuf,
    /// Image-level label: `true` when the target class is present.
    pub label: bool,
    pub gt_mask_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub samples: Vec<ImageSample>,
}

impl Manifest {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn resolve(base: &Path, raw: &str) -> PathBuf {
    let p = Path::new(raw);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Parses manifest text; relative paths are joined onto `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<Manifest, ManifestError> {
    if text.trim().is_empty() {
        return Ok(Manifest::default());
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    let mut cols = [0usize; 5];
    for (slot, name) in cols.iter_mut().zip(HEADER) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or(ManifestError::MissingColumn(name))?;
    }
    let [c_id, c_image, c_heatmap, c_label, c_gt] = cols;

    let mut seen = HashSet::new();
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |col: usize| record.get(col).unwrap_or("");
        let required = |col: usize, column: &'static str| {
            let v = field(col);
            if v.is_empty() {
                Err(ManifestError::EmptyField { line, column })
            } else {
                Ok(v)
            }
        };
        let id = required(c_id, "id")?.to_string();
        let image = required(c_image, "image")?;
        let heatmap = required(c_heatmap, "heatmap")?;
        let label = match field(c_label) {
            "0" => false,
            "1" => true,
            other => {
                return Err(ManifestError::LabelOutOfRange {
                    line,
                    value: other.to_string(),
                })
            }
        };
        let gt = field(c_gt);
        if !seen.insert(id.clone()) {
            return Err(ManifestError::DuplicateId { line, id });
        }
        samples.push(ImageSample {
            image_path: resolve(base, image),
            heatmap_path: resolve(base, heatmap),
            label,
            gt_mask_path: (!gt.is_empty()).then(|| resolve(base, gt)),
            id,
        });
    }
    Ok(Manifest { samples })
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<Manifest, ManifestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, base)
}

/// Writes a manifest; paths under `base` are stored relative to it.
pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>, base: &Path) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let rel = |p: &Path| -> String { p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/") };
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(HEADER)?;
    for s in &manifest.samples {
        writer.write_record([
            s.id.as_str(),
            &rel(&s.image_path),
            &rel(&s.heatmap_path),
            if s.label { "1" } else { "0" },
            &s.gt_mask_path.as_deref().map(rel).unwrap_or_default(),
        ])?;
    }
    let bytes = writer.into_inner().map_err(|e| ManifestError::Io {
        path: path.to_path_buf(),
        source: e.into_error(),
    })?;
    fs::write(path, bytes).map_err(|source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    })
}
