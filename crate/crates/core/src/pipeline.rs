//! End-to-end pseudo-labeling driver and the analysis runs built on it.
//!
//! For every manifest sample with a positive image-level label:
//! binarize heatmap -> find contours -> build prompts -> segment -> write
//! `prompts/<id>.json` and `masks/<id>.pgm`. Negative samples are skipped
//! and produce no output unless `emit_negatives` is set. Per-image failures
//! are recorded in the report and never stop the batch.
//!
//! Output files depend only on the inputs and configuration; timings are
//! kept in memory and never written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use crate::binarize::{binarize, BinarizeConfig};
use crate::contour::find_contours;
use crate::manifest::{load_manifest, ImageSample, Manifest, ManifestError};
use crate::metrics::{self, aggregate, evaluate, MetricsReport};
use crate::pnm;
use crate::prompt::{build_grid_prompts, build_prompts, write_prompts, ContourPromptMode, GridConfig, PromptSet};
use crate::raster::BinaryMask;
use crate::segmenter::{Segmenter, SegmenterRequest};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("sample `{0}` has a positive label but no ground-truth mask")]
    MissingGroundTruth(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PromptStrategy {
    Contours(ContourPromptMode),
    Grid(GridConfig),
}

impl Default for PromptStrategy {
    fn default() -> Self {
        PromptStrategy::Contours(ContourPromptMode::PointBox)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    pub binarize: BinarizeConfig,
    /// Components smaller than this many pixels produce no prompt.
    pub min_area: usize,
    pub strategy: PromptStrategy,
    /// Write all-background masks for negative samples.
    pub emit_negatives: bool,
    pub evaluate: bool,
}

impl RunConfig {
    pub fn new(manifest: impl Into<PathBuf>, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            manifest: manifest.into(),
            out_dir: out_dir.into(),
            binarize: BinarizeConfig::default(),
            min_area: 0,
            strategy: PromptStrategy::default(),
            emit_negatives: false,
            evaluate: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ImageStatus {
    Processed,
    SkippedNegative,
    /// Positive sample whose heatmap yielded no prompt; its mask is empty.
    EmptyPrompts,
    BackendError(String),
    /// Unreadable or inconsistent input rasters.
    InputError(String),
}

impl ImageStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            ImageStatus::Processed => "processed",
            ImageStatus::SkippedNegative => "skipped-negative",
            ImageStatus::EmptyPrompts => "empty-prompts",
            ImageStatus::BackendError(_) => "backend-error",
            ImageStatus::InputError(_) => "input-error",
        }
    }

    pub fn is_failure(&self) -> bool {
        matches!(self, ImageStatus::BackendError(_) | ImageStatus::InputError(_))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StageTimings {
    pub load: Duration,
    pub binarize: Duration,
    pub contours: Duration,
    pub prompts: Duration,
    pub segment: Duration,
    pub write: Duration,
    pub evaluate: Duration,
}

impl std::ops::AddAssign for StageTimings {
    fn add_assign(&mut self, o: Self) {
        self.load += o.load;
        self.binarize += o.binarize;
        self.contours += o.contours;
        self.prompts += o.prompts;
        self.segment += o.segment;
        self.write += o.write;
        self.evaluate += o.evaluate;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub label: bool,
    pub status: ImageStatus,
    /// Number of prompt pairs issued.
    pub k: Option<usize>,
    /// Foreground pixels of the binarized heatmap.
    pub foreground_pixels: Option<usize>,
    pub metrics: Option<MetricsReport>,
    pub timings: StageTimings,
}

impl ImageRecord {
    fn new(sample: &ImageSample, status: ImageStatus) -> Self {
        Self {
            id: sample.id.clone(),
            label: sample.label,
            status,
            k: None,
            foreground_pixels: None,
            metrics: None,
            timings: StageTimings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// One record per manifest sample, in manifest order.
    pub records: Vec<ImageRecord>,
    /// Micro-averaged metrics over every evaluated image.
    pub total: Option<MetricsReport>,
    pub wall: Duration,
}

impl RunReport {
    pub fn count(&self, status: &str) -> usize {
        self.records.iter().filter(|r| r.status.as_str() == status).count()
    }

    pub fn has_failures(&self) -> bool {
        self.records.iter().any(|r| r.status.is_failure())
    }

    pub fn stage_totals(&self) -> StageTimings {
        let mut t = StageTimings::default();
        for r in &self.records {
            t += r.timings;
        }
        t
    }

    /// Mean prompt count over positive samples that reached prompting.
    pub fn mean_k(&self) -> f64 {
        let ks: Vec<usize> = self.records.iter().filter(|r| r.label).filter_map(|r| r.k).collect();
        if ks.is_empty() {
            0.0
        } else {
            ks.iter().sum::<usize>() as f64 / ks.len() as f64
        }
    }

    pub fn metric_rows(&self) -> Vec<(String, MetricsReport)> {
        self.records
            .iter()
            .filter_map(|r| r.metrics.map(|m| (r.id.clone(), m)))
            .collect()
    }

    pub fn status_csv(&self) -> String {
        let mut out = String::from("image_id,label,status,k,foreground_pixels,detail\n");
        for r in &self.records {
            let detail = match &r.status {
                ImageStatus::BackendError(d) | ImageStatus::InputError(d) => d.replace([',', '\n', '\r'], " "),
                _ => String::new(),
            };
            let opt = |v: Option<usize>| v.map(|n| n.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.id,
                u8::from(r.label),
                r.status.as_str(),
                opt(r.k),
                opt(r.foreground_pixels),
                detail
            );
        }
        out
    }
}

/// Filename stem for a sample id: anything outside `[A-Za-z0-9._-]` becomes `_`.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn prompt_path(out_dir: &Path, id: &str) -> PathBuf {
    out_dir.join("prompts").join(format!("{}.json", file_stem(id)))
}

pub fn mask_path(out_dir: &Path, id: &str) -> PathBuf {
    out_dir.join("masks").join(format!("{}.pgm", file_stem(id)))
}

/// Prompts for one heatmap under `strategy`.
pub fn prompts_for(
    id: &str,
    heatmap: &crate::raster::Heatmap,
    binarize_cfg: BinarizeConfig,
    min_area: usize,
    strategy: PromptStrategy,
) -> (PromptSet, usize) {
    let mask = binarize(heatmap, binarize_cfg);
    let fg = mask.foreground_count();
    let (w, h) = (heatmap.width(), heatmap.height());
    let ps = match strategy {
        PromptStrategy::Contours(mode) => build_prompts(id, &find_contours(&mask, min_area), mode, w, h),
        PromptStrategy::Grid(g) => build_grid_prompts(id, g, w, h),
    };
    (ps, fg)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    segmenter: &'a dyn Segmenter,
    exclusive: Option<Mutex<()>>,
}

fn timed<T>(slot: &mut Duration, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot += start.elapsed();
    out
}

fn score(ctx: &Ctx<'_>, sample: &ImageSample, pred: &BinaryMask, rec: &mut ImageRecord) {
    if !ctx.cfg.evaluate {
        return;
    }
    let Some(gt_path) = &sample.gt_mask_path else {
        return;
    };
    let start = Instant::now();
    match pnm::read_mask(gt_path)
        .map_err(|e| e.to_string())
        .and_then(|gt| evaluate(pred, &gt).map_err(|e| e.to_string()))
    {
        Ok(m) => rec.metrics = Some(m),
        Err(e) => rec.status = ImageStatus::InputError(format!("ground truth: {e}")),
    }
    rec.timings.evaluate += start.elapsed();
}

fn process(ctx: &Ctx<'_>, sample: &ImageSample) -> ImageRecord {
    let out = &ctx.cfg.out_dir;
    if !sample.label {
        let mut rec = ImageRecord::new(sample, ImageStatus::SkippedNegative);
        if ctx.cfg.emit_negatives {
            match pnm::read_pgm(&sample.heatmap_path) {
                Ok(h) => {
                    let empty = BinaryMask::empty(h.width(), h.height()).expect("valid dims");
                    if let Err(e) = pnm::write_mask(&empty, mask_path(out, &sample.id)) {
                        rec.status = ImageStatus::InputError(e.to_string());
                        return rec;
                    }
                    score(ctx, sample, &empty, &mut rec);
                }
                Err(e) => rec.status = ImageStatus::InputError(format!("heatmap: {e}")),
            }
        }
        return rec;
    }

    let mut rec = ImageRecord::new(sample, ImageStatus::Processed);
    let mut t = StageTimings::default();
    let loaded = timed(&mut t.load, || {
        let heatmap = pnm::read_pgm(&sample.heatmap_path).map_err(|e| format!("heatmap: {e}"))?;
        let image = pnm::read_image(&sample.image_path).map_err(|e| format!("image: {e}"))?;
        if (image.width(), image.height()) != (heatmap.width(), heatmap.height()) {
            return Err(format!(
                "image is {}x{} but heatmap is {}x{}",
                image.width(),
                image.height(),
                heatmap.width(),
                heatmap.height()
            ));
        }
        Ok((heatmap, image))
    });
    let (heatmap, image) = match loaded {
        Ok(v) => v,
        Err(e) => {
            rec.status = ImageStatus::InputError(e);
            rec.timings = t;
            return rec;
        }
    };

    let (w, h) = (heatmap.width(), heatmap.height());
    let mask = timed(&mut t.binarize, || binarize(&heatmap, ctx.cfg.binarize));
    rec.foreground_pixels = Some(mask.foreground_count());
    let prompts = match ctx.cfg.strategy {
        PromptStrategy::Contours(mode) => {
            let contours = timed(&mut t.contours, || find_contours(&mask, ctx.cfg.min_area));
            timed(&mut t.prompts, || build_prompts(&sample.id, &contours, mode, w, h))
        }
        PromptStrategy::Grid(g) => timed(&mut t.prompts, || build_grid_prompts(&sample.id, g, w, h)),
    };
    rec.k = Some(prompts.pairs.len());
    if prompts.is_empty() {
        rec.status = ImageStatus::EmptyPrompts;
    }

    if let Err(e) = timed(&mut t.write, || write_prompts(&prompts, prompt_path(out, &sample.id))) {
        rec.status = ImageStatus::InputError(e.to_string());
        rec.timings = t;
        return rec;
    }

    let request = SegmenterRequest {
        image: &image,
        prompts: &prompts,
    };
    let segmented = timed(&mut t.segment, || {
        let _guard = ctx
            .exclusive
            .as_ref()
            .map(|m| m.lock().unwrap_or_else(|p| p.into_inner()));
        ctx.segmenter.segment(&request)
    });
    let pseudo = match segmented {
        Ok(m) => m,
        Err(e) => {
            log::warn!("{}: {e}", sample.id);
            rec.status = ImageStatus::BackendError(e.to_string());
            rec.timings = t;
            return rec;
        }
    };
    if let Err(e) = timed(&mut t.write, || pnm::write_mask(&pseudo, mask_path(out, &sample.id))) {
        rec.status = ImageStatus::InputError(e.to_string());
        rec.timings = t;
        return rec;
    }
    rec.timings = t;
    score(ctx, sample, &pseudo, &mut rec);
    rec
}

/// Runs the pipeline over an already-loaded manifest.
pub fn run_manifest(
    cfg: &RunConfig,
    manifest: &Manifest,
    segmenter: &dyn Segmenter,
) -> Result<RunReport, PipelineError> {
    let start = Instant::now();
    for sub in ["prompts", "masks"] {
        let dir = cfg.out_dir.join(sub);
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    let ctx = Ctx {
        cfg,
        segmenter,
        exclusive: segmenter.exclusive().then(|| Mutex::new(())),
    };
    let records: Vec<ImageRecord> = manifest.samples.par_iter().map(|s| process(&ctx, s)).collect();
    let total = aggregate(records.iter().filter_map(|r| r.metrics.as_ref())).ok();
    let report = RunReport {
        records,
        total,
        wall: start.elapsed(),
    };

    let status_path = cfg.out_dir.join("report.csv");
    fs::write(&status_path, report.status_csv()).map_err(io_err(&status_path))?;
    if cfg.evaluate {
        let metrics_path = cfg.out_dir.join("metrics.csv");
        fs::write(&metrics_path, metrics::report_csv(&report.metric_rows())).map_err(io_err(&metrics_path))?;
    }
    Ok(report)
}

pub fn run_pipeline(cfg: &RunConfig, segmenter: &dyn Segmenter) -> Result<RunReport, PipelineError> {
    let manifest = load_manifest(&cfg.manifest)?;
    run_manifest(cfg, &manifest, segmenter)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub threshold: u8,
    pub iou: f64,
    pub f1: f64,
    pub mean_k: f64,
    pub report: RunReport,
}

pub const SWEEP_HEADER: &str = "threshold,iou,f1,mean_k";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.4}", r.threshold, r.iou, r.f1, r.mean_k);
    }
    out
}

fn require_ground_truth(manifest: &Manifest) -> Result<(), PipelineError> {
    match manifest.samples.iter().find(|s| s.label && s.gt_mask_path.is_none()) {
        Some(s) => Err(PipelineError::MissingGroundTruth(s.id.clone())),
        None => Ok(()),
    }
}

/// Full pipeline once per threshold, each under `<out>/sweep/t<T>`;
/// writes `<out>/sweep.csv`.
pub fn sweep_threshold(
    cfg: &RunConfig,
    thresholds: &[u8],
    segmenter: &dyn Segmenter,
) -> Result<Vec<SweepRow>, PipelineError> {
    let manifest = load_manifest(&cfg.manifest)?;
    require_ground_truth(&manifest)?;
    let mut rows = Vec::with_capacity(thresholds.len());
    for &t in thresholds {
        let run_cfg = RunConfig {
            out_dir: cfg.out_dir.join("sweep").join(format!("t{t:03}")),
            binarize: BinarizeConfig { threshold: t },
            evaluate: true,
            ..cfg.clone()
        };
        let report = run_manifest(&run_cfg, &manifest, segmenter)?;
        let (iou, f1) = report.total.map_or((0.0, 0.0), |m| (m.iou, m.f1));
        rows.push(SweepRow {
            threshold: t,
            iou,
            f1,
            mean_k: report.mean_k(),
            report,
        });
    }
    let path = cfg.out_dir.join("sweep.csv");
    fs::write(&path, sweep_csv(&rows)).map_err(io_err(&path))?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ablation {
    /// Point+box, box-only, point-only, in that order.
    pub runs: Vec<(ContourPromptMode, RunReport)>,
}

impl Ablation {
    /// Whether every mode issued the same number of prompts per image.
    pub fn same_k_per_image(&self) -> bool {
        let ks = |r: &RunReport| r.records.iter().map(|x| x.k).collect::<Vec<_>>();
        self.runs.windows(2).all(|w| ks(&w[0].1) == ks(&w[1].1))
    }

    pub fn iou(&self, mode: ContourPromptMode) -> Option<f64> {
        self.runs
            .iter()
            .find(|(m, _)| *m == mode)
            .and_then(|(_, r)| r.total.map(|t| t.iou))
    }

    pub fn table_csv(&self) -> String {
        let mut out = String::from("prompts,oa,precision,recall,f1,iou\n");
        for (mode, report) in &self.runs {
            let m = report.total.unwrap_or_else(|| MetricsReport::from_counts(0, 0, 0, 0));
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6}",
                crate::prompt::PromptMode::from(*mode),
                m.oa,
                m.precision,
                m.recall,
                m.f1,
                m.iou
            );
        }
        out
    }
}

/// Runs the three contour prompt combinations with otherwise identical
/// settings, each under `<out>/ablation/<mode>`; writes `<out>/ablation.csv`.
pub fn ablate_prompts(cfg: &RunConfig, segmenter: &dyn Segmenter) -> Result<Ablation, PipelineError> {
    let manifest = load_manifest(&cfg.manifest)?;
    let mut runs = Vec::with_capacity(3);
    for mode in ContourPromptMode::ABLATION_ORDER {
        let run_cfg = RunConfig {
            out_dir: cfg
                .out_dir
                .join("ablation")
                .join(crate::prompt::PromptMode::from(mode).as_str()),
            strategy: PromptStrategy::Contours(mode),
            ..cfg.clone()
        };
        runs.push((mode, run_manifest(&run_cfg, &manifest, segmenter)?));
    }
    let ablation = Ablation { runs };
    let path = cfg.out_dir.join("ablation.csv");
    fs::write(&path, ablation.table_csv()).map_err(io_err(&path))?;
    Ok(ablation)
}

/// Per-sample outcome of [`evaluate_outputs`]: metrics, or why scoring failed.
pub type EvalRow = (String, Result<MetricsReport, String>);

/// Scores existing `<out>/masks/<id>.pgm` files against the manifest's
/// ground truth; writes `<out>/metrics.csv`. Samples without a mask or
/// ground truth are left out.
pub fn evaluate_outputs(manifest_path: &Path, out_dir: &Path) -> Result<Vec<EvalRow>, PipelineError> {
    let manifest = load_manifest(manifest_path)?;
    let rows: Vec<EvalRow> = manifest
        .samples
        .par_iter()
        .filter_map(|s| {
            let gt_path = s.gt_mask_path.as_ref()?;
            let pred_path = mask_path(out_dir, &s.id);
            if !pred_path.exists() {
                return None;
            }
            let result = pnm::read_mask(&pred_path)
                .and_then(|p| pnm::read_mask(gt_path).map(|g| (p, g)))
                .map_err(|e| e.to_string())
                .and_then(|(p, g)| evaluate(&p, &g).map_err(|e| e.to_string()));
            Some((s.id.clone(), result))
        })
        .collect();
    let ok: Vec<(String, MetricsReport)> = rows
        .iter()
        .filter_map(|(id, r)| r.as_ref().ok().map(|m| (id.clone(), *m)))
        .collect();
    let path = out_dir.join("metrics.csv");
    fs::write(&path, metrics::report_csv(&ok)).map_err(io_err(&path))?;
    Ok(rows)
}
