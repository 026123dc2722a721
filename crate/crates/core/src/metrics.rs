//! Pixel-wise binary segmentation metrics.
//!
//! Foreground is the positive class. A ratio whose denominator is zero is
//! reported as 0 and flagged degenerate.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::raster::{BinaryMask, RasterError};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error(transparent)]
    Dimensions(#[from] RasterError),
    #[error("cannot aggregate an empty list of reports")]
    Empty,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Which ratios hit a zero denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub f1: bool,
    pub iou: bool,
}

impl Degenerate {
    pub fn any(&self) -> bool {
        self.precision || self.recall || self.f1 || self.iou
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
    pub oa: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iou: f64,
    pub degenerate: Degenerate,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

impl MetricsReport {
    pub fn from_counts(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        let (oa, _) = ratio(tp + tn, tp + fp + fn_ + tn);
        let (precision, dp) = ratio(tp, tp + fp);
        let (recall, dr) = ratio(tp, tp + fn_);
        let (iou, di) = ratio(tp, tp + fp + fn_);
        let (f1, df) = if precision + recall > 0.0 {
            (2.0 * precision * recall / (precision + recall), false)
        } else {
            (0.0, true)
        };
        Self {
            tp,
            fp,
            fn_,
            tn,
            oa,
            precision,
            recall,
            f1,
            iou,
            degenerate: Degenerate {
                precision: dp,
                recall: dr,
                f1: df,
                iou: di,
            },
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }
}

pub fn evaluate(pred: &BinaryMask, gt: &BinaryMask) -> Result<MetricsReport, MetricsError> {
    pred.same_dims(gt)?;
    let mut counts = [0u64; 4];
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        // index: bit 1 = predicted, bit 0 = actual
        counts[usize::from(p != 0) << 1 | usize::from(g != 0)] += 1;
    }
    let [tn, fn_, fp, tp] = counts;
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn))
}

/// Micro-average: sums the confusion counts, then recomputes the ratios.
pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a MetricsReport>) -> Result<MetricsReport, MetricsError> {
    let mut it = reports.into_iter().peekable();
    it.peek().ok_or(MetricsError::Empty)?;
    let (tp, fp, fn_, tn) = it.fold((0, 0, 0, 0), |(tp, fp, fn_, tn), r| {
        (tp + r.tp, fp + r.fp, fn_ + r.fn_, tn + r.tn)
    });
    Ok(MetricsReport::from_counts(tp, fp, fn_, tn))
}

pub const REPORT_HEADER: &str = "image_id,tp,fp,fn,tn,oa,precision,recall,f1,iou";
pub const TOTAL_ROW: &str = "__total__";

fn csv_row(out: &mut String, id: &str, r: &MetricsReport) {
    let _ = writeln!(
        out,
        "{id},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
        r.tp, r.fp, r.fn_, r.tn, r.oa, r.precision, r.recall, r.f1, r.iou
    );
}

/// Per-image rows followed by the `__total__` micro-average row (omitted
/// when there are no rows).
pub fn report_csv(rows: &[(String, MetricsReport)]) -> String {
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for (id, r) in rows {
        csv_row(&mut out, id, r);
    }
    if let Ok(total) = aggregate(rows.iter().map(|(_, r)| r)) {
        csv_row(&mut out, TOTAL_ROW, &total);
    }
    out
}

pub fn write_report_csv(rows: &[(String, MetricsReport)], path: impl AsRef<Path>) -> Result<(), MetricsError> {
    let path = path.as_ref();
    fs::write(path, report_csv(rows)).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One-line human summary in percent with two decimals.
pub fn summary_line(r: &MetricsReport) -> String {
    format!(
        "OA {:.2}  Precision {:.2}  Recall {:.2}  F1 {:.2}  IoU {:.2}",
        r.oa * 100.0,
        r.precision * 100.0,
        r.recall * 100.0,
        r.f1 * 100.0,
        r.iou * 100.0
    )
}
