//! Adaptive prompt generation for promptable segmenters.
//!
//! Class-activation heatmaps are thresholded, split into 8-connected
//! components, and turned into hybrid prompts: the tight bounding box of each
//! component plus its centroid as a positive point. A promptable segmenter
//! turns those prompts into pseudo-masks, which can then be scored against
//! ground truth with the usual pixel-wise metrics.
//!
//! The stages are exposed individually so they can be composed by hand:
//!
//! ```
//! use apg_core::binarize::{binarize, BinarizeConfig};
//! use apg_core::contour::find_contours;
//! use apg_core::prompt::{build_prompts, ContourPromptMode};
//! use apg_core::raster::Heatmap;
//!
//! let heatmap = Heatmap::new(4, 4, vec![
//!     0,   0,   0, 0,
//!     0, 200, 210, 0,
//!     0, 220, 255, 0,
//!     0,   0,   0, 0,
//! ]).unwrap();
//! let mask = binarize(&heatmap, BinarizeConfig::default());
//! let contours = find_contours(&mask, 0);
//! let prompts = build_prompts("demo", &contours, ContourPromptMode::PointBox, 4, 4);
//! assert_eq!(prompts.pairs.len(), 1);
//! ```

pub mod binarize;
pub mod contour;
pub mod geometry;
pub mod manifest;
pub mod metrics;
pub mod pipeline;
pub mod pnm;
pub mod prompt;
pub mod raster;
pub mod segmenter;
pub mod synth;
