//! Evaluation toolkit for pluralistic salient object detection, where a model
//! emits several candidate masks per image and each image carries several
//! plausible ground truths.
//!
//! - [`mask`]: saliency maps, records, manifest I/O
//! - [`metrics`]: MAE, F-measure, S-measure, E-measure, match score
//! - [`pluralistic`]: best-match precision/recall, AP/AR/F1, quality filtering
//! - [`losses`]: cross-entropy, Dice, combined mask loss, min-loss selection
//! - [`preference`]: pairwise preference alignment accuracy
//! - [`synth`]: synthetic multi-ground-truth benchmarks

pub mod error;
pub mod losses;
pub mod mask;
pub mod metrics;
pub mod pluralistic;
pub mod preference;
pub mod synth;

pub use error::{Error, Result};
pub use losses::{LossBreakdown, LossConfig};
pub use mask::{binarize, load_manifest, load_mask, save_mask, ImageRecord, Manifest, Prediction, SaliencyMap};
pub use metrics::{MetricConfig, MetricSet};
pub use pluralistic::{evaluate, CurvePoint, EvalReport, MatchMatrix};
