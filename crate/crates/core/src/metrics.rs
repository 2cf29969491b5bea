//! Single-mask saliency metrics: MAE, the F-measure family, S-measure,
//! mean E-measure, and the composite match score used for pluralistic
//! matching.
//!
//! Binary-only metrics take a binary ground truth (`gt_bin`); callers holding
//! soft ground truth binarize it at 0.5 first, which [`match_score`] and
//! [`conventional_eval`] do internally.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{binarize, ImageRecord, SaliencyMap};

/// Threshold used to binarize soft ground truth for binary-only metrics.
pub const GT_BINARIZE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    /// F-measure β².
    pub beta2: f64,
    /// S-measure balance between object and region terms.
    pub s_alpha: f64,
    pub eps: f64,
    /// Strictly increasing thresholds in (0, 1) for F and E sweeps.
    pub thresholds: Vec<f64>,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            beta2: 0.3,
            s_alpha: 0.5,
            eps: 1e-8,
            thresholds: midpoint_thresholds(),
        }
    }
}

/// The 255 midpoints `(k - 0.5) / 255` for `k = 1..=255`.
pub fn midpoint_thresholds() -> Vec<f64> {
    (1..=255).map(|k| (f64::from(k) - 0.5) / 255.0).collect()
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.to_string()));
        if self.beta2.is_nan() || self.beta2 <= 0.0 {
            return bad("beta2 must be positive");
        }
        if !(0.0..=1.0).contains(&self.s_alpha) {
            return bad("s_alpha must lie in [0, 1]");
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return bad("eps must be positive");
        }
        if self.thresholds.is_empty() {
            return bad("threshold set is empty");
        }
        if self.thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return bad("thresholds must lie in (0, 1)");
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return bad("thresholds must be strictly increasing");
        }
        Ok(())
    }
}

/// Confusion counts of `binarize(pred, t) vs gt_bin` for every configured threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThresholdCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    /// Number of gt-positive pixels.
    pub positives: u64,
    pub total: u64,
}

impl ThresholdCounts {
    pub fn fn_at(&self, i: usize) -> u64 {
        self.positives - self.tp[i]
    }

    pub fn tn_at(&self, i: usize) -> u64 {
        self.total - self.positives - self.fp[i]
    }
}

/// Counts via two histograms over "number of thresholds strictly below the
/// pixel value", followed by suffix sums. O(N log T + T).
pub fn threshold_counts(pred: &SaliencyMap, gt_bin: &SaliencyMap, thresholds: &[f64]) -> Result<ThresholdCounts> {
    pred.ensure_same_shape(gt_bin)?;
    ensure_binary(gt_bin)?;
    let bins = thresholds.len() + 1;
    // interleaved histogram: [2 * bin] gt-negative, [2 * bin + 1] gt-positive
    let mut hist = vec![0u64; 2 * bins];
    let uniform = is_midpoint_grid(thresholds);
    for (&p, &g) in pred.values().iter().zip(gt_bin.values()) {
        // pixel is predicted positive at threshold i iff thresholds[i] < p iff i < bin
        let bin = if uniform {
            midpoint_bin(thresholds, p)
        } else {
            thresholds.partition_point(|&t| t < p)
        };
        hist[2 * bin + (g == 1.0) as usize] += 1;
    }
    let hist_pos: Vec<u64> = hist.iter().skip(1).step_by(2).copied().collect();
    let hist_neg: Vec<u64> = hist.iter().step_by(2).copied().collect();
    let mut tp = vec![0u64; thresholds.len()];
    let mut fp = vec![0u64; thresholds.len()];
    let (mut acc_pos, mut acc_neg) = (0u64, 0u64);
    for i in (0..thresholds.len()).rev() {
        acc_pos += hist_pos[i + 1];
        acc_neg += hist_neg[i + 1];
        tp[i] = acc_pos;
        fp[i] = acc_neg;
    }
    Ok(ThresholdCounts {
        tp,
        fp,
        positives: hist_pos.iter().sum(),
        total: pred.len() as u64,
    })
}

fn is_midpoint_grid(thresholds: &[f64]) -> bool {
    thresholds.len() == 255 && thresholds.iter().enumerate().all(|(i, &t)| t == (i as f64 + 0.5) / 255.0)
}

/// `partition_point(|t| t < p)` on the midpoint grid: an arithmetic guess
/// corrected against the actual thresholds.
fn midpoint_bin(thresholds: &[f64], p: f64) -> usize {
    let n = thresholds.len();
    let mut bin = ((p * 255.0 + 0.5) as usize).min(n);
    while bin > 0 && thresholds[bin - 1] >= p {
        bin -= 1;
    }
    while bin < n && thresholds[bin] < p {
        bin += 1;
    }
    bin
}

fn ensure_binary(gt_bin: &SaliencyMap) -> Result<()> {
    if gt_bin.is_binary() {
        Ok(())
    } else {
        Err(Error::InvalidArgument("ground truth must be binary".into()))
    }
}

/// Per-threshold precision, recall and Fβ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FCurve {
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f: Vec<f64>,
}

impl FCurve {
    pub fn from_counts(counts: &ThresholdCounts, beta2: f64) -> Result<Self> {
        if counts.positives == 0 {
            return Err(Error::EmptyGroundTruth);
        }
        let n = counts.tp.len();
        let mut curve = FCurve {
            precision: Vec::with_capacity(n),
            recall: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
        };
        for i in 0..n {
            let (tp, fp) = (counts.tp[i] as f64, counts.fp[i] as f64);
            let p = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let r = tp / counts.positives as f64;
            curve.precision.push(p);
            curve.recall.push(r);
            curve.f.push(f_beta(p, r, beta2));
        }
        Ok(curve)
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn mean(&self) -> f64 {
        f_mean(self)
    }

    pub fn max(&self) -> f64 {
        f_max(self)
    }
}

/// `(1 + β²)PR / (β²P + R)`, 0 when both are 0.
pub fn f_beta(precision: f64, recall: f64, beta2: f64) -> f64 {
    let denom = beta2 * precision + recall;
    if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta2) * precision * recall / denom
    }
}

pub fn f_curve(pred: &SaliencyMap, gt_bin: &SaliencyMap, cfg: &MetricConfig) -> Result<FCurve> {
    let counts = threshold_counts(pred, gt_bin, &cfg.thresholds)?;
    FCurve::from_counts(&counts, cfg.beta2)
}

pub fn f_mean(curve: &FCurve) -> f64 {
    curve.f.iter().sum::<f64>() / curve.f.len() as f64
}

pub fn f_max(curve: &FCurve) -> f64 {
    curve.f.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean absolute error on soft values.
pub fn mae(pred: &SaliencyMap, gt: &SaliencyMap) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let sum: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(p, g)| (p - g).abs())
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Structure measure `α·So + (1 − α)·Sr`.
pub fn s_measure(pred: &SaliencyMap, gt_bin: &SaliencyMap, cfg: &MetricConfig) -> Result<f64> {
    pred.ensure_same_shape(gt_bin)?;
    ensure_binary(gt_bin)?;
    let gt_mean = gt_bin.mean();
    if gt_mean == 0.0 {
        return Ok(1.0 - pred.mean());
    }
    if gt_mean == 1.0 {
        return Ok(pred.mean());
    }
    let alpha = cfg.s_alpha;
    let score = alpha * object_similarity(pred, gt_bin, gt_mean, cfg.eps)
        + (1.0 - alpha) * region_similarity(pred, gt_bin, cfg.eps);
    Ok(score.max(0.0))
}

fn object_similarity(pred: &SaliencyMap, gt: &SaliencyMap, gt_mean: f64, eps: f64) -> f64 {
    // g is exactly 0 or 1, so masking by multiplication is exact
    let (mut n_fg, mut sum_fg, mut sum_bg) = (0.0, 0.0, 0.0);
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        n_fg += g;
        sum_fg += p * g;
        sum_bg += (1.0 - p) * (1.0 - g);
    }
    let n_bg = pred.len() as f64 - n_fg;
    let (mean_fg, mean_bg) = (sum_fg / n_fg, sum_bg / n_bg);
    let (mut ss_fg, mut ss_bg) = (0.0, 0.0);
    for (&p, &g) in pred.values().iter().zip(gt.values()) {
        let (dp, dq) = (p - mean_fg, (1.0 - p) - mean_bg);
        ss_fg += g * dp * dp;
        ss_bg += (1.0 - g) * dq * dq;
    }
    let (n_fg, n_bg) = (n_fg as usize, n_bg as usize);
    gt_mean * object_score(mean_fg, sample_std(ss_fg, n_fg), eps)
        + (1.0 - gt_mean) * object_score(mean_bg, sample_std(ss_bg, n_bg), eps)
}

/// Standard deviation with the unbiased (n - 1) denominator; 0 below two samples.
fn sample_std(sum_sq: f64, n: usize) -> f64 {
    if n < 2 {
        0.0
    } else {
        (sum_sq / (n - 1) as f64).sqrt()
    }
}

fn object_score(mean: f64, std: f64, eps: f64) -> f64 {
    2.0 * mean / (mean * mean + 1.0 + std + eps)
}

/// Per-block first and second moments for the region term.
#[derive(Default, Clone, Copy)]
struct BlockStats {
    n: usize,
    fg: usize,
    sum_p: f64,
    sum_g: f64,
    var_p: f64,
    var_g: f64,
    cov: f64,
}

fn region_similarity(pred: &SaliencyMap, gt: &SaliencyMap, eps: f64) -> f64 {
    let w = gt.width();
    let (cx, cy) = foreground_split(gt);
    // block index: 0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right
    let mut blocks = [BlockStats::default(); 4];
    let segments = |y: usize| {
        let top = if y < cy { 0 } else { 2 };
        [(top, 0..cx), (top + 1, cx..w)]
    };
    let rows = pred.values().chunks_exact(w).zip(gt.values().chunks_exact(w));
    for (y, (prow, grow)) in rows.clone().enumerate() {
        for (b, range) in segments(y) {
            let st = &mut blocks[b];
            st.n += range.len();
            for x in range {
                st.sum_p += prow[x];
                st.sum_g += grow[x];
                st.fg += (grow[x] == 1.0) as usize;
            }
        }
    }
    let means: Vec<(f64, f64)> = blocks
        .iter()
        .map(|b| {
            if b.n == 0 {
                (0.0, 0.0)
            } else {
                (b.sum_p / b.n as f64, b.sum_g / b.n as f64)
            }
        })
        .collect();
    for (y, (prow, grow)) in rows.enumerate() {
        for (b, range) in segments(y) {
            let (mp, mg) = means[b];
            let st = &mut blocks[b];
            for x in range {
                let dp = prow[x] - mp;
                let dg = grow[x] - mg;
                st.var_p += dp * dp;
                st.var_g += dg * dg;
                st.cov += dp * dg;
            }
        }
    }
    let total_fg: usize = blocks.iter().map(|b| b.fg).sum();
    blocks
        .iter()
        .zip(&means)
        .filter(|(b, _)| b.fg > 0)
        .map(|(b, &(mp, mg))| b.fg as f64 / total_fg as f64 * block_similarity(b, mp, mg, eps))
        .sum()
}

/// Split point `(x, y)` one past the rounded foreground centroid, so that the
/// centroid row/column falls in the top/left blocks.
fn foreground_split(gt: &SaliencyMap) -> (usize, usize) {
    let (w, h) = (gt.width(), gt.height());
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
    for (y, row) in gt.values().chunks_exact(w).enumerate() {
        for (x, &g) in row.iter().enumerate() {
            sx += x as f64 * g;
            sy += y as f64 * g;
            n += g;
        }
    }
    debug_assert!(n > 0.0, "region split needs foreground");
    let (mx, my) = ((sx / n).round_ties_even(), (sy / n).round_ties_even());
    ((mx as usize + 1).min(w), (my as usize + 1).min(h))
}

fn block_similarity(b: &BlockStats, mp: f64, mg: f64, eps: f64) -> f64 {
    let dof = (b.n as f64 - 1.0).max(1.0);
    let (vp, vg, cov) = (b.var_p / dof, b.var_g / dof, b.cov / dof);
    let num = 4.0 * mp * mg * cov;
    let den = (mp * mp + mg * mg) * (vp + vg);
    // num <= den always; eps only guards an exactly zero denominator
    if num != 0.0 {
        num / if den > 0.0 { den } else { eps }
    } else if den == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Enhanced-alignment measure averaged over the configured thresholds.
///
/// Each binarized map falls into four pixel classes (TP/FN/FP/TN) whose
/// enhanced-alignment values are constant, so the per-threshold sum is
/// computed from the confusion counts. Results are clamped to `[0, 1]`; the
/// `W·H − 1` normalizer otherwise lets perfect maps exceed 1 slightly.
pub fn e_measure_mean(pred: &SaliencyMap, gt_bin: &SaliencyMap, cfg: &MetricConfig) -> Result<f64> {
    let counts = threshold_counts(pred, gt_bin, &cfg.thresholds)?;
    let n = counts.total as f64;
    let denom = n - 1.0 + cfg.eps;
    let gt_mean = counts.positives as f64 / n;
    let mut sum = 0.0;
    for i in 0..cfg.thresholds.len() {
        let pred_pos = (counts.tp[i] + counts.fp[i]) as f64;
        let enhanced_sum = if counts.positives == 0 {
            n - pred_pos
        } else if counts.positives == counts.total {
            pred_pos
        } else {
            let pred_mean = pred_pos / n;
            let cell = |g: f64, b: f64| {
                let (dg, db) = (g - gt_mean, b - pred_mean);
                // dg is never 0 here, so the denominator is positive
                let align = 2.0 * dg * db / (dg * dg + db * db);
                (align + 1.0).powi(2) / 4.0
            };
            counts.tp[i] as f64 * cell(1.0, 1.0)
                + counts.fn_at(i) as f64 * cell(1.0, 0.0)
                + counts.fp[i] as f64 * cell(0.0, 1.0)
                + counts.tn_at(i) as f64 * cell(0.0, 0.0)
        };
        sum += (enhanced_sum / denom).clamp(0.0, 1.0);
    }
    Ok(sum / cfg.thresholds.len() as f64)
}

/// Average of mean F-measure and S-measure against `gt` binarized at 0.5.
/// An empty binarized ground truth falls back to S-measure alone.
pub fn match_score(pred: &SaliencyMap, gt: &SaliencyMap, cfg: &MetricConfig) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    match_score_binary(pred, &binarize(gt, GT_BINARIZE_THRESHOLD), cfg)
}

pub(crate) fn match_score_binary(pred: &SaliencyMap, gt_bin: &SaliencyMap, cfg: &MetricConfig) -> Result<f64> {
    let s = s_measure(pred, gt_bin, cfg)?;
    match f_curve(pred, gt_bin, cfg) {
        Ok(curve) => Ok((f_mean(&curve) + s) / 2.0),
        Err(Error::EmptyGroundTruth) => Ok(s),
        Err(e) => Err(e),
    }
}

/// The six single-pair metrics reported by the `metrics` command.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub f_max: f64,
    pub f_avg: f64,
    pub s_measure: f64,
    pub e_mean: f64,
    pub mae: f64,
    #[serde(rename = "match")]
    pub match_score: f64,
}

impl MetricSet {
    pub const KEYS: [&'static str; 6] = ["f_max", "f_avg", "s_measure", "e_mean", "mae", "match"];

    pub fn compute(pred: &SaliencyMap, gt: &SaliencyMap, cfg: &MetricConfig) -> Result<Self> {
        pred.ensure_same_shape(gt)?;
        let gt_bin = binarize(gt, GT_BINARIZE_THRESHOLD);
        let curve = f_curve(pred, &gt_bin, cfg)?;
        let s = s_measure(pred, &gt_bin, cfg)?;
        Ok(Self {
            f_max: f_max(&curve),
            f_avg: f_mean(&curve),
            s_measure: s,
            e_mean: e_measure_mean(pred, &gt_bin, cfg)?,
            mae: mae(pred, gt)?,
            match_score: (f_mean(&curve) + s) / 2.0,
        })
    }

    pub fn values(&self) -> [f64; 6] {
        [
            self.f_max,
            self.f_avg,
            self.s_measure,
            self.e_mean,
            self.mae,
            self.match_score,
        ]
    }

    pub fn to_csv(&self) -> String {
        let vals: Vec<String> = self.values().iter().map(|v| format!("{v:.4}")).collect();
        format!("{}\n{}\n", Self::KEYS.join(","), vals.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalRow {
    pub id: String,
    pub f_max: f64,
    pub f_avg: f64,
    pub s_measure: f64,
    pub mae: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionalTable {
    pub rows: Vec<ConventionalRow>,
    pub mean: ConventionalRow,
}

impl ConventionalTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,f_max,f_avg,s_measure,mae\n");
        for row in self.rows.iter().chain(std::iter::once(&self.mean)) {
            let _ = writeln!(
                out,
                "{},{:.4},{:.4},{:.4},{:.4}",
                row.id, row.f_max, row.f_avg, row.s_measure, row.mae
            );
        }
        out
    }
}

/// Single-mask benchmark table: each record's first prediction against its
/// first ground truth, plus the dataset mean in a `MEAN` row.
pub fn conventional_eval(records: &[ImageRecord], cfg: &MetricConfig) -> Result<ConventionalTable> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records".into()));
    }
    let rows = records
        .par_iter()
        .map(|rec| {
            let pred = &rec.preds[0].mask;
            let gt = &rec.gts[0];
            let gt_bin = binarize(gt, GT_BINARIZE_THRESHOLD);
            let curve = f_curve(pred, &gt_bin, cfg)?;
            Ok(ConventionalRow {
                id: rec.id.clone(),
                f_max: f_max(&curve),
                f_avg: f_mean(&curve),
                s_measure: s_measure(pred, &gt_bin, cfg)?,
                mae: mae(pred, gt)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let mean = ConventionalRow {
        id: "MEAN".into(),
        f_max: rows.iter().map(|r| r.f_max).sum::<f64>() / n,
        f_avg: rows.iter().map(|r| r.f_avg).sum::<f64>() / n,
        s_measure: rows.iter().map(|r| r.s_measure).sum::<f64>() / n,
        mae: rows.iter().map(|r| r.mae).sum::<f64>() / n,
    };
    Ok(ConventionalTable { rows, mean })
}
