//! Best-match precision/recall between a set of predicted masks and a set of
//! ground-truth masks, dataset AP/AR/F1, quality-score filtering, threshold
//! sweeps and cross-method best-mask selection.
//!
//! Per image, precision averages each prediction's best match over the
//! ground truths and recall averages each ground truth's best match over the
//! predictions. AP and AR are unweighted means over images and F1 is their
//! harmonic mean.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{binarize, ImageRecord, Prediction};
use crate::metrics::{match_score_binary, MetricConfig, GT_BINARIZE_THRESHOLD};

/// `scores[k][j]` is the match score of prediction `k` against ground truth `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchMatrix {
    rows: Vec<Vec<f64>>,
}

impl MatchMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.is_empty() || cols == 0 {
            return Err(Error::InvalidArgument("match matrix needs K >= 1 and J >= 1".into()));
        }
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidArgument("ragged match matrix".into()));
        }
        if rows.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidArgument("match score outside [0, 1]".into()));
        }
        Ok(Self { rows })
    }

    pub fn n_preds(&self) -> usize {
        self.rows.len()
    }

    pub fn n_gts(&self) -> usize {
        self.rows[0].len()
    }

    pub fn get(&self, k: usize, j: usize) -> f64 {
        self.rows[k][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Sub-matrix keeping only the given prediction rows, in the given order.
    pub fn select_rows(&self, keep: &[usize]) -> MatchMatrix {
        assert!(!keep.is_empty(), "at least one row must be kept");
        MatchMatrix {
            rows: keep.iter().map(|&k| self.rows[k].clone()).collect(),
        }
    }

    /// Index of the best ground truth for prediction `k` (lowest index on ties).
    pub fn best_gt(&self, k: usize) -> usize {
        argmax(self.rows[k].iter().copied())
    }

    /// Index of the best prediction for ground truth `j` (lowest index on ties).
    pub fn best_pred(&self, j: usize) -> usize {
        argmax(self.rows.iter().map(|r| r[j]))
    }
}

/// First index of the maximum.
fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Match scores of every prediction in `rec` against every ground truth.
pub fn match_matrix(rec: &ImageRecord, cfg: &MetricConfig) -> Result<MatchMatrix> {
    let gt_bins: Vec<_> = rec
        .gts
        .iter()
        .map(|g| binarize(g, GT_BINARIZE_THRESHOLD))
        .collect();
    let rows = rec
        .preds
        .iter()
        .map(|p| {
            gt_bins
                .iter()
                .map(|g| match_score_binary(&p.mask, g, cfg))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MatchMatrix::new(rows)
}

pub fn image_precision(mm: &MatchMatrix) -> f64 {
    let sum: f64 = (0..mm.n_preds()).map(|k| mm.get(k, mm.best_gt(k))).sum();
    sum / mm.n_preds() as f64
}

pub fn image_recall(mm: &MatchMatrix) -> f64 {
    let sum: f64 = (0..mm.n_gts()).map(|j| mm.get(mm.best_pred(j), j)).sum();
    sum / mm.n_gts() as f64
}

/// Harmonic mean, 0 when both inputs are 0.
pub fn f1_harmonic(ap: f64, ar: f64) -> f64 {
    if ap + ar == 0.0 {
        0.0
    } else if ap == ar {
        ap
    } else {
        2.0 * ap * ar / (ap + ar)
    }
}

/// Indices of predictions kept at quality threshold `tau`.
///
/// Keeps every prediction scoring at least `tau`. When none does, the single
/// highest-scoring prediction is kept instead. `tau <= 0` keeps everything and
/// does not require scores.
pub fn kept_indices(preds: &[Prediction], id: &str, tau: f64) -> Result<Vec<usize>> {
    if preds.is_empty() {
        return Err(Error::InvalidRecord {
            id: id.to_string(),
            reason: "no predicted masks".into(),
        });
    }
    if tau <= 0.0 {
        return Ok((0..preds.len()).collect());
    }
    let scores = preds
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.quality_score.ok_or_else(|| Error::MissingScore {
                id: id.to_string(),
                index: i,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= tau).collect();
    if kept.is_empty() {
        Ok(vec![argmax(scores.iter().copied())])
    } else {
        Ok(kept)
    }
}

/// Copy of `rec` holding only the predictions kept at `tau`.
pub fn filter_by_quality(rec: &ImageRecord, tau: f64) -> Result<ImageRecord> {
    let kept = kept_indices(&rec.preds, &rec.id, tau)?;
    Ok(ImageRecord {
        id: rec.id.clone(),
        gts: rec.gts.clone(),
        preds: kept.iter().map(|&i| rec.preds[i].clone()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageScore {
    pub id: String,
    pub precision: f64,
    pub recall: f64,
    pub kept_pred_indices: Vec<usize>,
    /// True when no prediction reached the threshold and the top-1 was kept.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub threshold: f64,
    pub ap: f64,
    pub ar: f64,
    pub f1: f64,
    pub per_image: Vec<ImageScore>,
}

impl EvalReport {
    fn from_scores(threshold: f64, per_image: Vec<ImageScore>) -> Self {
        let n = per_image.len() as f64;
        let ap = per_image.iter().map(|s| s.precision).sum::<f64>() / n;
        let ar = per_image.iter().map(|s| s.recall).sum::<f64>() / n;
        Self {
            threshold,
            ap,
            ar,
            f1: f1_harmonic(ap, ar),
            per_image,
        }
    }

    pub fn point(&self) -> CurvePoint {
        CurvePoint {
            tau: self.threshold,
            ap: self.ap,
            ar: self.ar,
            f1: self.f1,
        }
    }

    /// One-row `tau,ap,ar,f1` summary.
    pub fn to_csv(&self) -> String {
        curve_csv(&[self.point()], None)
    }
}

fn used_fallback(preds: &[Prediction], kept: &[usize], tau: f64) -> bool {
    tau > 0.0 && kept.len() == 1 && preds[kept[0]].quality_score.is_some_and(|s| s < tau)
}

fn score_image(id: &str, mm: &MatchMatrix, preds: &[Prediction], tau: f64) -> Result<ImageScore> {
    let kept = kept_indices(preds, id, tau)?;
    let fallback = used_fallback(preds, &kept, tau);
    let sub = mm.select_rows(&kept);
    Ok(ImageScore {
        id: id.to_string(),
        precision: image_precision(&sub),
        recall: image_recall(&sub),
        kept_pred_indices: kept,
        fallback,
    })
}

/// Filters each record at `tau`, scores it, and aggregates in record order.
pub fn evaluate(records: &[ImageRecord], tau: f64, cfg: &MetricConfig) -> Result<EvalReport> {
    if records.is_empty() {
        return Err(Error::InvalidArgument("no records".into()));
    }
    let per_image = records
        .par_iter()
        .map(|rec| {
            let kept = kept_indices(&rec.preds, &rec.id, tau)?;
            let filtered = ImageRecord {
                id: rec.id.clone(),
                gts: rec.gts.clone(),
                preds: kept.iter().map(|&i| rec.preds[i].clone()).collect(),
            };
            let mm = match_matrix(&filtered, cfg)?;
            let fallback = used_fallback(&rec.preds, &kept, tau);
            Ok(ImageScore {
                id: rec.id.clone(),
                precision: image_precision(&mm),
                recall: image_recall(&mm),
                kept_pred_indices: kept,
                fallback,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::from_scores(tau, per_image))
}

/// Match matrices for all records, computed once, for repeated evaluation
/// at different quality thresholds.
#[derive(Debug, Clone)]
pub struct MatchCache<'a> {
    records: &'a [ImageRecord],
    matrices: Vec<MatchMatrix>,
}

impl<'a> MatchCache<'a> {
    pub fn build(records: &'a [ImageRecord], cfg: &MetricConfig) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::InvalidArgument("no records".into()));
        }
        let matrices = records
            .par_iter()
            .map(|r| match_matrix(r, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records, matrices })
    }

    pub fn matrices(&self) -> &[MatchMatrix] {
        &self.matrices
    }

    /// Same result as [`evaluate`] at `tau`, reusing the cached scores.
    pub fn evaluate(&self, tau: f64) -> Result<EvalReport> {
        let per_image = self
            .records
            .iter()
            .zip(&self.matrices)
            .map(|(rec, mm)| score_image(&rec.id, mm, &rec.preds, tau))
            .collect::<Result<Vec<_>>>()?;
        Ok(EvalReport::from_scores(tau, per_image))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub tau: f64,
    pub ap: f64,
    pub ar: f64,
    pub f1: f64,
}

/// The ten quality thresholds 0.0, 0.1, ..., 0.9.
pub fn default_taus() -> Vec<f64> {
    (0..10).map(|i| f64::from(i) / 10.0).collect()
}

/// One evaluation per threshold, in the given order.
pub fn pr_curve(records: &[ImageRecord], taus: &[f64], cfg: &MetricConfig) -> Result<Vec<CurvePoint>> {
    let cache = MatchCache::build(records, cfg)?;
    taus.iter().map(|&tau| cache.evaluate(tau).map(|r| r.point())).collect()
}

/// Sweep point with the highest F1 (lowest tau on ties). `None` for an empty curve.
pub fn best_f1_point(curve: &[CurvePoint]) -> Option<CurvePoint> {
    let mut best: Option<CurvePoint> = None;
    for p in curve {
        let f1 = f1_harmonic(p.ap, p.ar);
        let better = match best {
            None => true,
            Some(b) => f1 > b.f1 || (f1 == b.f1 && p.tau < b.tau),
        };
        if better {
            best = Some(CurvePoint { f1, ..*p });
        }
    }
    best
}

/// `tau,ap,ar,f1` rows at four decimals, optionally followed by a `best` row.
pub fn curve_csv(curve: &[CurvePoint], best: Option<&CurvePoint>) -> String {
    let mut out = String::from("tau,ap,ar,f1\n");
    for p in curve {
        let _ = writeln!(out, "{:.4},{:.4},{:.4},{:.4}", p.tau, p.ap, p.ar, p.f1);
    }
    if let Some(b) = best {
        let _ = writeln!(out, "best,{:.4},{:.4},{:.4},{:.4}", b.tau, b.ap, b.ar, b.f1);
    }
    out
}

/// Per-image argmax of the quality score across candidates (lowest index on ties).
pub fn select_best_masks(candidates: &[Vec<Prediction>]) -> Result<Vec<usize>> {
    let scores: Vec<Vec<Option<f64>>> = candidates
        .iter()
        .map(|c| c.iter().map(|p| p.quality_score).collect())
        .collect();
    select_best_scores(&scores)
}

/// [`select_best_masks`] on bare scores, for callers that have not loaded masks.
pub fn select_best_scores(scores: &[Vec<Option<f64>>]) -> Result<Vec<usize>> {
    scores
        .iter()
        .enumerate()
        .map(|(i, cands)| {
            if cands.is_empty() {
                return Err(Error::InvalidArgument(format!("image {i} has no candidates")));
            }
            let scores = cands
                .iter()
                .enumerate()
                .map(|(k, s)| {
                    s.ok_or_else(|| Error::MissingScore {
                        id: format!("#{i}"),
                        index: k,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(argmax(scores.into_iter()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::SaliencyMap;

    fn mm(rows: &[&[f64]]) -> MatchMatrix {
        MatchMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn scored(scores: &[f64]) -> Vec<Prediction> {
        scores
            .iter()
            .map(|&s| Prediction::new(SaliencyMap::zeros(2, 2), Some(s)).unwrap())
            .collect()
    }

    #[test]
    fn precision_recall_examples() {
        let m = mm(&[&[0.9, 0.2], &[0.3, 0.8]]);
        assert!((image_precision(&m) - 0.85).abs() < 1e-15);
        assert!((image_recall(&m) - 0.85).abs() < 1e-15);
        let row = mm(&[&[0.9, 0.2]]);
        assert!((image_recall(&row) - 0.55).abs() < 1e-15);
        assert!((image_precision(&row) - 0.9).abs() < 1e-15);
        let single = mm(&[&[0.37]]);
        assert_eq!(image_precision(&single), 0.37);
        assert_eq!(image_recall(&single), 0.37);
        let ones = mm(&[&[1.0, 1.0], &[1.0, 1.0], &[1.0, 1.0]]);
        assert_eq!(image_precision(&ones), 1.0);
        assert_eq!(image_recall(&ones), 1.0);
    }

    #[test]
    fn matrix_validation() {
        assert!(MatchMatrix::new(vec![]).is_err());
        assert!(MatchMatrix::new(vec![vec![]]).is_err());
        assert!(MatchMatrix::new(vec![vec![0.1], vec![0.1, 0.2]]).is_err());
        assert!(MatchMatrix::new(vec![vec![1.2]]).is_err());
    }

    #[test]
    fn argmax_ties_lowest() {
        let m = mm(&[&[0.5, 0.5], &[0.5, 0.1]]);
        assert_eq!(m.best_gt(0), 0);
        assert_eq!(m.best_pred(0), 0);
    }

    #[test]
    fn f1_examples() {
        assert!((f1_harmonic(0.889, 0.904) - 0.896).abs() <= 0.0005);
        assert!((f1_harmonic(0.853, 0.826) - 0.839).abs() <= 0.0005);
        assert_eq!(f1_harmonic(0.42, 0.42), 0.42);
        assert_eq!(f1_harmonic(0.0, 0.0), 0.0);
    }

    #[test]
    fn filtering() {
        let preds = scored(&[0.9, 0.5, 0.1]);
        assert_eq!(kept_indices(&preds, "a", 0.5).unwrap(), vec![0, 1]);
        assert_eq!(kept_indices(&preds, "a", 0.0).unwrap(), vec![0, 1, 2]);
        assert_eq!(kept_indices(&scored(&[0.4, 0.2]), "a", 0.9).unwrap(), vec![0]);
        assert_eq!(kept_indices(&scored(&[0.2, 0.4, 0.4]), "a", 0.9).unwrap(), vec![1]);

        let unscored = vec![Prediction::unscored(SaliencyMap::zeros(2, 2))];
        assert_eq!(kept_indices(&unscored, "a", 0.0).unwrap(), vec![0]);
        assert!(matches!(
            kept_indices(&unscored, "a", 0.3),
            Err(Error::MissingScore { .. })
        ));
    }

    #[test]
    fn best_f1_examples() {
        let p = |tau, ap, ar| CurvePoint { tau, ap, ar, f1: 0.0 };
        let best = best_f1_point(&[p(0.1, 0.85, 0.92), p(0.2, 0.90, 0.88)]).unwrap();
        assert_eq!(best.tau, 0.2);
        assert!((best.f1 - 0.8899).abs() < 5e-5);
        let same = best_f1_point(&[p(0.0, 0.5, 0.5), p(0.1, 0.5, 0.5)]).unwrap();
        assert_eq!(same.tau, 0.0);
        let single = best_f1_point(&[p(0.3, 0.6, 0.7)]).unwrap();
        assert_eq!(single.tau, 0.3);
        assert!(best_f1_point(&[]).is_none());
    }

    #[test]
    fn select_examples() {
        assert_eq!(select_best_masks(&[scored(&[0.2, 0.9, 0.9])]).unwrap(), vec![1]);
        assert_eq!(select_best_masks(&[scored(&[0.3])]).unwrap(), vec![0]);
        assert!(select_best_masks(&[vec![]]).is_err());
    }

    #[test]
    fn default_grid() {
        let taus = default_taus();
        assert_eq!(taus.len(), 10);
        assert_eq!(taus[0], 0.0);
        assert_eq!(taus[9], 0.9);
    }

    #[test]
    fn curve_csv_layout() {
        let pts = [CurvePoint { tau: 0.0, ap: 0.5, ar: 0.25, f1: 1.0 / 3.0 }];
        let csv = curve_csv(&pts, Some(&pts[0]));
        assert_eq!(csv, "tau,ap,ar,f1\n0.0000,0.5000,0.2500,0.3333\nbest,0.0000,0.5000,0.2500,0.3333\n");
    }
}
