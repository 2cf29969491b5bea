//! Mask and quality losses as plain numerical functions: soft-target
//! cross-entropy, Dice, their weighted sum, minimum-loss pair selection over
//! multiple predictions and ground truths, and MSE quality regression.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::SaliencyMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Weight on the cross-entropy term.
    pub lambda_ce: f64,
    pub dice_smooth: f64,
    /// Predictions are clamped to `[prob_clamp, 1 - prob_clamp]` before logs.
    pub prob_clamp: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_ce: 2.5,
            dice_smooth: 1.0,
            prob_clamp: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lambda_ce.is_nan() || self.lambda_ce <= 0.0 {
            return Err(Error::InvalidArgument("lambda_ce must be positive".into()));
        }
        if self.dice_smooth.is_nan() || self.dice_smooth < 0.0 {
            return Err(Error::InvalidArgument("dice_smooth must be non-negative".into()));
        }
        if !(self.prob_clamp > 0.0 && self.prob_clamp < 0.5) {
            return Err(Error::InvalidArgument("prob_clamp must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub ce: f64,
    pub dice: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// `total = lambda_ce * ce + dice`.
    pub fn combine(ce: f64, dice: f64, lambda_ce: f64) -> Self {
        Self {
            ce,
            dice,
            total: lambda_ce * ce + dice,
        }
    }
}

/// Mean binary cross-entropy against (possibly soft) targets.
pub fn ce_loss(pred: &SaliencyMap, gt: &SaliencyMap, cfg: &LossConfig) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let (lo, hi) = (cfg.prob_clamp, 1.0 - cfg.prob_clamp);
    let sum: f64 = pred
        .values()
        .iter()
        .zip(gt.values())
        .map(|(&p, &t)| {
            let p = p.clamp(lo, hi);
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

/// `1 - (2 Σpt + s) / (Σp² + Σt² + s)`.
pub fn dice_loss(pred: &SaliencyMap, gt: &SaliencyMap, cfg: &LossConfig) -> Result<f64> {
    pred.ensure_same_shape(gt)?;
    let (mut inter, mut pp, mut tt) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.values().iter().zip(gt.values()) {
        inter += p * t;
        pp += p * p;
        tt += t * t;
    }
    let s = cfg.dice_smooth;
    let denom = pp + tt + s;
    if denom == 0.0 {
        // both empty with no smoothing
        return Ok(0.0);
    }
    Ok((1.0 - (2.0 * inter + s) / denom).clamp(0.0, 1.0))
}

pub fn mask_loss(pred: &SaliencyMap, gt: &SaliencyMap, cfg: &LossConfig) -> Result<LossBreakdown> {
    let ce = ce_loss(pred, gt, cfg)?;
    let dice = dice_loss(pred, gt, cfg)?;
    Ok(LossBreakdown::combine(ce, dice, cfg.lambda_ce))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinLossSelection {
    pub pred_index: usize,
    pub gt_index: usize,
    pub loss: LossBreakdown,
    /// `table[k][j]` is the loss of prediction `k` against ground truth `j`.
    pub table: Vec<Vec<LossBreakdown>>,
}

/// Evaluates every (prediction, ground truth) pair and picks the global
/// minimum total loss; ties go to the lexicographically smallest `(k, j)`.
pub fn min_loss_select(preds: &[SaliencyMap], gts: &[SaliencyMap], cfg: &LossConfig) -> Result<MinLossSelection> {
    if preds.is_empty() || gts.is_empty() {
        return Err(Error::InvalidArgument(
            "min-loss selection needs at least one prediction and one ground truth".into(),
        ));
    }
    let table = preds
        .iter()
        .map(|p| gts.iter().map(|g| mask_loss(p, g, cfg)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let (pred_index, gt_index) = argmin_table(&table);
    Ok(MinLossSelection {
        pred_index,
        gt_index,
        loss: table[pred_index][gt_index],
        table,
    })
}

fn argmin_table(table: &[Vec<LossBreakdown>]) -> (usize, usize) {
    let mut best = (0, 0);
    for (k, row) in table.iter().enumerate() {
        for (j, cell) in row.iter().enumerate() {
            if cell.total < table[best.0][best.1].total {
                best = (k, j);
            }
        }
    }
    best
}

/// Quality annotation level `1..=4` mapped to `{0.0, 0.33, 0.67, 1.0}`.
pub fn normalize_quality_level(level: u8) -> Result<f64> {
    match level {
        1 => Ok(0.0),
        2 => Ok(0.33),
        3 => Ok(0.67),
        4 => Ok(1.0),
        _ => Err(Error::InvalidArgument(format!(
            "quality level {level} outside 1..=4"
        ))),
    }
}

pub fn mse_quality_loss(pred_scores: &[f64], gt_scores: &[f64]) -> Result<f64> {
    if pred_scores.len() != gt_scores.len() {
        return Err(Error::InvalidArgument(format!(
            "score length mismatch: {} vs {}",
            pred_scores.len(),
            gt_scores.len()
        )));
    }
    if pred_scores.is_empty() {
        return Err(Error::InvalidArgument("empty score lists".into()));
    }
    let sum: f64 = pred_scores
        .iter()
        .zip(gt_scores)
        .map(|(p, g)| (p - g) * (p - g))
        .sum();
    Ok(sum / pred_scores.len() as f64)
}
