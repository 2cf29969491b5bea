//! Naive reference implementations used to cross-check the library.
//! Everything here loops pixel by pixel and threshold by threshold.
#![allow(dead_code)]

use psod_eval::mask::{ImageRecord, Prediction, SaliencyMap};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const BETA2: f64 = 0.3;
pub const EPS: f64 = 1e-8;

pub fn thresholds() -> Vec<f64> {
    (1..=255).map(|k| (k as f64 - 0.5) / 255.0).collect()
}

/// Soft values drawn from a mix of 8-bit levels, exact thresholds, extremes
/// and arbitrary floats.
pub fn random_soft(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SaliencyMap {
    let values = (0..w * h)
        .map(|_| match rng.random_range(0..5) {
            0 => rng.random_range(0..=255u32) as f64 / 255.0,
            1 => (rng.random_range(1..=255u32) as f64 - 0.5) / 255.0,
            2 => [0.0, 1.0][rng.random_range(0..2)],
            _ => rng.random::<f64>(),
        })
        .collect();
    SaliencyMap::new(w, h, values).unwrap()
}

/// Binary mask with a random foreground rate; at least one pixel on.
pub fn random_binary(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SaliencyMap {
    let rate = rng.random_range(0.05..0.7);
    let mut values: Vec<f64> = (0..w * h)
        .map(|_| if rng.random::<f64>() < rate { 1.0 } else { 0.0 })
        .collect();
    let i = rng.random_range(0..values.len());
    values[i] = 1.0;
    SaliencyMap::new(w, h, values).unwrap()
}

/// Binary mask made of a random axis-aligned rectangle, so blocks and
/// centroids behave like real objects.
pub fn random_blob(rng: &mut ChaCha8Rng, w: usize, h: usize) -> SaliencyMap {
    let x0 = rng.random_range(0..w - 1);
    let y0 = rng.random_range(0..h - 1);
    let x1 = rng.random_range(x0 + 1..=w);
    let y1 = rng.random_range(y0 + 1..=h);
    SaliencyMap::from_fn(w, h, |x, y| {
        if (x0..x1).contains(&x) && (y0..y1).contains(&y) {
            1.0
        } else {
            0.0
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
}

pub fn naive_counts(pred: &SaliencyMap, gt: &SaliencyMap) -> Vec<Counts> {
    thresholds()
        .iter()
        .map(|&t| {
            let mut c = Counts { tp: 0, fp: 0, fn_: 0 };
            for (&p, &g) in pred.values().iter().zip(gt.values()) {
                let on = p > t;
                let pos = g == 1.0;
                if on && pos {
                    c.tp += 1;
                } else if on {
                    c.fp += 1;
                } else if pos {
                    c.fn_ += 1;
                }
            }
            c
        })
        .collect()
}

pub fn naive_f_values(pred: &SaliencyMap, gt: &SaliencyMap) -> Vec<f64> {
    naive_counts(pred, gt)
        .iter()
        .map(|c| {
            let p = if c.tp + c.fp == 0 {
                0.0
            } else {
                c.tp as f64 / (c.tp + c.fp) as f64
            };
            let r = c.tp as f64 / (c.tp + c.fn_) as f64;
            if BETA2 * p + r == 0.0 {
                0.0
            } else {
                (1.0 + BETA2) * p * r / (BETA2 * p + r)
            }
        })
        .collect()
}

pub fn naive_f_mean(pred: &SaliencyMap, gt: &SaliencyMap) -> f64 {
    let f = naive_f_values(pred, gt);
    f.iter().sum::<f64>() / f.len() as f64
}

pub fn naive_mae(a: &SaliencyMap, b: &SaliencyMap) -> f64 {
    let mut s = 0.0;
    for y in 0..a.height() {
        for x in 0..a.width() {
            s += (a.get(x, y) - b.get(x, y)).abs();
        }
    }
    s / (a.width() * a.height()) as f64
}

pub fn naive_dice(p: &SaliencyMap, t: &SaliencyMap, smooth: f64) -> f64 {
    let mut inter = 0.0;
    let mut pp = 0.0;
    let mut tt = 0.0;
    for y in 0..p.height() {
        for x in 0..p.width() {
            inter += p.get(x, y) * t.get(x, y);
            pp += p.get(x, y).powi(2);
            tt += t.get(x, y).powi(2);
        }
    }
    if pp + tt + smooth == 0.0 {
        return 0.0;
    }
    (1.0 - (2.0 * inter + smooth) / (pp + tt + smooth)).clamp(0.0, 1.0)
}

pub fn naive_ce(p: &SaliencyMap, t: &SaliencyMap, clamp: f64) -> f64 {
    let mut s = 0.0;
    for y in 0..p.height() {
        for x in 0..p.width() {
            let q = p.get(x, y).max(clamp).min(1.0 - clamp);
            let g = t.get(x, y);
            s -= g * q.ln() + (1.0 - g) * (1.0 - q).ln();
        }
    }
    s / (p.width() * p.height()) as f64
}

/// Pixelwise enhanced-alignment mean over the threshold grid.
pub fn naive_e_mean(pred: &SaliencyMap, gt: &SaliencyMap) -> f64 {
    let n = pred.len() as f64;
    let gt_sum: f64 = gt.values().iter().sum();
    let gt_mean = gt_sum / n;
    let mut total = 0.0;
    for &t in &thresholds() {
        let b: Vec<f64> = pred.values().iter().map(|&p| if p > t { 1.0 } else { 0.0 }).collect();
        let b_mean = b.iter().sum::<f64>() / n;
        let mut acc = 0.0;
        for (i, &g) in gt.values().iter().enumerate() {
            let e = if gt_sum == 0.0 {
                1.0 - b[i]
            } else if gt_sum == n {
                b[i]
            } else {
                let pg = g - gt_mean;
                let pb = b[i] - b_mean;
                let align = 2.0 * pg * pb / (pg * pg + pb * pb);
                (align + 1.0).powi(2) / 4.0
            };
            acc += e;
        }
        total += (acc / (n - 1.0 + EPS)).clamp(0.0, 1.0);
    }
    total / 255.0
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

fn object_term(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let (m, s) = mean_std(xs);
    2.0 * m / (m * m + 1.0 + s + EPS)
}

fn ssim(p: &[f64], g: &[f64]) -> f64 {
    let n = p.len() as f64;
    let d = (n - 1.0).max(1.0);
    let mp = p.iter().sum::<f64>() / n;
    let mg = g.iter().sum::<f64>() / n;
    let mut vp = 0.0;
    let mut vg = 0.0;
    let mut cov = 0.0;
    for i in 0..p.len() {
        vp += (p[i] - mp).powi(2);
        vg += (g[i] - mg).powi(2);
        cov += (p[i] - mp) * (g[i] - mg);
    }
    let (vp, vg, cov) = (vp / d, vg / d, cov / d);
    let num = 4.0 * mp * mg * cov;
    let den = (mp * mp + mg * mg) * (vp + vg);
    if num != 0.0 {
        num / if den > 0.0 { den } else { EPS }
    } else if den == 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Structure measure with alpha = 0.5 from explicit per-pixel loops.
pub fn naive_s_measure(pred: &SaliencyMap, gt: &SaliencyMap) -> f64 {
    let (w, h) = (gt.width(), gt.height());
    let mu = gt.mean();
    if mu == 0.0 {
        return 1.0 - pred.mean();
    }
    if mu == 1.0 {
        return pred.mean();
    }
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    let (mut sx, mut sy, mut count) = (0.0, 0.0, 0.0);
    for y in 0..h {
        for x in 0..w {
            if gt.get(x, y) == 1.0 {
                fg.push(pred.get(x, y));
                sx += x as f64;
                sy += y as f64;
                count += 1.0;
            } else {
                bg.push(1.0 - pred.get(x, y));
            }
        }
    }
    let so = mu * object_term(&fg) + (1.0 - mu) * object_term(&bg);
    let cx = (((sx / count).round_ties_even() as usize) + 1).min(w);
    let cy = (((sy / count).round_ties_even() as usize) + 1).min(h);
    let mut sr = 0.0;
    for (x0, x1, y0, y1) in [(0, cx, 0, cy), (cx, w, 0, cy), (0, cx, cy, h), (cx, w, cy, h)] {
        let mut p = Vec::new();
        let mut g = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                p.push(pred.get(x, y));
                g.push(gt.get(x, y));
            }
        }
        let fg_here: f64 = g.iter().sum();
        if fg_here == 0.0 {
            continue;
        }
        sr += fg_here / count * ssim(&p, &g);
    }
    (0.5 * so + 0.5 * sr).max(0.0)
}

pub fn naive_match(pred: &SaliencyMap, gt: &SaliencyMap) -> f64 {
    let g = SaliencyMap::from_fn(gt.width(), gt.height(), |x, y| if gt.get(x, y) > 0.5 { 1.0 } else { 0.0 });
    let s = naive_s_measure(pred, &g);
    if g.values().iter().all(|&v| v == 0.0) {
        return s;
    }
    (naive_f_mean(pred, &g) + s) / 2.0
}

/// Dataset AP, AR and F1 by enumerating every (prediction, ground truth)
/// pair of every image, after keeping predictions scored at least `tau`.
pub fn naive_pluralistic(records: &[ImageRecord], tau: f64) -> (f64, f64, f64) {
    let mut ap = 0.0;
    let mut ar = 0.0;
    for rec in records {
        let kept: Vec<&Prediction> = if tau <= 0.0 {
            rec.preds.iter().collect()
        } else {
            let above: Vec<&Prediction> =
                rec.preds.iter().filter(|p| p.quality_score.unwrap() >= tau).collect();
            if above.is_empty() {
                let mut best = &rec.preds[0];
                for p in &rec.preds {
                    if p.quality_score.unwrap() > best.quality_score.unwrap() {
                        best = p;
                    }
                }
                vec![best]
            } else {
                above
            }
        };
        let m: Vec<Vec<f64>> = kept
            .iter()
            .map(|p| rec.gts.iter().map(|g| naive_match(&p.mask, g)).collect())
            .collect();
        let mut p_sum = 0.0;
        for row in &m {
            let mut best = f64::NEG_INFINITY;
            for &v in row {
                if v > best {
                    best = v;
                }
            }
            p_sum += best;
        }
        let mut r_sum = 0.0;
        for j in 0..rec.gts.len() {
            let mut best = f64::NEG_INFINITY;
            for row in &m {
                if row[j] > best {
                    best = row[j];
                }
            }
            r_sum += best;
        }
        ap += p_sum / m.len() as f64;
        ar += r_sum / rec.gts.len() as f64;
    }
    ap /= records.len() as f64;
    ar /= records.len() as f64;
    let f1 = if ap + ar == 0.0 { 0.0 } else { 2.0 * ap * ar / (ap + ar) };
    (ap, ar, f1)
}

/// Random record with `1..=max_k` scored predictions and `1..=max_j` ground
/// truths.
pub fn random_record(rng: &mut ChaCha8Rng, id: usize, w: usize, h: usize, max_k: usize, max_j: usize) -> ImageRecord {
    let j = rng.random_range(1..=max_j);
    let k = rng.random_range(1..=max_k);
    let gts = (0..j)
        .map(|_| if rng.random::<bool>() { random_blob(rng, w, h) } else { random_binary(rng, w, h) })
        .collect();
    let preds = (0..k)
        .map(|_| {
            let score = rng.random::<f64>();
            Prediction::new(random_soft(rng, w, h), Some(score)).unwrap()
        })
        .collect();
    ImageRecord::new(format!("r{id}"), gts, preds).unwrap()
}
