//! Pairwise preference alignment: how often a scoring function ranks the
//! human-preferred mask of a pair above the other one.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::{binarize, load_mask, SaliencyMap};
use crate::metrics::{self, MetricConfig, GT_BINARIZE_THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Superior {
    A,
    B,
}

impl Superior {
    pub fn flipped(self) -> Self {
        match self {
            Superior::A => Superior::B,
            Superior::B => Superior::A,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferencePair {
    pub id: String,
    pub score_a: f64,
    pub score_b: f64,
    pub label: Superior,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Exact ties count as half correct.
    #[default]
    Half,
    /// Exact ties count as wrong.
    Wrong,
}

impl FromStr for TiePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "half" => Ok(TiePolicy::Half),
            "wrong" => Ok(TiePolicy::Wrong),
            other => Err(Error::InvalidArgument(format!("unknown tie policy `{other}`"))),
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TiePolicy::Half => "half",
            TiePolicy::Wrong => "wrong",
        })
    }
}

/// Fraction of pairs whose higher score lands on the labeled superior mask.
pub fn alignment_accuracy(pairs: &[PreferencePair], tie_policy: TiePolicy) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidArgument("no preference pairs".into()));
    }
    let mut credit = 0.0;
    for p in pairs {
        if !p.score_a.is_finite() || !p.score_b.is_finite() {
            return Err(Error::InvalidArgument(format!("pair `{}` has a non-finite score", p.id)));
        }
        let (sup, inf) = match p.label {
            Superior::A => (p.score_a, p.score_b),
            Superior::B => (p.score_b, p.score_a),
        };
        if sup > inf {
            credit += 1.0;
        } else if sup == inf && tie_policy == TiePolicy::Half {
            credit += 0.5;
        }
    }
    Ok(credit / pairs.len() as f64)
}

/// Classical metrics usable as preference scorers; higher is better for all
/// of them (MAE is negated).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PreferenceMetric {
    Mae,
    FMax,
    FAvg,
    EMean,
    SMeasure,
    #[default]
    Match,
}

impl FromStr for PreferenceMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mae" => PreferenceMetric::Mae,
            "f_max" => PreferenceMetric::FMax,
            "f_avg" => PreferenceMetric::FAvg,
            "e_mean" => PreferenceMetric::EMean,
            "s_measure" => PreferenceMetric::SMeasure,
            "match" => PreferenceMetric::Match,
            other => return Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        })
    }
}

impl PreferenceMetric {
    pub fn score(self, pred: &SaliencyMap, gt: &SaliencyMap, cfg: &MetricConfig) -> Result<f64> {
        let gt_bin = || binarize(gt, GT_BINARIZE_THRESHOLD);
        match self {
            PreferenceMetric::Mae => Ok(-metrics::mae(pred, gt)?),
            PreferenceMetric::FMax => Ok(metrics::f_curve(pred, &gt_bin(), cfg)?.max()),
            PreferenceMetric::FAvg => Ok(metrics::f_curve(pred, &gt_bin(), cfg)?.mean()),
            PreferenceMetric::EMean => metrics::e_measure_mean(pred, &gt_bin(), cfg),
            PreferenceMetric::SMeasure => metrics::s_measure(pred, &gt_bin(), cfg),
            PreferenceMetric::Match => metrics::match_score(pred, gt, cfg),
        }
    }
}

/// Two candidate masks for the same image and its ground truth.
#[derive(Debug, Clone)]
pub struct MaskPair {
    pub id: String,
    pub a: SaliencyMap,
    pub b: SaliencyMap,
    pub gt: SaliencyMap,
    pub label: Superior,
}

pub fn score_pairs_with_metric(
    pairs: &[MaskPair],
    metric: PreferenceMetric,
    cfg: &MetricConfig,
) -> Result<Vec<PreferencePair>> {
    pairs
        .par_iter()
        .map(|p| {
            Ok(PreferencePair {
                id: p.id.clone(),
                score_a: metric.score(&p.a, &p.gt, cfg)?,
                score_b: metric.score(&p.b, &p.gt, cfg)?,
                label: p.label,
            })
        })
        .collect()
}

/// One side of a pairs-file entry: a precomputed score or a mask path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PairSide {
    Score(f64),
    Path(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: String,
    pub a: PairSide,
    pub b: PairSide,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<String>,
    pub label: Superior,
}

/// Reads a pairs file. Mask-path sides are scored with `metric` against the
/// entry's `gt`; paths resolve relative to the file's directory.
pub fn load_pairs(path: impl AsRef<Path>, metric: PreferenceMetric, cfg: &MetricConfig) -> Result<Vec<PreferencePair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<PairEntry> = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("malformed pairs file: {e}")))?;
    let dir = path.parent().unwrap_or_else(|| Path::new(""));
    entries
        .par_iter()
        .map(|e| {
            let gt = match &e.gt {
                Some(g) => Some(load_mask(dir.join(g))?),
                None => None,
            };
            let side = |s: &PairSide| -> Result<f64> {
                match s {
                    PairSide::Score(v) => Ok(*v),
                    PairSide::Path(p) => {
                        let gt = gt.as_ref().ok_or_else(|| {
                            Error::InvalidArgument(format!("pair `{}` has mask paths but no gt", e.id))
                        })?;
                        metric.score(&load_mask(dir.join(p))?, gt, cfg)
                    }
                }
            };
            Ok(PreferencePair {
                id: e.id.clone(),
                score_a: side(&e.a)?,
                score_b: side(&e.b)?,
                label: e.label,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(a: f64, b: f64, label: Superior) -> PreferencePair {
        PreferencePair {
            id: String::new(),
            score_a: a,
            score_b: b,
            label,
        }
    }

    #[test]
    fn accuracy_examples() {
        let ordered = [pair(0.9, 0.1, Superior::A), pair(0.2, 0.8, Superior::B)];
        assert_eq!(alignment_accuracy(&ordered, TiePolicy::Half).unwrap(), 1.0);
        let reversed = [pair(0.1, 0.9, Superior::A), pair(0.8, 0.2, Superior::B)];
        assert_eq!(alignment_accuracy(&reversed, TiePolicy::Half).unwrap(), 0.0);
        let mixed = [
            pair(0.9, 0.1, Superior::A),
            pair(0.3, 0.7, Superior::B),
            pair(0.5, 0.5, Superior::A),
            pair(0.9, 0.1, Superior::B),
        ];
        assert_eq!(alignment_accuracy(&mixed, TiePolicy::Half).unwrap(), 0.625);
        assert_eq!(alignment_accuracy(&mixed, TiePolicy::Wrong).unwrap(), 0.5);
        assert!(alignment_accuracy(&[], TiePolicy::Half).is_err());
        assert!(alignment_accuracy(&[pair(f64::NAN, 0.0, Superior::A)], TiePolicy::Half).is_err());
    }

    #[test]
    fn parse_names() {
        assert_eq!("wrong".parse::<TiePolicy>().unwrap(), TiePolicy::Wrong);
        assert!("maybe".parse::<TiePolicy>().is_err());
        assert_eq!("e_mean".parse::<PreferenceMetric>().unwrap(), PreferenceMetric::EMean);
        assert!("iou".parse::<PreferenceMetric>().is_err());
    }

    #[test]
    fn metric_orientation() {
        let cfg = MetricConfig::default();
        let gt = SaliencyMap::from_fn(16, 16, |x, y| if (4..12).contains(&x) && (3..10).contains(&y) { 1.0 } else { 0.0 });
        let worse = gt.map_values(|v| if v == 1.0 { 0.6 } else { 0.2 });
        let pairs = [MaskPair {
            id: "p".into(),
            a: worse.clone(),
            b: gt.clone(),
            gt: gt.clone(),
            label: Superior::B,
        }];
        for m in ["mae", "f_max", "f_avg", "e_mean", "s_measure", "match"] {
            let metric: PreferenceMetric = m.parse().unwrap();
            let scored = score_pairs_with_metric(&pairs, metric, &cfg).unwrap();
            assert!(scored[0].score_b >= scored[0].score_a, "{m}");
        }
        let mae = score_pairs_with_metric(&pairs, PreferenceMetric::Mae, &cfg).unwrap();
        assert_eq!(mae[0].score_b, 0.0);
        assert!(mae[0].score_a < 0.0);
    }

    #[test]
    fn pair_side_json() {
        let e: Vec<PairEntry> =
            serde_json::from_str(r#"[{"id": "x", "a": 0.5, "b": "m.png", "gt": "g.png", "label": "B"}]"#).unwrap();
        assert_eq!(e[0].a, PairSide::Score(0.5));
        assert_eq!(e[0].b, PairSide::Path("m.png".into()));
        assert_eq!(e[0].label, Superior::B);
    }
}
