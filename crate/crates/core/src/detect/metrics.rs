use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::mean_std;
use crate::io::Label;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub id: String,
    pub score: f64,
    pub label: Label,
}

/// Per-sample scores; higher means more likely disengaged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreSet {
    entries: Vec<ScoredSample>,
}

impl ScoreSet {
    /// Validates and sorts by id.
    pub fn new(mut entries: Vec<ScoredSample>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !e.score.is_finite() {
                return Err(Error::Input(format!("score of '{}' is not finite", e.id)));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::Input(format!("duplicate sample id '{}'", e.id)));
            }
        }
        entries.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(ScoreSet { entries })
    }

    /// Builds a set from parallel score/label slices with generated ids.
    pub fn from_pairs(scores: &[f64], labels: &[Label]) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Input("scores and labels differ in length".into()));
        }
        ScoreSet::new(
            scores
                .iter()
                .zip(labels)
                .enumerate()
                .map(|(i, (&score, &label))| ScoredSample {
                    id: format!("s{i:06}"),
                    score,
                    label,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ScoredSample] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.entries.iter().filter(|e| e.label.is_positive()).count()
    }

    pub fn negatives(&self) -> usize {
        self.len() - self.positives()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.score).collect()
    }

    /// Scores of one class, in id order.
    pub fn scores_of(&self, label: Label) -> Vec<f64> {
        self.entries
            .iter()
            .filter(|e| e.label == label)
            .map(|e| e.score)
            .collect()
    }

    /// A copy with every score mapped through `f`.
    pub fn map_scores(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        ScoreSet::new(
            self.entries
                .iter()
                .map(|e| ScoredSample {
                    score: f(e.score),
                    ..e.clone()
                })
                .collect(),
        )
    }

    /// (score, is_positive) sorted by descending score.
    fn descending(&self) -> Vec<(f64, bool)> {
        let mut v: Vec<(f64, bool)> = self
            .entries
            .iter()
            .map(|e| (e.score, e.label.is_positive()))
            .collect();
        v.sort_by(|a, b| b.0.total_cmp(&a.0));
        v
    }

    /// Cumulative (fp, tp) after each block of tied scores, highest first.
    fn blocks(&self) -> Vec<(usize, usize)> {
        let sorted = self.descending();
        let mut out = Vec::new();
        let (mut fp, mut tp) = (0, 0);
        let mut i = 0;
        while i < sorted.len() {
            let s = sorted[i].0;
            while i < sorted.len() && sorted[i].0 == s {
                if sorted[i].1 {
                    tp += 1;
                } else {
                    fp += 1;
                }
                i += 1;
            }
            out.push((fp, tp));
        }
        out
    }

    fn require_both_classes(&self) -> Result<(usize, usize)> {
        let (p, n) = (self.positives(), self.negatives());
        if p == 0 || n == 0 {
            return Err(Error::Input(format!(
                "ROC needs both classes, got {p} disengaged and {n} engaged"
            )));
        }
        Ok((p, n))
    }
}

/// Area under the ROC curve via the rank-sum (Mann-Whitney) statistic, tied
/// scores sharing their average rank.
pub fn roc_auc(scores: &ScoreSet) -> Result<f64> {
    let (p, n) = scores.require_both_classes()?;
    let mut v: Vec<(f64, bool)> = scores.descending();
    v.reverse();
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < v.len() {
        let mut j = i;
        while j < v.len() && v[j].0 == v[i].0 {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let mid = (i + 1 + j) as f64 / 2.0;
        rank_sum += mid * v[i..j].iter().filter(|x| x.1).count() as f64;
        i = j;
    }
    let (p, n) = (p as f64, n as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// ROC points (fpr, tpr) from (0, 0) to (1, 1), one per tie block.
pub fn roc_curve(scores: &ScoreSet) -> Result<Vec<(f64, f64)>> {
    let (p, n) = scores.require_both_classes()?;
    let mut pts = vec![(0.0, 0.0)];
    pts.extend(
        scores
            .blocks()
            .into_iter()
            .map(|(fp, tp)| (fp as f64 / n as f64, tp as f64 / p as f64)),
    );
    Ok(pts)
}

/// Trapezoidal area under a piecewise-linear curve given as (x, y) points.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Precision-recall points (recall, precision), one per tie block.
pub fn pr_curve(scores: &ScoreSet) -> Result<Vec<(f64, f64)>> {
    let p = scores.positives();
    if p == 0 {
        return Err(Error::Input("precision-recall needs at least one disengaged sample".into()));
    }
    Ok(scores
        .blocks()
        .into_iter()
        .map(|(fp, tp)| (tp as f64 / p as f64, tp as f64 / (tp + fp) as f64))
        .collect())
}

/// Average precision: the sum over tie blocks of recall gained times the
/// precision after that block.
pub fn pr_auc(scores: &ScoreSet) -> Result<f64> {
    let p = scores.positives();
    if p == 0 {
        return Err(Error::Input("precision-recall needs at least one disengaged sample".into()));
    }
    let mut prev_tp = 0;
    let mut acc = 0.0;
    for (fp, tp) in scores.blocks() {
        if tp > prev_tp {
            acc += (tp - prev_tp) as f64 * (tp as f64 / (tp + fp) as f64);
            prev_tp = tp;
        }
    }
    Ok(acc / p as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tn + self.fp + self.fn_ + self.tp
    }
}

/// Counts with the rule: disengaged iff `score > threshold`.
pub fn confusion(scores: &ScoreSet, threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for e in scores.entries() {
        match (e.label.is_positive(), e.score > threshold) {
            (false, false) => c.tn += 1,
            (false, true) => c.fp += 1,
            (true, false) => c.fn_ += 1,
            (true, true) => c.tp += 1,
        }
    }
    c
}

/// Rule for turning engaged-only scores into a decision threshold.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ThresholdMethod {
    Max,
    /// Percentile in `[0, 100]` with linear interpolation between order
    /// statistics.
    Percentile(f64),
    MeanPlusKStd(f64),
}

impl Default for ThresholdMethod {
    fn default() -> Self {
        ThresholdMethod::Percentile(99.0)
    }
}

impl fmt::Display for ThresholdMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdMethod::Max => f.write_str("max"),
            ThresholdMethod::Percentile(q) => write!(f, "percentile({q})"),
            ThresholdMethod::MeanPlusKStd(k) => write!(f, "mean_plus_k_std({k})"),
        }
    }
}

impl FromStr for ThresholdMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "max" {
            return Ok(ThresholdMethod::Max);
        }
        let arg = |prefix: &str| -> Option<f64> {
            s.strip_prefix(prefix)?
                .strip_prefix('(')?
                .strip_suffix(')')?
                .trim()
                .parse()
                .ok()
        };
        let bad = || Error::Config(format!("unknown threshold method '{s}'"));
        if let Some(q) = arg("percentile") {
            if !(0.0..=100.0).contains(&q) {
                return Err(Error::Config(format!("percentile {q} outside [0, 100]")));
            }
            Ok(ThresholdMethod::Percentile(q))
        } else if let Some(k) = arg("mean_plus_k_std") {
            if !k.is_finite() {
                return Err(bad());
            }
            Ok(ThresholdMethod::MeanPlusKStd(k))
        } else {
            Err(bad())
        }
    }
}

impl From<ThresholdMethod> for String {
    fn from(m: ThresholdMethod) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ThresholdMethod {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Threshold from raw engaged scores.
pub fn threshold_from(values: &[f64], method: ThresholdMethod) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Input("threshold selection needs at least one score".into()));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(match method {
        ThresholdMethod::Max => v[v.len() - 1],
        ThresholdMethod::Percentile(q) => {
            let pos = q / 100.0 * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
        }
        ThresholdMethod::MeanPlusKStd(k) => {
            let (m, s) = mean_std(&v);
            m + k * s
        }
    })
}

/// Threshold from engaged scores only; any disengaged entry is refused.
pub fn select_threshold(normal: &ScoreSet, method: ThresholdMethod) -> Result<f64> {
    if let Some(e) = normal.entries().iter().find(|e| e.label.is_positive()) {
        return Err(Error::Protocol(format!(
            "threshold selection must see engaged scores only; '{}' is disengaged",
            e.id
        )));
    }
    threshold_from(&normal.scores(), method)
}
