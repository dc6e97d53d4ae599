use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{confusion, pr_auc, roc_auc, Confusion, ScoreSet, ScoredSample, ThresholdMethod};
use super::train::score;
use crate::error::{Error, Result};
use crate::io::{write_atomic, Sample};
use crate::models::Model;

/// Hex SHA-256 of the canonical JSON form of a configuration.
pub fn config_digest<T: Serialize>(config: &T) -> String {
    let json = serde_json::to_vec(config).expect("config serializes");
    let digest = Sha256::digest(&json);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc_roc: f64,
    pub auc_pr: f64,
    /// Share of disengaged samples: the average precision of a random scorer.
    pub pr_baseline: f64,
    pub threshold: f64,
    pub threshold_method: ThresholdMethod,
    pub confusion: Confusion,
    pub scores: Vec<ScoredSample>,
    pub config_digest: String,
}

impl EvalReport {
    pub fn from_scores(
        scores: &ScoreSet,
        threshold: f64,
        threshold_method: ThresholdMethod,
        config_digest: String,
    ) -> Result<Self> {
        Ok(EvalReport {
            auc_roc: roc_auc(scores)?,
            auc_pr: pr_auc(scores)?,
            pr_baseline: scores.positives() as f64 / scores.len() as f64,
            threshold,
            threshold_method,
            confusion: confusion(scores, threshold),
            scores: scores.entries().to_vec(),
            config_digest,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}

/// Scores `test` and assembles the report at the given threshold.
pub fn evaluate(
    model: &Model,
    test: &[Sample],
    threshold: f64,
    threshold_method: ThresholdMethod,
    config_digest: String,
) -> Result<EvalReport> {
    let scores = score(model, test)?;
    EvalReport::from_scores(&scores, threshold, threshold_method, config_digest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::Label;

    #[test]
    fn report_consistency() {
        let mut labels = vec![Label::Engaged; 1784];
        labels[..88].fill(Label::Disengaged);
        let scores: Vec<f64> = (0..1784).map(|i| ((i * 37) % 101) as f64).collect();
        let s = ScoreSet::from_pairs(&scores, &labels).unwrap();
        let r = EvalReport::from_scores(&s, 50.0, ThresholdMethod::Max, "x".into()).unwrap();
        assert_eq!((r.pr_baseline * 10_000.0).round() / 10_000.0, 0.0493);
        assert_eq!(r.confusion.total(), 1784);
        assert_eq!(r.scores.len(), 1784);
        let json = r.to_json();
        assert!(json.contains("\"fn\""));
        assert!(json.contains("\"threshold_method\": \"max\""));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn digest_is_stable_hex() {
        let d = config_digest(&("a", 1));
        assert_eq!(d.len(), 64);
        assert_eq!(d, config_digest(&("a", 1)));
        assert_ne!(d, config_digest(&("a", 2)));
    }
}
