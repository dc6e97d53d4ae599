use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::csv::read_frame_csv;
use super::manifest::{Label, Manifest, Split};
use super::write_atomic;
use crate::error::{Error, Result};
use crate::features::{
    impute, segment_matrix, segment_names_for, select_features, FeatureMode, FrameSeries,
    AFFECT_FRAME_COLUMNS, DEFAULT_BLINK_THRESHOLD, FRAME_FEATURE_NAMES,
};
use crate::seqnn::SeqTensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureLevel {
    /// One time step per video frame.
    #[default]
    Frame,
    /// One time step per 10-second window of statistics.
    Segment,
}

impl FeatureLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureLevel::Frame => "frame",
            FeatureLevel::Segment => "segment",
        }
    }
}

impl fmt::Display for FeatureLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frame" => Ok(FeatureLevel::Frame),
            "segment" => Ok(FeatureLevel::Segment),
            other => Err(Error::Config(format!(
                "unknown feature level '{other}' (expected frame or segment)"
            ))),
        }
    }
}

/// Column names of the model input for a level and feature mode.
pub fn feature_order(level: FeatureLevel, mode: FeatureMode) -> Vec<String> {
    match level {
        FeatureLevel::Frame => {
            let skip = match mode {
                FeatureMode::Behavioral => AFFECT_FRAME_COLUMNS,
                FeatureMode::BehavioralAffect => 0,
            };
            FRAME_FEATURE_NAMES[skip..].iter().map(|s| s.to_string()).collect()
        }
        FeatureLevel::Segment => segment_names_for(mode).to_vec(),
    }
}

/// One model-ready sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub data: SeqTensor,
    pub label: Label,
    normalized: bool,
}

impl Sample {
    pub fn new(id: impl Into<String>, data: SeqTensor, label: Label) -> Self {
        Sample {
            id: id.into(),
            data,
            label,
            normalized: false,
        }
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }
}

/// How recordings become model inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub fps: f64,
    pub blink_threshold: f64,
    /// Frames below this extraction confidence are forward-filled.
    pub min_confidence: f64,
    pub window_s: f64,
    pub overlap: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            fps: 30.0,
            blink_threshold: DEFAULT_BLINK_THRESHOLD,
            min_confidence: 0.5,
            window_s: 10.0,
            overlap: 0.5,
        }
    }
}

/// Converts one recording to a model input.
pub fn series_to_tensor(
    series: &FrameSeries,
    mode: FeatureMode,
    level: FeatureLevel,
    opts: &LoadOptions,
) -> Result<SeqTensor> {
    let (clean, _) = impute(series, opts.min_confidence)?;
    match level {
        FeatureLevel::Frame => select_features(&clean, mode),
        FeatureLevel::Segment => segment_matrix(
            &clean,
            mode,
            opts.blink_threshold,
            opts.window_s,
            opts.overlap,
        ),
    }
}

/// Loads every manifest entry of `split` as an un-normalized sample.
pub fn load_split(
    manifest: &Manifest,
    split: Split,
    mode: FeatureMode,
    level: FeatureLevel,
    opts: &LoadOptions,
) -> Result<Vec<Sample>> {
    manifest
        .split(split)
        .map(|e| {
            let path = manifest.resolve(e);
            let series = read_frame_csv(&path, opts.fps)?;
            let data = series_to_tensor(&series, mode, level, opts).map_err(|err| match err {
                Error::Input(msg) => Error::Input(format!("{}: {msg}", path.display())),
                other => other,
            })?;
            Ok(Sample::new(e.id.clone(), data, e.label))
        })
        .collect()
}

/// Per-feature z-score statistics, fitted on engaged training data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub feature_order: Vec<String>,
}

impl NormStats {
    /// Fits column means and population standard deviations over all time
    /// steps of all samples. Columns with no spread get unit scale.
    pub fn fit(samples: &[Sample], feature_order: Vec<String>) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| s.label != Label::Engaged) {
            return Err(Error::Protocol(format!(
                "normalization statistics must come from engaged samples only; '{}' is {}",
                s.id, s.label
            )));
        }
        if let Some(s) = samples.iter().find(|s| s.normalized) {
            return Err(Error::Protocol(format!(
                "sample '{}' is already normalized",
                s.id
            )));
        }
        let Some(first) = samples.first() else {
            return Err(Error::Input("no samples to fit normalization on".into()));
        };
        let width = first.data.channels();
        if feature_order.len() != width || samples.iter().any(|s| s.data.channels() != width) {
            return Err(Error::Input("inconsistent feature widths".into()));
        }
        let views: Vec<_> = samples.iter().map(|s| s.data.view()).collect();
        let all = ndarray::concatenate(Axis(0), &views).expect("same width");
        let mut mean = Vec::with_capacity(width);
        let mut std = Vec::with_capacity(width);
        for col in all.columns() {
            let (m, s) = crate::features::mean_std(&col.to_vec());
            mean.push(m);
            std.push(if s > 1e-12 { s } else { 1.0 });
        }
        Ok(NormStats {
            mean,
            std,
            feature_order,
        })
    }

    /// Normalizes a sample in place. A sample can only be normalized once.
    pub fn apply(&self, sample: &mut Sample) -> Result<()> {
        if sample.normalized {
            return Err(Error::Protocol(format!(
                "sample '{}' is already normalized",
                sample.id
            )));
        }
        if sample.data.channels() != self.mean.len() {
            return Err(Error::Input(format!(
                "sample '{}' has {} features, statistics have {}",
                sample.id,
                sample.data.channels(),
                self.mean.len()
            )));
        }
        let mut m = sample.data.as_mat().clone();
        for (mut col, (mu, sd)) in m.columns_mut().into_iter().zip(self.mean.iter().zip(&self.std)) {
            col.mapv_inplace(|v| (v - mu) / sd);
        }
        sample.data = SeqTensor::new(m)?;
        sample.normalized = true;
        Ok(())
    }

    pub fn apply_all(&self, samples: &mut [Sample]) -> Result<()> {
        samples.iter_mut().try_for_each(|s| self.apply(s))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("stats serialize")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let stats: NormStats = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if stats.mean.len() != stats.std.len() || stats.mean.len() != stats.feature_order.len() {
            return Err(Error::Format(format!(
                "{}: mean/std/feature_order lengths differ",
                path.display()
            )));
        }
        if stats.std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Format(format!(
                "{}: standard deviations must be positive",
                path.display()
            )));
        }
        Ok(stats)
    }
}
