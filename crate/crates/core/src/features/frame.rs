use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqnn::{Mat, SeqTensor};

/// One frame as produced by upstream face and affect extractors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameFeatures {
    pub frame: u64,
    /// Extraction confidence in `[0, 1]`.
    pub confidence: f64,
    pub valence: f64,
    pub arousal: f64,
    /// AU45 intensity (eye closure), 0–5 scale.
    pub eye_closure: f64,
    /// Gaze direction relative to the camera, radians.
    pub gaze_x: f64,
    pub gaze_y: f64,
    /// Head location relative to the camera, millimetres.
    pub head_x: f64,
    pub head_y: f64,
    pub head_z: f64,
    /// Head rotation, radians.
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

/// Model-facing column order for frame-level features.
pub const FRAME_FEATURE_NAMES: [&str; 11] = [
    "valence", "arousal", "au45", "gaze_x", "gaze_y", "head_x", "head_y", "head_z", "pitch", "yaw",
    "roll",
];

/// Number of leading affect columns (valence, arousal) in both the frame and
/// segment orders.
pub const AFFECT_FRAME_COLUMNS: usize = 2;

impl FrameFeatures {
    /// The 11 model-facing values in [`FRAME_FEATURE_NAMES`] order.
    pub fn values(&self) -> [f64; 11] {
        [
            self.valence,
            self.arousal,
            self.eye_closure,
            self.gaze_x,
            self.gaze_y,
            self.head_x,
            self.head_y,
            self.head_z,
            self.pitch,
            self.yaw,
            self.roll,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.confidence.is_finite() && self.values().iter().all(|v| v.is_finite())
    }
}

/// Which feature groups reach the model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Eye closure, gaze and head pose/location only.
    #[serde(rename = "behavioral")]
    Behavioral,
    /// Behavioral plus valence and arousal.
    #[default]
    #[serde(rename = "behavioral+affect")]
    BehavioralAffect,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Behavioral => "behavioral",
            FeatureMode::BehavioralAffect => "behavioral+affect",
        }
    }

    pub fn frame_width(self) -> usize {
        match self {
            FeatureMode::Behavioral => 9,
            FeatureMode::BehavioralAffect => 11,
        }
    }

    pub fn segment_width(self) -> usize {
        match self {
            FeatureMode::Behavioral => 33,
            FeatureMode::BehavioralAffect => 37,
        }
    }
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "behavioral" => Ok(FeatureMode::Behavioral),
            "behavioral+affect" => Ok(FeatureMode::BehavioralAffect),
            other => Err(Error::Config(format!(
                "unknown feature mode '{other}' (expected behavioral or behavioral+affect)"
            ))),
        }
    }
}

/// An ordered run of frames from one recording.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSeries {
    pub id: String,
    pub fps: f64,
    pub frames: Vec<FrameFeatures>,
}

impl FrameSeries {
    pub fn new(id: impl Into<String>, fps: f64, frames: Vec<FrameFeatures>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::Input(format!("frame rate must be positive, got {fps}")));
        }
        if let Some(i) = frames.windows(2).position(|w| w[1].frame <= w[0].frame) {
            return Err(Error::Input(format!(
                "frame numbers not increasing at row {}",
                i + 1
            )));
        }
        Ok(FrameSeries {
            id: id.into(),
            fps,
            frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// One column of the series by model-facing index.
    pub fn column(&self, idx: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.values()[idx]).collect()
    }
}

/// Frame-level `T × n` matrix; behavioral mode drops valence and arousal.
pub fn select_features(series: &FrameSeries, mode: FeatureMode) -> Result<SeqTensor> {
    let skip = match mode {
        FeatureMode::Behavioral => AFFECT_FRAME_COLUMNS,
        FeatureMode::BehavioralAffect => 0,
    };
    let width = 11 - skip;
    let mut m = Mat::zeros((series.len(), width));
    for (mut row, f) in m.rows_mut().into_iter().zip(&series.frames) {
        for (dst, v) in row.iter_mut().zip(&f.values()[skip..]) {
            *dst = *v;
        }
    }
    SeqTensor::new(m)
}

/// Replaces frames whose confidence is below `min_confidence` with the
/// previous valid frame (or the first valid frame for a leading gap). Frame
/// numbers and confidences of imputed rows are kept. Returns the series and
/// the number of imputed rows.
pub fn impute(series: &FrameSeries, min_confidence: f64) -> Result<(FrameSeries, usize)> {
    let valid = |f: &FrameFeatures| f.confidence >= min_confidence && f.is_finite();
    let first = series
        .frames
        .iter()
        .find(|f| valid(f))
        .copied()
        .ok_or_else(|| {
            Error::Input(format!(
                "series '{}' has no frame with confidence >= {min_confidence}",
                series.id
            ))
        })?;
    let mut last = first;
    let mut imputed = 0;
    let frames = series
        .frames
        .iter()
        .map(|f| {
            if valid(f) {
                last = *f;
                *f
            } else {
                imputed += 1;
                FrameFeatures {
                    frame: f.frame,
                    confidence: f.confidence,
                    ..last
                }
            }
        })
        .collect();
    Ok((
        FrameSeries {
            id: series.id.clone(),
            fps: series.fps,
            frames,
        },
        imputed,
    ))
}
