use std::sync::OnceLock;

use super::frame::{FeatureMode, FrameSeries};
use crate::error::{Error, Result};
use crate::seqnn::{Mat, SeqTensor};

/// AU45 intensity above which a local maximum counts as a blink.
pub const DEFAULT_BLINK_THRESHOLD: f64 = 1.0;

/// Quantities whose velocity/acceleration statistics enter the segment
/// vector, with their model-facing frame column. The three-component
/// location group is head location; gaze only has x and y.
const DYNAMIC_SOURCES: [(&str, usize); 8] = [
    ("gaze_x", 3),
    ("gaze_y", 4),
    ("head_x", 5),
    ("head_y", 6),
    ("head_z", 7),
    ("pitch", 8),
    ("yaw", 9),
    ("roll", 10),
];

pub const SEGMENT_LEN: usize = 37;
const AFFECT_SEGMENT_COLUMNS: usize = 4;

/// Column names in segment order: affect statistics, blink rate, then
/// `{vel,acc}_{mean,std}` for each dynamic source.
pub fn segment_feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names: Vec<String> = [
            "valence_mean",
            "valence_std",
            "arousal_mean",
            "arousal_std",
            "blink_rate",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for (src, _) in DYNAMIC_SOURCES {
            for stat in ["vel_mean", "vel_std", "acc_mean", "acc_std"] {
                names.push(format!("{src}_{stat}"));
            }
        }
        names
    })
}

/// Column names kept by `mode`.
pub fn segment_names_for(mode: FeatureMode) -> &'static [String] {
    let all = segment_feature_names();
    match mode {
        FeatureMode::BehavioralAffect => all,
        FeatureMode::Behavioral => &all[AFFECT_SEGMENT_COLUMNS..],
    }
}

/// Statistical summary of one segment, in [`segment_feature_names`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentFeatures {
    pub values: [f64; SEGMENT_LEN],
}

impl SegmentFeatures {
    pub fn get(&self, name: &str) -> Option<f64> {
        segment_feature_names()
            .iter()
            .position(|n| n == name)
            .map(|i| self.values[i])
    }

    pub fn select(&self, mode: FeatureMode) -> &[f64] {
        match mode {
            FeatureMode::BehavioralAffect => &self.values,
            FeatureMode::Behavioral => &self.values[AFFECT_SEGMENT_COLUMNS..],
        }
    }
}

fn check_len(x: &[f64], min: usize, what: &str) -> Result<()> {
    if x.len() < min {
        return Err(Error::Input(format!(
            "{what} needs at least {min} samples, got {}",
            x.len()
        )));
    }
    Ok(())
}

/// First difference scaled to units per second; length `T - 1`.
pub fn velocity(x: &[f64], fps: f64) -> Result<Vec<f64>> {
    check_len(x, 3, "velocity")?;
    Ok(x.windows(2).map(|w| (w[1] - w[0]) * fps).collect())
}

/// Second difference scaled to units per second²; length `T - 2`.
pub fn acceleration(x: &[f64], fps: f64) -> Result<Vec<f64>> {
    let v = velocity(x, fps)?;
    Ok(v.windows(2).map(|w| (w[1] - w[0]) * fps).collect())
}

/// Fraction of frames that are blink peaks: strict rise from the previous
/// frame, no rise into the next, and above `threshold`. A flat-topped peak
/// counts once, at its first frame.
pub fn blink_rate(eye_closure: &[f64], threshold: f64) -> Result<f64> {
    check_len(eye_closure, 3, "blink rate")?;
    let peaks = eye_closure
        .windows(3)
        .filter(|w| w[1] > threshold && w[1] > w[0] && w[1] >= w[2])
        .count();
    Ok(peaks as f64 / eye_closure.len() as f64)
}

/// Mean and population standard deviation. The mean gets one correction
/// pass so a constant series yields exactly that constant and zero spread.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let rough = x.iter().sum::<f64>() / n;
    let mean = rough + x.iter().map(|v| v - rough).sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn segment_features(series: &FrameSeries, blink_threshold: f64) -> Result<SegmentFeatures> {
    if series.len() < 3 {
        return Err(Error::Input(format!(
            "segment '{}' has {} frames, need at least 3",
            series.id,
            series.len()
        )));
    }
    let mut values = [0.0; SEGMENT_LEN];
    let (m, s) = mean_std(&series.column(0));
    values[0] = m;
    values[1] = s;
    let (m, s) = mean_std(&series.column(1));
    values[2] = m;
    values[3] = s;
    values[4] = blink_rate(&series.column(2), blink_threshold)?;
    for (k, (_, col)) in DYNAMIC_SOURCES.iter().enumerate() {
        let x = series.column(*col);
        let (vm, vs) = mean_std(&velocity(&x, series.fps)?);
        let (am, as_) = mean_std(&acceleration(&x, series.fps)?);
        let base = 5 + 4 * k;
        values[base..base + 4].copy_from_slice(&[vm, vs, am, as_]);
    }
    Ok(SegmentFeatures { values })
}

/// Stride and window length in frames for a window of `window_s` seconds.
pub fn window_geometry(fps: f64, window_s: f64, overlap: f64) -> Result<(usize, usize)> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Config(format!("overlap {overlap} outside [0, 1)")));
    }
    let w = (window_s * fps).round();
    if !(w >= 1.0) {
        return Err(Error::Config(format!(
            "window of {window_s} s at {fps} fps is empty"
        )));
    }
    let w = w as usize;
    let stride = ((w as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    Ok((w, stride))
}

/// `floor((T - w) / s) + 1` for `w ≤ T`.
pub fn window_count(len: usize, width: usize, stride: usize) -> usize {
    if width > len || width == 0 || stride == 0 {
        0
    } else {
        (len - width) / stride + 1
    }
}

/// Splits a recording into fixed-length windows; a trailing remainder
/// shorter than one stride past the last full window is dropped.
pub fn window(series: &FrameSeries, window_s: f64, overlap: f64) -> Result<Vec<FrameSeries>> {
    let (w, stride) = window_geometry(series.fps, window_s, overlap)?;
    if w > series.len() {
        return Err(Error::Input(format!(
            "series '{}' has {} frames, shorter than one {w}-frame window",
            series.id,
            series.len()
        )));
    }
    let count = window_count(series.len(), w, stride);
    Ok((0..count)
        .map(|i| FrameSeries {
            id: format!("{}#{i}", series.id),
            fps: series.fps,
            frames: series.frames[i * stride..i * stride + w].to_vec(),
        })
        .collect())
}

/// Segment-level `num_windows × 37` (or `× 33`) matrix for one recording.
pub fn segment_matrix(
    series: &FrameSeries,
    mode: FeatureMode,
    blink_threshold: f64,
    window_s: f64,
    overlap: f64,
) -> Result<SeqTensor> {
    let windows = window(series, window_s, overlap)?;
    let width = mode.segment_width();
    let mut m = Mat::zeros((windows.len(), width));
    for (mut row, w) in m.rows_mut().into_iter().zip(&windows) {
        let seg = segment_features(w, blink_threshold)?;
        for (dst, v) in row.iter_mut().zip(seg.select(mode)) {
            *dst = *v;
        }
    }
    SeqTensor::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FrameFeatures;

    fn constant_series(len: usize) -> FrameSeries {
        let frames = (0..len as u64)
            .map(|i| FrameFeatures {
                frame: i,
                confidence: 1.0,
                valence: 0.3,
                arousal: 0.2,
                eye_closure: 0.4,
                gaze_x: 0.1,
                gaze_y: -0.1,
                head_x: 10.0,
                head_y: -5.0,
                head_z: 550.0,
                pitch: 0.05,
                yaw: -0.02,
                roll: 0.01,
            })
            .collect();
        FrameSeries::new("c", 30.0, frames).unwrap()
    }

    #[test]
    fn names_are_37_unique() {
        let names = segment_feature_names();
        assert_eq!(names.len(), 37);
        let set: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(set.len(), 37);
        assert_eq!(segment_names_for(FeatureMode::Behavioral).len(), 33);
        assert_eq!(segment_names_for(FeatureMode::Behavioral)[0], "blink_rate");
    }

    #[test]
    fn differences() {
        assert_eq!(velocity(&[0.0, 1.0, 3.0, 6.0], 1.0).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(acceleration(&[0.0, 1.0, 3.0, 6.0], 1.0).unwrap(), vec![1.0, 1.0]);
        let ramp: Vec<f64> = (0..10).map(|i| 0.5 * i as f64).collect();
        assert!(velocity(&ramp, 30.0).unwrap().iter().all(|&v| v == 15.0));
        assert!(acceleration(&ramp, 30.0).unwrap().iter().all(|&a| a == 0.0));
        assert!(velocity(&[1.0, 2.0], 30.0).is_err());
    }

    #[test]
    fn blink_peaks() {
        assert_eq!(blink_rate(&[0.0; 10], 1.0).unwrap(), 0.0);
        let plateau = [0.0, 0.0, 2.0, 2.0, 0.0, 0.0];
        assert_eq!(blink_rate(&plateau, 1.0).unwrap(), 1.0 / 6.0);
        // Below threshold does not count.
        assert_eq!(blink_rate(&[0.0, 0.9, 0.0], 1.0).unwrap(), 0.0);
        // Alternating peaks hit the 0.5 ceiling only asymptotically.
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 1 { 3.0 } else { 0.0 }).collect();
        assert!(blink_rate(&alt, 1.0).unwrap() <= 0.5);
        assert!(blink_rate(&[], 1.0).is_err());
    }

    #[test]
    fn constant_segment_is_static() {
        let seg = segment_features(&constant_series(300), 1.0).unwrap();
        assert_eq!(seg.get("valence_mean"), Some(0.3));
        assert_eq!(seg.get("valence_std"), Some(0.0));
        assert_eq!(seg.get("blink_rate"), Some(0.0));
        assert!(seg.values[5..].iter().all(|&v| v == 0.0));
        assert_eq!(seg.select(FeatureMode::Behavioral).len(), 33);
    }

    #[test]
    fn window_counts() {
        assert_eq!(window_count(9000, 300, 150), 59);
        assert_eq!(window_count(300, 300, 150), 1);
        assert_eq!(window_count(600, 300, 300), 2);
        assert_eq!(window_count(299, 300, 150), 0);
        let s = constant_series(600);
        let w = window(&s, 10.0, 0.0).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(w[1].frames[0].frame, 300);
        assert!(window(&constant_series(200), 10.0, 0.5).is_err());
        assert!(window(&s, 10.0, 1.0).is_err());
    }

    #[test]
    fn five_minute_recording_matrix() {
        let s = constant_series(9000);
        let m = segment_matrix(&s, FeatureMode::BehavioralAffect, 1.0, 10.0, 0.5).unwrap();
        assert_eq!(m.dim(), (59, 37));
        let b = segment_matrix(&s, FeatureMode::Behavioral, 1.0, 10.0, 0.5).unwrap();
        assert_eq!(b.dim(), (59, 33));
    }
}
