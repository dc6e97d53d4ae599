//! Labeled synthetic engaged/disengaged frame-feature streams.
//!
//! Engaged streams sit near a per-subject baseline with slow first-order
//! autoregressive jitter: mildly positive valence and arousal, gaze and head
//! pose near the camera axis, and sparse regular blinks. Disengaged streams
//! start from the engaged stream of the same seed and add one or more
//! anomalies scaled by an intensity in `[0, 1]`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FrameFeatures, FrameSeries};
use crate::io::{write_frame_csv, write_manifest, Label, Manifest, ManifestEntry, Split};

/// Autoregressive coefficient of the engaged jitter.
pub const AR_COEFFICIENT: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyType {
    /// Sustained gaze and head-yaw excursion away from the screen.
    GazeAway,
    /// Extra, irregular blinks.
    HighBlink,
    /// Valence drifting negative with arousal deactivation.
    NegativeAffect,
    /// Large low-frequency pitch/yaw/roll swings.
    HeadMotion,
    /// Long eyes-closed plateaus.
    EyeClosure,
}

impl AnomalyType {
    pub const ALL: [AnomalyType; 5] = [
        AnomalyType::GazeAway,
        AnomalyType::HighBlink,
        AnomalyType::NegativeAffect,
        AnomalyType::HeadMotion,
        AnomalyType::EyeClosure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AnomalyType::GazeAway => "gaze_away",
            AnomalyType::HighBlink => "high_blink",
            AnomalyType::NegativeAffect => "negative_affect",
            AnomalyType::HeadMotion => "head_motion",
            AnomalyType::EyeClosure => "eye_closure",
        }
    }
}

impl fmt::Display for AnomalyType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AnomalyType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AnomalyType::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown anomaly type '{s}'")))
    }
}

/// Parses a comma-separated anomaly list such as `gaze_away,high_blink`.
pub fn parse_anomaly_list(s: &str) -> Result<Vec<AnomalyType>> {
    let mut out: Vec<AnomalyType> = s
        .split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    out.sort();
    out.dedup();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub fps: f64,
    pub duration_s: f64,
    pub anomaly_types: Vec<AnomalyType>,
    pub anomaly_intensity: f64,
    /// Use every listed anomaly in each disengaged sample instead of drawing
    /// one to three of them.
    pub pin_anomalies: bool,
    /// Innovation standard deviation of the jitter per frame feature, in
    /// model-facing column order.
    pub noise_std: [f64; 11],
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            fps: 30.0,
            duration_s: 10.0,
            anomaly_types: AnomalyType::ALL.to_vec(),
            anomaly_intensity: 0.8,
            pin_anomalies: false,
            //           val   aro   au45  gx     gy     hx   hy   hz   pitch  yaw    roll
            noise_std: [0.01, 0.01, 0.02, 0.008, 0.008, 0.8, 0.8, 1.5, 0.005, 0.005, 0.004],
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fps > 0.0 && self.fps.is_finite()) {
            return Err(Error::Config(format!("fps must be positive, got {}", self.fps)));
        }
        if !(self.duration_s > 0.0) || self.frames() < 3 {
            return Err(Error::Config("duration must cover at least 3 frames".into()));
        }
        if !(0.0..=1.0).contains(&self.anomaly_intensity) {
            return Err(Error::Config(format!(
                "anomaly intensity {} outside [0, 1]",
                self.anomaly_intensity
            )));
        }
        if self.noise_std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
            return Err(Error::Config("noise standard deviations must be >= 0".into()));
        }
        Ok(())
    }

    pub fn frames(&self) -> usize {
        (self.duration_s * self.fps).round() as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub series: FrameSeries,
    pub label: Label,
    pub anomaly_types: Vec<AnomalyType>,
}

fn normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    if sd == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sd).expect("finite sd").sample(rng)
}

/// Stationary AR(1) path with innovation standard deviation `sd`.
fn ar1(rng: &mut ChaCha8Rng, len: usize, sd: f64) -> Vec<f64> {
    let stationary = sd / (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();
    let mut x = normal(rng, stationary);
    (0..len)
        .map(|_| {
            let v = x;
            x = AR_COEFFICIENT * x + normal(rng, sd);
            v
        })
        .collect()
}

/// Adds a triangular blink of height `h` centred at `c`, spanning ±3 frames.
fn add_blink(au45: &mut [f64], c: usize, h: f64) {
    for k in -3i64..=3 {
        let i = c as i64 + k;
        if i >= 0 && (i as usize) < au45.len() {
            au45[i as usize] += h * (1.0 - k.abs() as f64 / 4.0);
        }
    }
}

/// Weight in `[0, 1]` that ramps up over `ramp` frames after `start` and
/// back down before `end`.
fn envelope(t: usize, start: usize, end: usize, ramp: usize) -> f64 {
    if t < start || t >= end {
        return 0.0;
    }
    let ramp = ramp.max(1) as f64;
    let up = ((t - start) as f64 + 1.0) / ramp;
    let down = (end - t) as f64 / ramp;
    up.min(down).min(1.0)
}

struct Columns {
    cols: [Vec<f64>; 11],
    confidence: Vec<f64>,
}

fn engaged_columns(config: &SynthConfig, seed: u64) -> Columns {
    let rng = &mut ChaCha8Rng::seed_from_u64(seed);
    let len = config.frames();
    let fps = config.fps;
    // Per-subject baseline: posture, seating distance and affect level.
    let base = [
        0.3 + normal(rng, 0.05),
        0.15 + normal(rng, 0.05),
        0.15 + normal(rng, 0.03).abs(),
        normal(rng, 0.03),
        normal(rng, 0.03),
        normal(rng, 20.0),
        normal(rng, 20.0),
        600.0 + normal(rng, 40.0),
        normal(rng, 0.05),
        normal(rng, 0.08),
        normal(rng, 0.03),
    ];
    let cols: [Vec<f64>; 11] = std::array::from_fn(|i| {
        ar1(rng, len, config.noise_std[i])
            .into_iter()
            .map(|v| base[i] + v)
            .collect()
    });
    let mut c = Columns {
        cols,
        confidence: (0..len).map(|_| rng.gen_range(0.95..=1.0)).collect(),
    };
    // Regular blinks every 3-5 s.
    let mut t = rng.gen_range(0.5..3.0) * fps;
    while (t as usize) < len {
        let h = rng.gen_range(2.0..3.0);
        add_blink(&mut c.cols[2], t as usize, h);
        t += rng.gen_range(3.0..5.0) * fps;
    }
    c
}

fn finish(config: &SynthConfig, id: &str, c: Columns) -> FrameSeries {
    let frames = (0..config.frames())
        .map(|t| {
            let v = |i: usize| c.cols[i][t];
            FrameFeatures {
                frame: t as u64,
                confidence: c.confidence[t],
                valence: v(0).clamp(-1.0, 1.0),
                arousal: v(1).clamp(-1.0, 1.0),
                eye_closure: v(2).clamp(0.0, 5.0),
                gaze_x: v(3),
                gaze_y: v(4),
                head_x: v(5),
                head_y: v(6),
                head_z: v(7),
                pitch: v(8),
                yaw: v(9),
                roll: v(10),
            }
        })
        .collect();
    FrameSeries::new(id, config.fps, frames).expect("generated frames are ordered")
}

/// An engaged sample determined entirely by `config.seed`.
pub fn gen_engaged(config: &SynthConfig) -> Result<LabeledSample> {
    gen_engaged_with_id(config, &format!("engaged_{}", config.seed))
}

fn gen_engaged_with_id(config: &SynthConfig, id: &str) -> Result<LabeledSample> {
    config.validate()?;
    let c = engaged_columns(config, config.seed);
    Ok(LabeledSample {
        series: finish(config, id, c),
        label: Label::Engaged,
        anomaly_types: Vec::new(),
    })
}

fn anomaly_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

/// A disengaged sample: the engaged stream of the same seed plus anomalies.
/// With intensity 0 the feature values equal the engaged stream's.
pub fn gen_disengaged(config: &SynthConfig) -> Result<LabeledSample> {
    gen_disengaged_with_id(config, &format!("disengaged_{}", config.seed))
}

fn gen_disengaged_with_id(config: &SynthConfig, id: &str) -> Result<LabeledSample> {
    config.validate()?;
    if config.anomaly_types.is_empty() {
        return Err(Error::Config(
            "disengaged generation needs at least one anomaly type".into(),
        ));
    }
    let mut c = engaged_columns(config, config.seed);
    let rng = &mut ChaCha8Rng::seed_from_u64(anomaly_seed(config.seed));
    let mut types = config.anomaly_types.clone();
    types.sort();
    types.dedup();
    if !config.pin_anomalies {
        let k = rng.gen_range(1..=types.len().min(3));
        types.shuffle(rng);
        types.truncate(k);
        types.sort();
    }
    let s = config.anomaly_intensity;
    let len = config.frames();
    let fps = config.fps;
    let ramp = (0.5 * fps) as usize;
    for a in &types {
        match a {
            AnomalyType::GazeAway => {
                let dur = (rng.gen_range(0.4..0.9) * len as f64) as usize;
                let start = rng.gen_range(0..=len - dur);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                let down = rng.gen_range(0.0..1.0);
                for t in 0..len {
                    let e = s * envelope(t, start, start + dur, ramp);
                    c.cols[9][t] += sign * 0.6 * e;
                    c.cols[3][t] += sign * 0.5 * e;
                    c.cols[4][t] += 0.3 * down * e;
                    c.cols[8][t] += 0.2 * down * e;
                }
            }
            AnomalyType::HighBlink => {
                let extra = (s * config.duration_s * 1.2).round() as usize;
                for _ in 0..extra {
                    let at = rng.gen_range(0..len);
                    let h = rng.gen_range(2.0..3.5);
                    add_blink(&mut c.cols[2], at, h);
                }
            }
            AnomalyType::NegativeAffect => {
                let start = rng.gen_range(0..=len / 5);
                let drop_v = rng.gen_range(0.7..1.1);
                let drop_a = rng.gen_range(0.3..0.6);
                let wobble = ar1(rng, len, 0.02);
                for t in 0..len {
                    let e = s * envelope(t, start, len, ramp);
                    c.cols[0][t] += -drop_v * e + s * wobble[t];
                    c.cols[1][t] += -drop_a * e + s * wobble[t];
                }
            }
            AnomalyType::HeadMotion => {
                let dur = (rng.gen_range(0.5..1.0) * len as f64) as usize;
                let start = rng.gen_range(0..=len - dur);
                let period = rng.gen_range(2.0..5.0) * fps;
                let phases: [f64; 3] = std::array::from_fn(|_| rng.gen_range(0.0..std::f64::consts::TAU));
                for t in 0..len {
                    let e = s * envelope(t, start, start + dur, ramp);
                    let w = std::f64::consts::TAU * t as f64 / period;
                    c.cols[8][t] += 0.25 * e * (w + phases[0]).sin();
                    c.cols[9][t] += 0.35 * e * (w + phases[1]).sin();
                    c.cols[10][t] += 0.2 * e * (w + phases[2]).sin();
                }
            }
            AnomalyType::EyeClosure => {
                let dur = ((rng.gen_range(1.0..4.0) * fps) as usize).min(len);
                let start = rng.gen_range(0..=len - dur);
                for t in 0..len {
                    c.cols[2][t] += 3.5 * s * envelope(t, start, start + dur, 5);
                }
            }
        }
    }
    Ok(LabeledSample {
        series: finish(config, id, c),
        label: Label::Disengaged,
        anomaly_types: types,
    })
}

/// Sample counts per split and label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub engaged_train: usize,
    pub engaged_val: usize,
    pub engaged_test: usize,
    pub disengaged_train: usize,
    pub disengaged_val: usize,
    pub disengaged_test: usize,
}

impl DatasetCounts {
    pub fn new(engaged_train: usize, engaged_test: usize, disengaged_test: usize) -> Self {
        DatasetCounts {
            engaged_train,
            engaged_test,
            disengaged_test,
            ..Default::default()
        }
    }

    pub fn total(&self) -> usize {
        self.engaged_train
            + self.engaged_val
            + self.engaged_test
            + self.disengaged_train
            + self.disengaged_val
            + self.disengaged_test
    }
}

/// SplitMix64 finalizer; spreads per-sample seeds derived from one master.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn group_tag(split: Split, label: Label) -> u64 {
    let s = match split {
        Split::Train => 0,
        Split::Val => 1,
        Split::Test => 2,
    };
    let l = match label {
        Label::Engaged => 0,
        Label::Disengaged => 1,
    };
    (s * 2 + l) as u64
}

/// Seed of the `index`-th sample of a split/label group.
pub fn sample_seed(master: u64, split: Split, label: Label, index: usize) -> u64 {
    mix(mix(master ^ (group_tag(split, label) << 56)) ^ index as u64)
}

/// Generates every sample of a dataset in memory, in manifest order.
pub fn gen_samples(
    config: &SynthConfig,
    counts: &DatasetCounts,
) -> Result<Vec<(ManifestEntry, LabeledSample)>> {
    config.validate()?;
    let groups = [
        (Split::Train, Label::Engaged, counts.engaged_train),
        (Split::Train, Label::Disengaged, counts.disengaged_train),
        (Split::Val, Label::Engaged, counts.engaged_val),
        (Split::Val, Label::Disengaged, counts.disengaged_val),
        (Split::Test, Label::Engaged, counts.engaged_test),
        (Split::Test, Label::Disengaged, counts.disengaged_test),
    ];
    let mut out = Vec::with_capacity(counts.total());
    for (split, label, n) in groups {
        for i in 0..n {
            let id = format!("{}_{}_{i:04}", split.as_str(), label.as_str());
            let cfg = SynthConfig {
                seed: sample_seed(config.seed, split, label, i),
                ..config.clone()
            };
            let sample = match label {
                Label::Engaged => gen_engaged_with_id(&cfg, &id)?,
                Label::Disengaged => gen_disengaged_with_id(&cfg, &id)?,
            };
            let entry = ManifestEntry {
                id: id.clone(),
                path: format!("samples/{id}.csv"),
                label,
                split,
                anomaly_types: sample
                    .anomaly_types
                    .iter()
                    .map(|a| a.as_str().to_string())
                    .collect(),
            };
            out.push((entry, sample));
        }
    }
    Ok(out)
}

/// Writes frame CSVs under `out_dir/samples/` and `out_dir/manifest.jsonl`.
pub fn gen_dataset(config: &SynthConfig, counts: &DatasetCounts, out_dir: &Path) -> Result<Manifest> {
    let samples = gen_samples(config, counts)?;
    let mut entries = Vec::with_capacity(samples.len());
    for (entry, sample) in samples {
        write_frame_csv(&out_dir.join(&entry.path), &sample.series)?;
        entries.push(entry);
    }
    let manifest = Manifest::new(out_dir, entries)?;
    write_manifest(&out_dir.join("manifest.jsonl"), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{blink_rate, mean_std, DEFAULT_BLINK_THRESHOLD};

    #[test]
    fn engaged_statistics() {
        let s = gen_engaged(&SynthConfig::default()).unwrap();
        assert_eq!(s.series.len(), 300);
        let (m, sd) = mean_std(&s.series.column(0));
        assert!(m > 0.0 && sd < 0.1, "valence mean {m}, std {sd}");
        let rate = blink_rate(&s.series.column(2), DEFAULT_BLINK_THRESHOLD).unwrap();
        assert!(rate < 0.02, "blink rate {rate}");
        assert!(rate > 0.0);
        assert_eq!(s, gen_engaged(&SynthConfig::default()).unwrap());
    }

    #[test]
    fn zero_intensity_matches_engaged() {
        let cfg = SynthConfig {
            anomaly_intensity: 0.0,
            pin_anomalies: true,
            ..SynthConfig::default()
        };
        let e = gen_engaged(&cfg).unwrap();
        let d = gen_disengaged(&cfg).unwrap();
        assert_eq!(e.series.frames, d.series.frames);
        assert_eq!(d.label, Label::Disengaged);
    }

    #[test]
    fn anomalies_have_their_signature() {
        for seed in 0..5 {
            let base = SynthConfig {
                seed,
                anomaly_intensity: 1.0,
                pin_anomalies: true,
                ..SynthConfig::default()
            };
            let gaze = SynthConfig {
                anomaly_types: vec![AnomalyType::GazeAway],
                ..base.clone()
            };
            let e = gen_engaged(&gaze).unwrap();
            let d = gen_disengaged(&gaze).unwrap();
            let max_abs = |s: &LabeledSample| s.series.column(9).iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(max_abs(&d) > max_abs(&e));

            let neg = SynthConfig {
                anomaly_types: vec![AnomalyType::NegativeAffect],
                ..base
            };
            let d = gen_disengaged(&neg).unwrap();
            assert!(mean_std(&d.series.column(0)).0 < 0.0);
            assert!(d.series.frames.iter().all(|f| (-1.0..=1.0).contains(&f.valence)));
        }
    }

    #[test]
    fn empty_anomaly_set_rejected() {
        let cfg = SynthConfig {
            anomaly_types: vec![],
            ..SynthConfig::default()
        };
        assert!(matches!(gen_disengaged(&cfg), Err(Error::Config(_))));
        assert!(gen_engaged(&cfg).is_ok());
    }

    #[test]
    fn draws_one_to_three_types() {
        for seed in 0..40 {
            let cfg = SynthConfig {
                seed,
                ..SynthConfig::default()
            };
            let d = gen_disengaged(&cfg).unwrap();
            assert!((1..=3).contains(&d.anomaly_types.len()));
        }
    }

    #[test]
    fn anomaly_list_parsing() {
        let l = parse_anomaly_list("high_blink, gaze_away,gaze_away").unwrap();
        assert_eq!(l, vec![AnomalyType::GazeAway, AnomalyType::HighBlink]);
        assert!(parse_anomaly_list("yawning").is_err());
    }

    #[test]
    fn sample_counts_and_ids() {
        let counts = DatasetCounts {
            disengaged_train: 2,
            ..DatasetCounts::new(4, 3, 3)
        };
        let cfg = SynthConfig {
            duration_s: 1.0,
            ..SynthConfig::default()
        };
        let s = gen_samples(&cfg, &counts).unwrap();
        assert_eq!(s.len(), 12);
        assert_eq!(s[0].0.id, "train_engaged_0000");
        assert_eq!(s.iter().filter(|(e, _)| e.label == Label::Disengaged).count(), 5);
        assert!(s
            .iter()
            .all(|(e, x)| e.label == x.label && e.id == x.series.id));
    }
}
