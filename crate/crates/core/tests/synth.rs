mod common;

use common::median;
use engae::detect::{roc_auc, ScoreSet};
use engae::features::{blink_rate, mean_std, DEFAULT_BLINK_THRESHOLD};
use engae::io::{read_frame_csv, read_manifest, Label, Split};
use engae::synth::{gen_dataset, gen_samples, AnomalyType, DatasetCounts, SynthConfig};

const YAW: usize = 9;
const VALENCE: usize = 0;
const EYE: usize = 2;

fn config(seed: u64, types: &[AnomalyType], intensity: f64) -> SynthConfig {
    SynthConfig {
        seed,
        anomaly_types: types.to_vec(),
        anomaly_intensity: intensity,
        pin_anomalies: true,
        ..SynthConfig::default()
    }
}

/// AUC of a hand-written detector that looks at one statistic only.
fn oracle_auc(cfg: &SynthConfig, stat: impl Fn(&[f64]) -> f64, col: usize) -> f64 {
    let samples = gen_samples(cfg, &DatasetCounts::new(0, 40, 40)).unwrap();
    let scores: Vec<f64> = samples.iter().map(|(_, s)| stat(&s.series.column(col))).collect();
    let labels: Vec<Label> = samples.iter().map(|(e, _)| e.label).collect();
    roc_auc(&ScoreSet::from_pairs(&scores, &labels).unwrap()).unwrap()
}

fn mean_abs(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64
}

#[test]
fn separability_grows_with_intensity() {
    let cases: [(AnomalyType, usize, fn(&[f64]) -> f64); 3] = [
        (AnomalyType::GazeAway, YAW, mean_abs),
        (AnomalyType::NegativeAffect, VALENCE, |x| -mean_std(x).0),
        (AnomalyType::HighBlink, EYE, |x| blink_rate(x, DEFAULT_BLINK_THRESHOLD).unwrap()),
    ];
    for (kind, col, stat) in cases {
        let medians: Vec<f64> = [0.25, 0.5, 1.0]
            .iter()
            .map(|&s| {
                let mut aucs: Vec<f64> = (0..5)
                    .map(|seed| oracle_auc(&config(seed, &[kind], s), stat, col))
                    .collect();
                median(&mut aucs)
            })
            .collect();
        assert!(
            medians[0] <= medians[1] && medians[1] <= medians[2],
            "{kind:?}: {medians:?}"
        );
        assert!(medians[2] > 0.9, "{kind:?} at full intensity: {medians:?}");
    }
}

#[test]
fn zero_intensity_is_indistinguishable() {
    let cfg = config(4, &[AnomalyType::GazeAway], 0.0);
    let auc = oracle_auc(&cfg, mean_abs, YAW);
    assert!((auc - 0.5).abs() < 0.2, "auc {auc}");
}

#[test]
fn dataset_on_disk_matches_counts_and_is_deterministic() {
    let counts = DatasetCounts {
        engaged_val: 2,
        disengaged_train: 1,
        disengaged_val: 1,
        ..DatasetCounts::new(3, 2, 2)
    };
    let cfg = SynthConfig {
        duration_s: 1.0,
        ..SynthConfig::default()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    gen_dataset(&cfg, &counts, a.path()).unwrap();
    gen_dataset(&cfg, &counts, b.path()).unwrap();

    let m = read_manifest(&a.path().join("manifest.jsonl")).unwrap();
    assert_eq!(m.entries.len(), counts.total());
    assert_eq!(m.count(Split::Train, Label::Engaged), 3);
    assert_eq!(m.count(Split::Train, Label::Disengaged), 1);
    assert_eq!(m.count(Split::Val, Label::Engaged), 2);
    assert_eq!(m.count(Split::Test, Label::Disengaged), 2);
    for e in &m.entries {
        let pa = m.resolve(e);
        let bytes = std::fs::read(&pa).unwrap();
        assert_eq!(bytes, std::fs::read(b.path().join(&e.path)).unwrap(), "{}", e.id);
        let series = read_frame_csv(&pa, 30.0).unwrap();
        assert_eq!(series.len(), 30);
        assert_eq!(e.anomaly_types.is_empty(), e.label == Label::Engaged);
    }
    assert_eq!(
        std::fs::read(a.path().join("manifest.jsonl")).unwrap(),
        std::fs::read(b.path().join("manifest.jsonl")).unwrap()
    );
}

#[test]
fn different_seeds_give_different_data() {
    let counts = DatasetCounts::new(2, 0, 1);
    let a = gen_samples(&SynthConfig { seed: 1, ..SynthConfig::default() }, &counts).unwrap();
    let b = gen_samples(&SynthConfig { seed: 2, ..SynthConfig::default() }, &counts).unwrap();
    for ((_, x), (_, y)) in a.iter().zip(&b) {
        assert_ne!(x.series, y.series);
    }
}
