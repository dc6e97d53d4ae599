mod common;

use common::brute_force_auc;
use engae::detect::{
    confusion, pr_auc, roc_auc, roc_curve, threshold_from, trapezoid, ScoreSet, ThresholdMethod,
};
use engae::features::{blink_rate, mean_std, window, window_count, FrameFeatures, FrameSeries};
use engae::io::{format_real, frame_csv_string, parse_frame_csv, Label};
use engae::seqnn::{AvgPoolTime, Layer, Mat, Phase, UpsampleMode, UpsampleTime};
use proptest::prelude::*;

fn labels_from(bits: &[bool]) -> Vec<Label> {
    bits.iter()
        .map(|&b| if b { Label::Disengaged } else { Label::Engaged })
        .collect()
}

/// Scores on a coarse grid (ties likely) with both classes present.
fn scored() -> impl Strategy<Value = (Vec<f64>, Vec<Label>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..12, n),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, b)| b.iter().any(|&x| x) && b.iter().any(|&x| !x))
            .prop_map(|(s, b)| (s.iter().map(|&v| v as f64 / 4.0).collect(), labels_from(&b)))
    })
}

fn dot(a: &Mat, b: &Mat) -> f64 {
    (a * b).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pooling_backward_is_the_adjoint(
        t in 1usize..8, c in 1usize..4, d in 1usize..5, seed in any::<u64>()
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x = common::random_mat(&mut rng, t * d, c, 1.0);
        let y = common::random_mat(&mut rng, t, c, 1.0);
        let pool = AvgPoolTime::new(d).unwrap();
        let (px, cache) = pool.forward(&x, &mut Phase::Eval).unwrap();
        let back = pool.backward(&cache, &y, &mut []);
        prop_assert!((dot(&px, &y) - dot(&x, &back)).abs() < 1e-12);

        for mode in [UpsampleMode::Nearest, UpsampleMode::Linear] {
            let up = UpsampleTime::new(d, mode).unwrap();
            let z = common::random_mat(&mut rng, t * d, c, 1.0);
            let (uy, cache) = up.forward(&y, &mut Phase::Eval).unwrap();
            let back = up.backward(&cache, &z, &mut []);
            prop_assert!((dot(&uy, &z) - dot(&y, &back)).abs() < 1e-12);
        }
        // Nearest upsampling then pooling restores the input.
        let up = UpsampleTime::new(d, UpsampleMode::Nearest).unwrap();
        let (uy, _) = up.forward(&y, &mut Phase::Eval).unwrap();
        let (back, _) = pool.forward(&uy, &mut Phase::Eval).unwrap();
        for (a, b) in back.iter().zip(y.iter()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_matches_pairwise_count((scores, labels) in scored()) {
        let set = ScoreSet::from_pairs(&scores, &labels).unwrap();
        let auc = roc_auc(&set).unwrap();
        prop_assert!((auc - brute_force_auc(&scores, &labels)).abs() < 1e-12);
        prop_assert!((auc - trapezoid(&roc_curve(&set).unwrap())).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn metrics_ignore_increasing_transforms((scores, labels) in scored()) {
        let set = ScoreSet::from_pairs(&scores, &labels).unwrap();
        for f in [|s: f64| 2.0 * s + 1.0, |s: f64| s.exp(), |s: f64| s * s * s] {
            let g = set.map_scores(f).unwrap();
            prop_assert_eq!(roc_auc(&g).unwrap(), roc_auc(&set).unwrap());
            prop_assert_eq!(pr_auc(&g).unwrap(), pr_auc(&set).unwrap());
        }
    }

    #[test]
    fn flipping_labels_mirrors_auc(
        n in 2usize..60, bits in prop::collection::vec(any::<bool>(), 60), seed in any::<u64>()
    ) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut scores: Vec<f64> = (0..n).map(|i| i as f64).collect();
        scores.shuffle(&mut rng);
        let labels = labels_from(&bits[..n]);
        prop_assume!(labels.iter().any(|l| l.is_positive()) && labels.iter().any(|l| !l.is_positive()));
        let flipped: Vec<Label> = labels
            .iter()
            .map(|l| if l.is_positive() { Label::Engaged } else { Label::Disengaged })
            .collect();
        let a = roc_auc(&ScoreSet::from_pairs(&scores, &labels).unwrap()).unwrap();
        let b = roc_auc(&ScoreSet::from_pairs(&scores, &flipped).unwrap()).unwrap();
        prop_assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn confusion_is_monotone_in_threshold((scores, labels) in scored(), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
        let set = ScoreSet::from_pairs(&scores, &labels).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = confusion(&set, lo);
        let b = confusion(&set, hi);
        prop_assert_eq!(a.total(), scores.len());
        prop_assert_eq!(b.total(), scores.len());
        prop_assert!(b.tp <= a.tp && b.fp <= a.fp);
    }

    #[test]
    fn thresholds_stay_in_range(values in prop::collection::vec(-10.0f64..10.0, 1..50), q in 0.0f64..=100.0) {
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let p = threshold_from(&values, ThresholdMethod::Percentile(q)).unwrap();
        prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        prop_assert_eq!(threshold_from(&values, ThresholdMethod::Max).unwrap(), hi);
        prop_assert_eq!(threshold_from(&values, ThresholdMethod::Percentile(100.0)).unwrap(), hi);
        prop_assert_eq!(threshold_from(&values, ThresholdMethod::Percentile(0.0)).unwrap(), lo);
    }

    #[test]
    fn blink_rate_bounds_and_monotonicity(
        x in prop::collection::vec(0.0f64..5.0, 3..200), t1 in 0.0f64..5.0, t2 in 0.0f64..5.0
    ) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = blink_rate(&x, lo).unwrap();
        let b = blink_rate(&x, hi).unwrap();
        prop_assert!((0.0..=0.5).contains(&a));
        prop_assert!(b <= a);
    }

    #[test]
    fn std_is_non_negative(x in prop::collection::vec(-1e3f64..1e3, 1..100)) {
        let (_, s) = mean_std(&x);
        prop_assert!(s >= 0.0);
    }

    #[test]
    fn window_count_matches_enumeration(len in 3usize..400, w in 3usize..100, stride in 1usize..100) {
        let brute = (0..len).filter(|&start| start % stride == 0 && start + w <= len).count();
        prop_assert_eq!(window_count(len, w, stride), brute);
    }

    #[test]
    fn formatted_reals_keep_nine_digits(v in -1e6f64..1e6) {
        let s = format_real(v);
        prop_assert!(!s.contains('e'));
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - v).abs() <= v.abs() * 5e-9 + 1e-300);
        // Formatting is idempotent on its own output.
        prop_assert_eq!(format_real(back), s);
    }

    #[test]
    fn frame_csv_round_trip(rows in prop::collection::vec(prop::array::uniform12(-1.0f64..1.0), 1..30)) {
        let frames: Vec<FrameFeatures> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let q = |v: f64| format_real(v).parse::<f64>().unwrap();
                FrameFeatures {
                    frame: i as u64,
                    confidence: q(r[0].abs()),
                    valence: q(r[1]),
                    arousal: q(r[2]),
                    eye_closure: q(r[3].abs() * 5.0),
                    gaze_x: q(r[4]),
                    gaze_y: q(r[5]),
                    head_x: q(r[6] * 100.0),
                    head_y: q(r[7] * 100.0),
                    head_z: q(500.0 + r[8] * 100.0),
                    pitch: q(r[9]),
                    yaw: q(r[10]),
                    roll: q(r[11]),
                }
            })
            .collect();
        let series = FrameSeries::new("p", 30.0, frames).unwrap();
        let text = frame_csv_string(&series);
        let back = parse_frame_csv(text.as_bytes(), "p.csv", "p", 30.0).unwrap();
        prop_assert_eq!(&back, &series);
        prop_assert_eq!(frame_csv_string(&back), text);
    }
}

#[test]
fn windows_cover_the_expected_frames() {
    let frames = (0..100u64)
        .map(|i| FrameFeatures {
            frame: i,
            confidence: 1.0,
            valence: 0.0,
            arousal: 0.0,
            eye_closure: 0.0,
            gaze_x: 0.0,
            gaze_y: 0.0,
            head_x: 0.0,
            head_y: 0.0,
            head_z: 600.0,
            pitch: 0.0,
            yaw: 0.0,
            roll: 0.0,
        })
        .collect();
    let s = FrameSeries::new("w", 10.0, frames).unwrap();
    let w = window(&s, 2.0, 0.5).unwrap();
    assert_eq!(w.len(), 9);
    assert_eq!(w[8].frames.first().unwrap().frame, 80);
    assert_eq!(w[8].frames.last().unwrap().frame, 99);
}
