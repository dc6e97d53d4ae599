//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use engae::io::Label;
use engae::seqnn::{zero_grads, Layer, Mat, Phase};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Finite-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Relative error with a floor so that entries where both gradients are
/// essentially zero do not blow up.
pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_shape_simple_fn((rows, cols), || rng.gen_range(-scale..scale))
}

/// Central difference of `f` with respect to every element of `x`.
pub fn central_diff(x: &Mat, mut f: impl FnMut(&Mat) -> f64) -> Mat {
    let mut xp = x.clone();
    let mut g = Mat::zeros(x.raw_dim());
    for idx in 0..x.len() {
        let (r, c) = (idx / x.ncols(), idx % x.ncols());
        let orig = xp[[r, c]];
        xp[[r, c]] = orig + FD_STEP;
        let up = f(&xp);
        xp[[r, c]] = orig - FD_STEP;
        let down = f(&xp);
        xp[[r, c]] = orig;
        g[[r, c]] = (up - down) / (2.0 * FD_STEP);
    }
    g
}

pub fn max_rel_err(analytic: &Mat, numeric: &Mat) -> f64 {
    assert_eq!(analytic.dim(), numeric.dim());
    analytic
        .iter()
        .zip(numeric.iter())
        .map(|(&a, &n)| rel_err(a, n))
        .fold(0.0, f64::max)
}

/// Checks a layer's input and parameter gradients on the scalar objective
/// `sum(r ⊙ layer(x))` for a fixed random `r`. `phase_seed` reseeds the
/// dropout generator for every evaluation so the mask stays fixed.
/// Returns the largest relative error found.
pub fn check_layer<L: Layer>(layer: &mut L, x: &Mat, seed: u64, phase_seed: Option<u64>) -> f64 {
    let run = |l: &L, x: &Mat| -> (Mat, L::Cache) {
        match phase_seed {
            Some(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                l.forward(x, &mut Phase::Train(&mut rng)).unwrap()
            }
            None => l.forward(x, &mut Phase::Eval).unwrap(),
        }
    };
    let (y, cache) = run(layer, x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
    let r = random_mat(&mut rng, y.nrows(), y.ncols(), 1.0);
    let objective = |l: &L, x: &Mat| (&run(l, x).0 * &r).sum();

    let mut grads = zero_grads(&layer.params());
    let gx = layer.backward(&cache, &r, &mut grads);
    let mut worst = max_rel_err(&gx, &central_diff(x, |xp| objective(layer, xp)));

    for (pi, analytic) in grads.iter().enumerate() {
        let value = layer.params()[pi].value.clone();
        let numeric = central_diff(&value, |w| {
            layer.params_mut()[pi].value.assign(w);
            objective(layer, x)
        });
        layer.params_mut()[pi].value.assign(&value);
        worst = worst.max(max_rel_err(analytic, &numeric));
    }
    worst
}

/// P(score_pos > score_neg) + ½·P(tie) over all positive/negative pairs.
pub fn brute_force_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !labels[i].is_positive() {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j].is_positive() {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Random scores drawn from a small grid so ties are common, with both
/// classes present.
pub fn random_scored(rng: &mut ChaCha8Rng, n: usize) -> (Vec<f64>, Vec<Label>) {
    loop {
        let grid = rng.gen_range(2..20) as f64;
        let scores: Vec<f64> = (0..n).map(|_| (rng.gen::<f64>() * grid).floor() / grid).collect();
        let labels: Vec<Label> = (0..n)
            .map(|_| if rng.gen_bool(0.4) { Label::Disengaged } else { Label::Engaged })
            .collect();
        if labels.iter().any(|l| l.is_positive()) && labels.iter().any(|l| !l.is_positive()) {
            return (scores, labels);
        }
    }
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}
