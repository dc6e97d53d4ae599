mod common;

use common::{central_diff, check_layer, max_rel_err, random_mat};
use engae::models::{Arch, Model, ModelConfig, Output, OutputGrad, TemporalBlock, Tcn};
use engae::seqnn::{bce_loss, mse_loss, Dropout, Mat, Phase, Relu, Sigmoid, UpsampleMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-4;

fn tiny(arch: Arch, upsample: UpsampleMode, per_frame: bool) -> ModelConfig {
    ModelConfig {
        arch,
        n: 2,
        t: 8,
        levels: 2,
        hidden: 3,
        kernel: 2,
        dropout: 0.1,
        pool: 2,
        bottleneck: 2,
        upsample,
        per_frame,
    }
}

/// Gradient of a whole model's output functional with respect to every
/// parameter and the input.
fn check_model(cfg: ModelConfig, seed: u64) -> f64 {
    let mut model = Model::build(cfg.clone(), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let x = random_mat(&mut rng, cfg.t, cfg.n, 1.0);
    let r = random_mat(&mut rng, cfg.t, cfg.n, 1.0);
    let objective = |m: &Model, x: &Mat| match m.forward_trace(x, &mut Phase::Eval).unwrap().0 {
        Output::Sequence(y) => (&y * &r).sum(),
        Output::Probability(p) => p,
    };
    let (_, trace) = model.forward_trace(&x, &mut Phase::Eval).unwrap();
    let grad = if model.is_autoencoder() {
        OutputGrad::Sequence(r.clone())
    } else {
        OutputGrad::Probability(1.0)
    };
    let mut grads = model.zero_grads();
    let gx = model.backward_trace(&trace, &grad, &mut grads).unwrap();
    let mut worst = max_rel_err(&gx, &central_diff(&x, |xp| objective(&model, xp)));
    for (i, analytic) in grads.iter().enumerate() {
        let value = model.params()[i].value.clone();
        let numeric = central_diff(&value, |w| {
            model.params_mut()[i].value.assign(w);
            objective(&model, &x)
        });
        model.params_mut()[i].value.assign(&value);
        worst = worst.max(max_rel_err(analytic, &numeric));
    }
    worst
}

#[test]
fn every_architecture_backpropagates_correctly() {
    for arch in Arch::ALL {
        for seed in 0..3 {
            let err = check_model(tiny(arch, UpsampleMode::Nearest, false), seed);
            assert!(err < TOL, "{arch} seed {seed}: {err:e}");
        }
    }
}

#[test]
fn model_variants_backpropagate_correctly() {
    let err = check_model(tiny(Arch::TcnAe, UpsampleMode::Linear, false), 5);
    assert!(err < TOL, "linear upsampling: {err:e}");
    for arch in [Arch::FfAe, Arch::FfBc] {
        let err = check_model(tiny(arch, UpsampleMode::Nearest, true), 6);
        assert!(err < TOL, "{arch} per frame: {err:e}");
    }
}

#[test]
fn residual_blocks_and_stacks() {
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Channel change exercises the 1x1 skip projection.
        let mut block = TemporalBlock::new(2, 3, 3, 2, 0.0, &mut rng).unwrap();
        let x = random_mat(&mut rng, 10, 2, 1.0);
        let err = check_layer(&mut block, &x, seed, None);
        assert!(err < TOL, "block seed {seed}: {err:e}");

        let mut tcn = Tcn::new(2, 3, 3, 2, 0.2, &mut rng).unwrap();
        let err = check_layer(&mut tcn, &x, seed, Some(seed));
        assert!(err < TOL, "tcn with dropout, seed {seed}: {err:e}");
    }
}

#[test]
fn activations_and_train_mode_dropout() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_mat(&mut rng, 6, 4, 2.0);
        assert!(check_layer(&mut Relu, &x, seed, None) < TOL);
        assert!(check_layer(&mut Sigmoid, &x, seed, None) < TOL);
        let mut d = Dropout::new(0.3).unwrap();
        assert!(check_layer(&mut d, &x, seed, Some(seed)) < TOL);
    }
}

#[test]
fn weighted_bce_derivative() {
    for &w in &[1.0, 2.5, 20.69] {
        for &y in &[true, false] {
            for i in 1..20 {
                let p = i as f64 / 20.0;
                let (_, g) = bce_loss(p, y, w);
                let h = 1e-6;
                let n = (bce_loss(p + h, y, w).0 - bce_loss(p - h, y, w).0) / (2.0 * h);
                assert!(common::rel_err(g, n) < TOL, "p={p} y={y} w={w}");
            }
        }
    }
}

#[test]
fn mse_gradient_with_respect_to_target_side() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = random_mat(&mut rng, 5, 3, 1.0);
    let x_hat = random_mat(&mut rng, 5, 3, 1.0);
    let (_, g) = mse_loss(&x, &x_hat).unwrap();
    let numeric = central_diff(&x_hat, |xh| mse_loss(&x, xh).unwrap().0);
    assert!(max_rel_err(&g, &numeric) < TOL);
}
