use std::fmt;
use std::str::FromStr;

use ndarray::Zip;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{ScoreSet, ScoredSample};
use crate::error::{Error, Result};
use crate::io::{Label, Sample};
use crate::models::{reconstruction_error, Model, Output, OutputGrad};
use crate::seqnn::{bce_loss, mse_loss, AdamConfig, AdamState, Mat, Mode, Phase};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    Mse,
    Bce,
    WeightedBce,
}

impl LossKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Mse => "mse",
            LossKind::Bce => "bce",
            LossKind::WeightedBce => "weighted_bce",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mse" => Ok(LossKind::Mse),
            "bce" => Ok(LossKind::Bce),
            "weighted_bce" => Ok(LossKind::WeightedBce),
            other => Err(Error::Config(format!("unknown loss '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub gamma: f64,
    pub epochs: u32,
    pub batch_size: usize,
    pub seed: u64,
    pub loss: LossKind,
    /// Positive-class weight for `weighted_bce`; `None` derives it from the
    /// training split as `N_engaged / N_disengaged`.
    pub weight_pos: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            gamma: 0.99,
            epochs: 100,
            batch_size: 32,
            seed: 7,
            loss: LossKind::Mse,
            weight_pos: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must be in (0, 1], got {}", self.gamma)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if let Some(w) = self.weight_pos {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Config(format!("weight_pos must be positive, got {w}")));
            }
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            gamma: self.gamma,
            ..AdamConfig::default()
        }
    }
}

/// `N_neg / N_pos`, the positive-class weight that balances the two classes.
pub fn default_weight_pos(n_neg: usize, n_pos: usize) -> Result<f64> {
    if n_pos == 0 {
        return Err(Error::Input("no disengaged samples to weight".into()));
    }
    Ok(n_neg as f64 / n_pos as f64)
}

/// Loss history and resolved settings of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    /// Mean per-sample loss of each epoch.
    pub losses: Vec<f64>,
    pub weight_pos: Option<f64>,
}

/// SplitMix64-style mixing of several words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x243f_6a88_85a3_08d3;
    for &p in parts {
        let mut z = h ^ p.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h = z ^ (z >> 31);
    }
    h
}

/// Per-sample loss and the gradient of the model output.
type LossFn<'a> = dyn Fn(&Output, &Sample) -> Result<(f64, OutputGrad)> + Sync + 'a;

/// Mini-batch Adam. Per-sample gradients are computed in parallel and summed
/// in batch order, so results do not depend on the thread count.
fn fit(model: &mut Model, samples: &[Sample], cfg: &TrainConfig, loss: &LossFn<'_>) -> Result<Vec<f64>> {
    let mut adam = AdamState::new(cfg.adam(), &model.params())?;
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs as usize);
    model.set_mode(Mode::Train);
    for epoch in 0..cfg.epochs {
        adam.set_epoch(epoch);
        let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, epoch as u64]));
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let net = &*model;
            let results: Vec<(f64, Vec<Mat>)> = batch
                .par_iter()
                .map(|&i| {
                    let s = &samples[i];
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, epoch as u64, i as u64, 1]));
                    let (out, trace) = net.forward_trace(s.data.as_mat(), &mut Phase::Train(&mut rng))?;
                    let (l, g) = loss(&out, s)?;
                    let mut grads = net.zero_grads();
                    net.backward_trace(&trace, &g, &mut grads)?;
                    Ok((l, grads))
                })
                .collect::<Result<_>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut params = model.params_mut();
            for p in params.iter_mut() {
                p.zero_grad();
            }
            for (l, grads) in &results {
                total += l;
                for (p, g) in params.iter_mut().zip(grads) {
                    Zip::from(&mut p.grad).and(g).for_each(|a, &b| *a += scale * b);
                }
            }
            adam.step(&mut params)?;
        }
        let mean = total / samples.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Input(format!("training diverged at epoch {epoch}")));
        }
        log::debug!("epoch {epoch}: loss {mean:.6}");
        history.push(mean);
    }
    model.set_mode(Mode::Eval);
    Ok(history)
}

fn check_widths(model: &Model, samples: &[Sample]) -> Result<()> {
    let c = model.config();
    if let Some(s) = samples.iter().find(|s| s.data.dim() != (c.t, c.n)) {
        return Err(Error::Input(format!(
            "sample '{}' is {}x{}, model expects {}x{}",
            s.id,
            s.data.steps(),
            s.data.channels(),
            c.t,
            c.n
        )));
    }
    Ok(())
}

/// Trains an autoencoder on engaged samples to minimize reconstruction MSE.
/// Returns the per-epoch mean loss; the model is left in eval mode.
pub fn train_ae(model: &mut Model, samples: &[Sample], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if !model.is_autoencoder() {
        return Err(Error::Usage(format!("{} is not an autoencoder", model.config().arch)));
    }
    if let Some(s) = samples.iter().find(|s| s.label != Label::Engaged) {
        return Err(Error::Protocol(format!(
            "autoencoder training accepts engaged samples only; '{}' is {}",
            s.id, s.label
        )));
    }
    if samples.is_empty() {
        return Err(Error::Input("no training samples".into()));
    }
    check_widths(model, samples)?;
    fit(model, samples, cfg, &|out, s| match out {
        Output::Sequence(y) => {
            let (l, g) = mse_loss(s.data.as_mat(), y)?;
            Ok((l, OutputGrad::Sequence(g)))
        }
        Output::Probability(_) => unreachable!("autoencoder output"),
    })
}

/// Trains a binary classifier with (weighted) cross-entropy, disengaged being
/// the positive class.
pub fn train_bc(model: &mut Model, samples: &[Sample], cfg: &TrainConfig) -> Result<TrainLog> {
    cfg.validate()?;
    if model.is_autoencoder() {
        return Err(Error::Usage(format!("{} is not a classifier", model.config().arch)));
    }
    let n_pos = samples.iter().filter(|s| s.label.is_positive()).count();
    let n_neg = samples.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Input(format!(
            "classifier training needs both classes, got {n_neg} engaged and {n_pos} disengaged"
        )));
    }
    check_widths(model, samples)?;
    let weight_pos = match cfg.loss {
        LossKind::Bce => 1.0,
        LossKind::WeightedBce => match cfg.weight_pos {
            Some(w) => w,
            None => default_weight_pos(n_neg, n_pos)?,
        },
        LossKind::Mse => {
            return Err(Error::Config("classifiers train with bce or weighted_bce".into()))
        }
    };
    let losses = fit(model, samples, cfg, &|out, s| match out {
        Output::Probability(p) => {
            let (l, g) = bce_loss(*p, s.label.is_positive(), weight_pos);
            Ok((l, OutputGrad::Probability(g)))
        }
        Output::Sequence(_) => unreachable!("classifier output"),
    })?;
    Ok(TrainLog {
        losses,
        weight_pos: (cfg.loss == LossKind::WeightedBce).then_some(weight_pos),
    })
}

/// One score per sample: reconstruction MSE for autoencoders, disengagement
/// probability for classifiers. Computed in parallel, returned in id order.
pub fn score(model: &Model, samples: &[Sample]) -> Result<ScoreSet> {
    let entries = samples
        .par_iter()
        .map(|s| {
            let score = if model.is_autoencoder() {
                let y = model.forward_ae(&s.data)?;
                reconstruction_error(s.data.as_mat(), y.as_mat())?
            } else {
                model.forward_bc(&s.data)?
            };
            Ok(ScoredSample {
                id: s.id.clone(),
                score,
                label: s.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScoreSet::new(entries)
}
