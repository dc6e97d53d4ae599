//! Data preparation, training and evaluation steps shared by the
//! subcommands.

use serde::{Deserialize, Serialize};

use crate::detect::{
    config_digest, score, select_threshold, train_ae, train_bc, EvalReport, LossKind, ScoreSet,
    ThresholdMethod, TrainConfig,
};
use crate::error::{Error, Result};
use crate::features::FeatureMode;
use crate::io::{
    feature_order, load_split, FeatureLevel, Label, LoadOptions, Manifest, NormStats, Sample, Split,
};
use crate::models::{Arch, Model, ModelConfig};
use crate::seqnn::UpsampleMode;

/// Normalized train/val/test samples of one feature configuration.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub mode: FeatureMode,
    pub level: FeatureLevel,
    pub stats: NormStats,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl Prepared {
    /// Fits normalization on the engaged training samples and applies it to
    /// every split.
    pub fn new(
        mode: FeatureMode,
        level: FeatureLevel,
        mut train: Vec<Sample>,
        mut val: Vec<Sample>,
        mut test: Vec<Sample>,
    ) -> Result<Self> {
        let engaged: Vec<Sample> = train
            .iter()
            .filter(|s| s.label == Label::Engaged)
            .cloned()
            .collect();
        let stats = NormStats::fit(&engaged, feature_order(level, mode))?;
        for split in [&mut train, &mut val, &mut test] {
            stats.apply_all(split)?;
        }
        Ok(Prepared {
            mode,
            level,
            stats,
            train,
            val,
            test,
        })
    }

    pub fn load(manifest: &Manifest, mode: FeatureMode, level: FeatureLevel, opts: &LoadOptions) -> Result<Self> {
        let get = |split| load_split(manifest, split, mode, level, opts);
        Prepared::new(mode, level, get(Split::Train)?, get(Split::Val)?, get(Split::Test)?)
    }

    pub fn engaged_train(&self) -> Vec<Sample> {
        self.train
            .iter()
            .filter(|s| s.label == Label::Engaged)
            .cloned()
            .collect()
    }
}

/// Common sequence length of `samples`.
pub fn sequence_length(samples: &[Sample]) -> Result<usize> {
    let Some(first) = samples.first() else {
        return Err(Error::Input("no samples".into()));
    };
    let t = first.data.steps();
    if let Some(s) = samples.iter().find(|s| s.data.steps() != t) {
        return Err(Error::Input(format!(
            "sequences differ in length: '{}' has {} steps, '{}' has {t}",
            s.id,
            s.data.steps(),
            first.id
        )));
    }
    Ok(t)
}

/// Optional replacements for the default architecture settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelOverrides {
    pub levels: Option<usize>,
    pub hidden: Option<usize>,
    pub kernel: Option<usize>,
    pub dropout: Option<f64>,
    pub pool: Option<usize>,
    pub bottleneck: Option<usize>,
    pub upsample: Option<UpsampleMode>,
    pub per_frame: Option<bool>,
}

impl ModelOverrides {
    pub fn config(&self, arch: Arch, n: usize, t: usize) -> ModelConfig {
        let d = ModelConfig::full(arch, n, t);
        ModelConfig {
            levels: self.levels.unwrap_or(d.levels),
            hidden: self.hidden.unwrap_or(d.hidden),
            kernel: self.kernel.unwrap_or(d.kernel),
            dropout: self.dropout.unwrap_or(d.dropout),
            pool: self.pool.unwrap_or(d.pool),
            bottleneck: self.bottleneck.unwrap_or(d.bottleneck),
            upsample: self.upsample.unwrap_or(d.upsample),
            per_frame: self.per_frame.unwrap_or(d.per_frame),
            ..d
        }
    }
}

/// Everything that determines a trained model, digested into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub arch: Arch,
    pub features: FeatureMode,
    pub level: FeatureLevel,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub threshold_method: ThresholdMethod,
}

impl RunRecord {
    pub fn digest(&self) -> String {
        config_digest(self)
    }
}

/// Training log written beside a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub run: RunRecord,
    pub config_digest: String,
    pub n_engaged: usize,
    pub n_disengaged: usize,
    pub weight_pos: Option<f64>,
    pub losses: Vec<f64>,
}

/// Builds and trains one model. Autoencoders see only the engaged training
/// samples; classifiers see the whole training split.
pub fn train_model(
    prep: &Prepared,
    arch: Arch,
    overrides: &ModelOverrides,
    train: &TrainConfig,
    threshold_method: ThresholdMethod,
) -> Result<(Model, TrainRecord)> {
    let samples = if arch.is_autoencoder() {
        prep.engaged_train()
    } else {
        prep.train.clone()
    };
    let t = sequence_length(&samples)?;
    let n = samples[0].data.channels();
    let model_cfg = overrides.config(arch, n, t);
    let mut model = Model::build(model_cfg.clone(), train.seed)?;
    let (losses, weight_pos) = if arch.is_autoencoder() {
        (train_ae(&mut model, &samples, train)?, None)
    } else {
        let log = train_bc(&mut model, &samples, train)?;
        (log.losses, log.weight_pos)
    };
    let run = RunRecord {
        arch,
        features: prep.mode,
        level: prep.level,
        model: model_cfg,
        train: train.clone(),
        threshold_method,
    };
    let n_disengaged = samples.iter().filter(|s| s.label.is_positive()).count();
    let record = TrainRecord {
        config_digest: run.digest(),
        run,
        n_engaged: samples.len() - n_disengaged,
        n_disengaged,
        weight_pos,
        losses,
    };
    Ok((model, record))
}

/// Engaged samples used to pick the threshold: the training split for
/// autoencoders, the validation split (training split when there is none)
/// for classifiers.
pub fn threshold_samples(prep: &Prepared, arch: Arch) -> Vec<Sample> {
    let engaged = |v: &[Sample]| -> Vec<Sample> {
        v.iter().filter(|s| s.label == Label::Engaged).cloned().collect()
    };
    let val = engaged(&prep.val);
    if !arch.is_autoencoder() && !val.is_empty() {
        val
    } else {
        engaged(&prep.train)
    }
}

/// Picks the threshold from engaged scores and evaluates on `test`.
pub fn evaluate_model(
    model: &Model,
    normal: &[Sample],
    test: &[Sample],
    method: ThresholdMethod,
    digest: String,
) -> Result<(EvalReport, ScoreSet)> {
    let threshold = select_threshold(&score(model, normal)?, method)?;
    let scores = score(model, test)?;
    let report = EvalReport::from_scores(&scores, threshold, method, digest)?;
    Ok((report, scores))
}

/// Loss used when none is configured.
pub fn default_loss(arch: Arch) -> LossKind {
    if arch.is_autoencoder() {
        LossKind::Mse
    } else {
        LossKind::Bce
    }
}
