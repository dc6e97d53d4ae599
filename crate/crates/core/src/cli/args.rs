use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::detect::{LossKind, ThresholdMethod};
use crate::features::FeatureMode;
use crate::io::{FeatureLevel, LoadOptions, Split};
use crate::seqnn::UpsampleMode;

use super::pipeline::ModelOverrides;

#[derive(Parser, Debug)]
#[command(
    name = "engae",
    version,
    about = "Disengagement detection with sequence autoencoders"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a labeled synthetic dataset and its manifest.
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Convert frame CSVs to segment-level feature CSVs.
    #[command(args_override_self = true)]
    Features(FeaturesArgs),
    /// Train one model and write checkpoint, statistics and log.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Score samples with a trained model.
    #[command(args_override_self = true)]
    Score(ScoreArgs),
    /// Evaluate a trained model on a labeled split.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
    /// Train and evaluate a set of models and feature sets.
    #[command(args_override_self = true)]
    Grid(GridArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth(_) => "synth",
            Command::Features(_) => "features",
            Command::Train(_) => "train",
            Command::Score(_) => "score",
            Command::Eval(_) => "eval",
            Command::Grid(_) => "grid",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Synth(a) => &a.common,
            Command::Features(a) => &a.common,
            Command::Train(a) => &a.common,
            Command::Score(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::Grid(a) => &a.common,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat `key = value` file; command-line flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output file or directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads (capped by ENGAE_THREADS).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, default_value = "frame")]
    pub level: FeatureLevel,
    #[arg(long, default_value = "behavioral+affect")]
    pub features: FeatureMode,
}

#[derive(Args, Debug, Clone)]
pub struct LoadArgs {
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Segment window length in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub window: f64,
    /// Fraction of a window shared with the next one.
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, default_value_t = crate::features::DEFAULT_BLINK_THRESHOLD)]
    pub blink_threshold: f64,
    /// Frames below this confidence are forward-filled.
    #[arg(long, default_value_t = 0.5)]
    pub min_confidence: f64,
}

impl LoadArgs {
    pub fn options(&self) -> LoadOptions {
        LoadOptions {
            fps: self.fps,
            blink_threshold: self.blink_threshold,
            min_confidence: self.min_confidence,
            window_s: self.window,
            overlap: self.overlap,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    #[arg(long)]
    pub levels: Option<usize>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub kernel: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Time pooling factor of the TCN autoencoder.
    #[arg(long)]
    pub pool: Option<usize>,
    #[arg(long)]
    pub bottleneck: Option<usize>,
    #[arg(long)]
    pub upsample: Option<UpsampleMode>,
    /// Feedforward models: apply the dense layers frame by frame.
    #[arg(long)]
    pub per_frame: bool,
}

impl ModelArgs {
    pub fn overrides(&self) -> ModelOverrides {
        ModelOverrides {
            levels: self.levels,
            hidden: self.hidden,
            kernel: self.kernel,
            dropout: self.dropout,
            pool: self.pool,
            bottleneck: self.bottleneck,
            upsample: self.upsample,
            per_frame: self.per_frame.then_some(true),
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    /// Per-epoch learning-rate decay factor.
    #[arg(long, default_value_t = 0.99)]
    pub gamma: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: u32,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    /// mse, bce or weighted_bce; defaults to mse for autoencoders and bce
    /// for classifiers.
    #[arg(long)]
    pub loss: Option<LossKind>,
    /// Positive-class weight; defaults to N_engaged / N_disengaged.
    #[arg(long)]
    pub weight_pos: Option<f64>,
    /// max, percentile(Q) or mean_plus_k_std(K).
    #[arg(long, default_value = "percentile(99)")]
    pub threshold_method: ThresholdMethod,
}

#[derive(Args, Debug, Clone)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 400)]
    pub engaged_train: usize,
    #[arg(long, default_value_t = 0)]
    pub engaged_val: usize,
    #[arg(long, default_value_t = 100)]
    pub engaged_test: usize,
    #[arg(long, default_value_t = 0)]
    pub disengaged_train: usize,
    #[arg(long, default_value_t = 0)]
    pub disengaged_val: usize,
    #[arg(long, default_value_t = 100)]
    pub disengaged_test: usize,
    /// Comma-separated anomaly types.
    #[arg(
        long,
        default_value = "gaze_away,high_blink,negative_affect,head_motion,eye_closure"
    )]
    pub anomalies: String,
    #[arg(long, default_value_t = 0.8)]
    pub intensity: f64,
    /// Sample length in seconds.
    #[arg(long, default_value_t = 10.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
    /// Inject every listed anomaly into each disengaged sample.
    #[arg(long)]
    pub pin_anomalies: bool,
}

#[derive(Args, Debug, Clone)]
pub struct FeaturesArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Convert every sample listed in this manifest.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Frame CSV files to convert.
    pub inputs: Vec<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub load: LoadArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// tcn_ae, lstm_ae, ff_ae, tcn_bc, lstm_bc or ff_bc.
    #[arg(long)]
    pub arch: Option<crate::models::Arch>,
}

#[derive(Args, Debug, Clone)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Directory written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Manifest split to score; all entries when omitted.
    #[arg(long)]
    pub split: Option<Split>,
    /// Frame CSV files to score.
    pub inputs: Vec<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub load: LoadArgs,
    /// Directory written by `train`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    pub split: Split,
    /// Overrides the method recorded at training time.
    #[arg(long)]
    pub threshold_method: Option<ThresholdMethod>,
    /// Directory for ROC and precision-recall point CSVs.
    #[arg(long)]
    pub curves: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct GridArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub load: LoadArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Comma-separated model names; `tcn_bc+weighted` uses weighted BCE.
    #[arg(
        long,
        default_value = "ff_ae,ff_bc,lstm_ae,lstm_bc,tcn_ae,tcn_bc,tcn_bc+weighted"
    )]
    pub models: String,
    /// Comma-separated feature sets.
    #[arg(long, default_value = "behavioral,behavioral+affect")]
    pub feature_sets: String,
}
