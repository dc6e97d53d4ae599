//! Training, scoring, normal-only thresholding and evaluation metrics.

mod metrics;
mod report;
mod train;

pub use metrics::{
    confusion, pr_auc, pr_curve, roc_auc, roc_curve, select_threshold, threshold_from, trapezoid,
    Confusion, ScoreSet, ScoredSample, ThresholdMethod,
};
pub use report::{config_digest, evaluate, EvalReport};
pub use train::{
    default_weight_pos, derive_seed, score, train_ae, train_bc, LossKind, TrainConfig, TrainLog,
};
