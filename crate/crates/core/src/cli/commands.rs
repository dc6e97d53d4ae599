use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::args::{
    Command, EvalArgs, FeaturesArgs, GridArgs, ScoreArgs, SynthArgs, TrainArgs, TrainingArgs,
};
use super::pipeline::{
    default_loss, evaluate_model, threshold_samples, train_model, Prepared, TrainRecord,
};
use crate::detect::{
    config_digest, pr_curve, roc_curve, score, EvalReport, LossKind, TrainConfig,
};
use crate::error::{Error, Result};
use crate::features::{impute, segment_matrix, FeatureMode};
use crate::io::{
    feature_order, format_real, read_frame_csv, read_manifest, series_to_tensor, write_atomic,
    write_segment_csv, FeatureLevel, Label, Manifest, NormStats, Sample, Split,
};
use crate::models::{load_checkpoint, save_checkpoint, Arch, Model};
use crate::synth::{gen_dataset, parse_anomaly_list, DatasetCounts, SynthConfig};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const STATS_FILE: &str = "stats.json";
pub const LOG_FILE: &str = "train_log.json";

pub(super) fn dispatch(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train(a),
        Command::Score(a) => score_cmd(a),
        Command::Eval(a) => eval(a),
        Command::Grid(a) => grid(a),
    }
}

fn required<'a, T>(v: &'a Option<T>, flag: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::Usage(format!("missing required --{flag}")))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn synth(a: &SynthArgs) -> Result<()> {
    let config = SynthConfig {
        seed: a.common.seed,
        fps: a.fps,
        duration_s: a.duration,
        anomaly_types: parse_anomaly_list(&a.anomalies)?,
        anomaly_intensity: a.intensity,
        pin_anomalies: a.pin_anomalies,
        ..SynthConfig::default()
    };
    let counts = DatasetCounts {
        engaged_train: a.engaged_train,
        engaged_val: a.engaged_val,
        engaged_test: a.engaged_test,
        disengaged_train: a.disengaged_train,
        disengaged_val: a.disengaged_val,
        disengaged_test: a.disengaged_test,
    };
    let out = a.common.out.clone().unwrap_or_else(|| PathBuf::from("data"));
    let manifest = gen_dataset(&config, &counts, &out)?;
    println!("{}", out.join("manifest.jsonl").display());
    for split in [Split::Train, Split::Val, Split::Test] {
        println!(
            "{split}: {} engaged, {} disengaged",
            manifest.count(split, Label::Engaged),
            manifest.count(split, Label::Disengaged)
        );
    }
    Ok(())
}

fn features(a: &FeaturesArgs) -> Result<()> {
    let mut inputs: Vec<(String, PathBuf)> = Vec::new();
    if let Some(m) = &a.manifest {
        let manifest = read_manifest(m)?;
        inputs.extend(
            manifest
                .entries
                .iter()
                .map(|e| (e.id.clone(), manifest.resolve(e))),
        );
    }
    for p in &a.inputs {
        let id = p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        inputs.push((id, p.clone()));
    }
    if inputs.is_empty() {
        return Err(Error::Usage("give --manifest or frame CSV files".into()));
    }
    let out = a.common.out.clone().unwrap_or_else(|| PathBuf::from("features"));
    let opts = a.load.options();
    let mode = a.common.features;
    inputs.par_iter().try_for_each(|(id, path)| {
        let series = read_frame_csv(path, opts.fps)?;
        let (clean, _) = impute(&series, opts.min_confidence)?;
        let m = segment_matrix(&clean, mode, opts.blink_threshold, opts.window_s, opts.overlap)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
        write_segment_csv(&out.join(format!("{id}.csv")), m.as_mat(), mode)
    })?;
    println!("{} segment files in {}", inputs.len(), out.display());
    Ok(())
}

fn train_config(t: &TrainingArgs, arch: Arch, seed: u64) -> TrainConfig {
    TrainConfig {
        lr: t.lr,
        gamma: t.gamma,
        epochs: t.epochs,
        batch_size: t.batch_size,
        seed,
        loss: t.loss.unwrap_or(default_loss(arch)),
        weight_pos: t.weight_pos,
    }
}

fn train(a: &TrainArgs) -> Result<()> {
    let arch = *required(&a.arch, "arch")?;
    let manifest = read_manifest(required(&a.manifest, "manifest")?)?;
    let cfg = train_config(&a.training, arch, a.common.seed);
    if arch.is_autoencoder() {
        if cfg.loss != LossKind::Mse {
            return Err(Error::Config(format!("{arch} trains with the mse loss")));
        }
        if let Some(e) = manifest
            .split(Split::Train)
            .find(|e| e.label == Label::Disengaged)
        {
            return Err(Error::Protocol(format!(
                "autoencoder training accepts engaged samples only; train entry '{}' is disengaged",
                e.id
            )));
        }
    }
    let prep = Prepared::load(&manifest, a.common.features, a.common.level, &a.load.options())?;
    let (model, record) = train_model(
        &prep,
        arch,
        &a.model.overrides(),
        &cfg,
        a.training.threshold_method,
    )?;
    let out = a.common.out.clone().unwrap_or_else(|| PathBuf::from("model"));
    write_atomic(&out.join(CHECKPOINT_FILE), &save_checkpoint(&model))?;
    prep.stats.write(&out.join(STATS_FILE))?;
    write_atomic(&out.join(LOG_FILE), to_json(&record).as_bytes())?;
    let first = record.losses.first().copied().unwrap_or(f64::NAN);
    let last = record.losses.last().copied().unwrap_or(f64::NAN);
    eprintln!("loss {first:.6} -> {last:.6} over {} epochs", record.losses.len());
    println!("{}", out.join(CHECKPOINT_FILE).display());
    Ok(())
}

/// A trained model with the preprocessing it expects.
struct Loaded {
    model: Model,
    stats: NormStats,
    record: TrainRecord,
    mode: FeatureMode,
    level: FeatureLevel,
}

fn load_model_dir(dir: &Path) -> Result<Loaded> {
    let ckpt_path = dir.join(CHECKPOINT_FILE);
    let bytes = std::fs::read(&ckpt_path).map_err(|e| Error::io(&ckpt_path, e))?;
    let model = load_checkpoint(&bytes)
        .map_err(|e| Error::Format(format!("{}: {e}", ckpt_path.display())))?;
    let stats = NormStats::read(&dir.join(STATS_FILE))?;
    let log_path = dir.join(LOG_FILE);
    let text = std::fs::read_to_string(&log_path).map_err(|e| Error::io(&log_path, e))?;
    let record: TrainRecord = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", log_path.display())))?;
    let (mode, level) = (record.run.features, record.run.level);
    if stats.feature_order != feature_order(level, mode) {
        return Err(Error::Format(format!(
            "{}: statistics do not match {level}-level {mode} features",
            dir.display()
        )));
    }
    if model.config() != &record.run.model {
        return Err(Error::Format(format!(
            "{}: checkpoint does not match the training log",
            dir.display()
        )));
    }
    Ok(Loaded {
        model,
        stats,
        record,
        mode,
        level,
    })
}

fn load_normalized(
    loaded: &Loaded,
    manifest: &Manifest,
    split: Option<Split>,
    load: &super::args::LoadArgs,
) -> Result<Vec<Sample>> {
    let opts = load.options();
    manifest
        .entries
        .par_iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .map(|e| {
            let path = manifest.resolve(e);
            let series = read_frame_csv(&path, opts.fps)?;
            let data = series_to_tensor(&series, loaded.mode, loaded.level, &opts)
                .map_err(|err| Error::Input(format!("{}: {err}", path.display())))?;
            let mut s = Sample::new(e.id.clone(), data, e.label);
            loaded.stats.apply(&mut s)?;
            Ok(s)
        })
        .collect()
}

fn score_cmd(a: &ScoreArgs) -> Result<()> {
    let loaded = load_model_dir(required(&a.model, "model")?)?;
    let mut samples = Vec::new();
    if let Some(m) = &a.manifest {
        samples = load_normalized(&loaded, &read_manifest(m)?, a.split, &a.load)?;
    }
    let opts = a.load.options();
    for p in &a.inputs {
        let series = read_frame_csv(p, opts.fps)?;
        let data = series_to_tensor(&series, loaded.mode, loaded.level, &opts)
            .map_err(|err| Error::Input(format!("{}: {err}", p.display())))?;
        let mut s = Sample::new(series.id.clone(), data, Label::Engaged);
        loaded.stats.apply(&mut s)?;
        samples.push(s);
    }
    if samples.is_empty() {
        return Err(Error::Usage("give --manifest or frame CSV files".into()));
    }
    let scores = score(&loaded.model, &samples)?;
    let with_labels = a.manifest.is_some() && a.inputs.is_empty();
    let mut out = String::from(if with_labels { "id,score,label\n" } else { "id,score\n" });
    for e in scores.entries() {
        if with_labels {
            let _ = writeln!(out, "{},{},{}", e.id, e.score, e.label);
        } else {
            let _ = writeln!(out, "{},{}", e.id, e.score);
        }
    }
    match &a.common.out {
        Some(p) => write_atomic(p, out.as_bytes()),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn curve_csv(header: &str, points: &[(f64, f64)]) -> String {
    let mut s = format!("{header}\n");
    for (x, y) in points {
        let _ = writeln!(s, "{},{}", format_real(*x), format_real(*y));
    }
    s
}

#[derive(Serialize)]
struct EvalDigest<'a> {
    training: &'a str,
    threshold_method: String,
    split: Split,
    normal_split: &'a str,
}

fn eval(a: &EvalArgs) -> Result<()> {
    let loaded = load_model_dir(required(&a.model, "model")?)?;
    let manifest = read_manifest(required(&a.manifest, "manifest")?)?;
    let arch = loaded.record.run.arch;
    let method = a.threshold_method.unwrap_or(loaded.record.run.threshold_method);
    let train = load_normalized(&loaded, &manifest, Some(Split::Train), &a.load)?;
    let val = load_normalized(&loaded, &manifest, Some(Split::Val), &a.load)?;
    let test = load_normalized(&loaded, &manifest, Some(a.split), &a.load)?;
    let prep = Prepared {
        mode: loaded.mode,
        level: loaded.level,
        stats: loaded.stats.clone(),
        train,
        val,
        test,
    };
    let normal = threshold_samples(&prep, arch);
    let normal_split = if !arch.is_autoencoder() && prep.val.iter().any(|s| s.label == Label::Engaged) {
        "val"
    } else {
        "train"
    };
    let digest = config_digest(&EvalDigest {
        training: &loaded.record.config_digest,
        threshold_method: method.to_string(),
        split: a.split,
        normal_split,
    });
    let (report, scores) = evaluate_model(&loaded.model, &normal, &prep.test, method, digest)?;
    let out = a.common.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    report.write(&out)?;
    if let Some(dir) = &a.curves {
        write_atomic(&dir.join("roc.csv"), curve_csv("fpr,tpr", &roc_curve(&scores)?).as_bytes())?;
        write_atomic(
            &dir.join("pr.csv"),
            curve_csv("recall,precision", &pr_curve(&scores)?).as_bytes(),
        )?;
    }
    eprintln!(
        "auc_roc {:.4} auc_pr {:.4} (baseline {:.4}) threshold {} [{}]",
        report.auc_roc, report.auc_pr, report.pr_baseline, report.threshold, method
    );
    println!("{}", out.display());
    Ok(())
}

/// One grid model: an architecture, optionally with weighted BCE.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridModel {
    pub arch: Arch,
    pub weighted: bool,
}

impl GridModel {
    /// Canonical grid order.
    pub const ALL: [GridModel; 7] = [
        GridModel { arch: Arch::FfAe, weighted: false },
        GridModel { arch: Arch::FfBc, weighted: false },
        GridModel { arch: Arch::LstmAe, weighted: false },
        GridModel { arch: Arch::LstmBc, weighted: false },
        GridModel { arch: Arch::TcnAe, weighted: false },
        GridModel { arch: Arch::TcnBc, weighted: false },
        GridModel { arch: Arch::TcnBc, weighted: true },
    ];

    pub fn name(&self) -> String {
        if self.weighted {
            format!("{}+weighted", self.arch)
        } else {
            self.arch.to_string()
        }
    }
}

impl std::str::FromStr for GridModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, weighted) = match s.strip_suffix("+weighted") {
            Some(n) => (n, true),
            None => (s, false),
        };
        let arch: Arch = name.parse()?;
        if weighted && arch.is_autoencoder() {
            return Err(Error::Config(format!("'{s}': only classifiers take a weighted loss")));
        }
        Ok(GridModel { arch, weighted })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridRow {
    pub model: String,
    pub features: FeatureMode,
    pub auc_roc: f64,
    pub auc_pr: f64,
    pub pr_baseline: f64,
    pub threshold: f64,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tp: usize,
    pub config_digest: String,
}

fn parse_list<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(str::parse)
        .collect()
}

fn grid(a: &GridArgs) -> Result<()> {
    // Parse everything before any training starts.
    let mut models: Vec<GridModel> = parse_list(&a.models)?;
    let mut sets: Vec<FeatureMode> = parse_list(&a.feature_sets)?;
    if models.is_empty() || sets.is_empty() {
        return Err(Error::Config("grid needs at least one model and one feature set".into()));
    }
    models.sort_by_key(|m| GridModel::ALL.iter().position(|x| x == m));
    models.dedup();
    sets.sort_by_key(|m| *m != FeatureMode::Behavioral);
    sets.dedup();
    let manifest = read_manifest(required(&a.manifest, "manifest")?)?;
    let opts = a.load.options();
    let prepared: Vec<Prepared> = sets
        .iter()
        .map(|&mode| Prepared::load(&manifest, mode, a.common.level, &opts))
        .collect::<Result<_>>()?;
    let cells: Vec<(GridModel, usize)> = models
        .iter()
        .flat_map(|&m| (0..sets.len()).map(move |i| (m, i)))
        .collect();
    let rows: Vec<GridRow> = cells
        .par_iter()
        .map(|&(gm, i)| {
            let prep = &prepared[i];
            let mut cfg = train_config(&a.training, gm.arch, a.common.seed);
            if gm.weighted {
                cfg.loss = LossKind::WeightedBce;
            }
            let cell = format!("{} / {}", gm.name(), prep.mode);
            let run = || -> Result<GridRow> {
                let (model, record) = train_model(
                    prep,
                    gm.arch,
                    &a.model.overrides(),
                    &cfg,
                    a.training.threshold_method,
                )?;
                let normal = threshold_samples(prep, gm.arch);
                let (report, _) = evaluate_model(
                    &model,
                    &normal,
                    &prep.test,
                    a.training.threshold_method,
                    record.config_digest.clone(),
                )?;
                Ok(row(gm, prep.mode, &report))
            };
            let r = run().map_err(|e| Error::Input(format!("grid cell {cell}: {e}")))?;
            eprintln!("{cell}: auc_roc {:.4} auc_pr {:.4}", r.auc_roc, r.auc_pr);
            Ok(r)
        })
        .collect::<Result<_>>()?;
    let out = a.common.out.clone().unwrap_or_else(|| PathBuf::from("grid"));
    let mut csv = String::from("model,features,auc_roc,auc_pr,pr_baseline,threshold,tn,fp,fn,tp,config_digest\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.features,
            r.auc_roc,
            r.auc_pr,
            r.pr_baseline,
            r.threshold,
            r.tn,
            r.fp,
            r.fn_,
            r.tp,
            r.config_digest
        );
    }
    write_atomic(&out.join("grid.csv"), csv.as_bytes())?;
    write_atomic(&out.join("grid.json"), to_json(&rows).as_bytes())?;
    print!("{csv}");
    Ok(())
}

fn row(gm: GridModel, mode: FeatureMode, r: &EvalReport) -> GridRow {
    GridRow {
        model: gm.name(),
        features: mode,
        auc_roc: r.auc_roc,
        auc_pr: r.auc_pr,
        pr_baseline: r.pr_baseline,
        threshold: r.threshold,
        tn: r.confusion.tn,
        fp: r.confusion.fp,
        fn_: r.confusion.fn_,
        tp: r.confusion.tp,
        config_digest: r.config_digest.clone(),
    }
}
