//! Joint training of the spotting and recognition heads over one shared trunk.
//!
//! [`train_demo`] reads a synthetic suite, holds out the last videos (by video
//! id), cuts training segments, and fits a [`TinyModel`]. Inference runs the
//! model over consecutive `segment_len` chunks and concatenates the outputs
//! into whole-video tracks.

pub mod loss;
pub mod model;
pub mod sampling;

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::ClassifyError;
use crate::error::Error;
use crate::metrics::MetricsReport;
use crate::pipeline::{evaluate, load_suite, EvalConfig, LoadedVideo, PipelineError, Predictions};
use crate::rng::SplitMix64;
use crate::types::{Manifest, ProbabilityTrack};

pub use loss::{batch_loss, gradients, loss, FrameTargets, LossBreakdown, Sequence};
pub use model::{ModelError, ModelOutput, ModelShape, Params, TinyModel};
pub use sampling::{
    demo_features, frame_targets, sample_segments, InsufficientNegativeSpace, SampledSegments,
    SamplingConfig, Segment, TargetEncoding, TrackTooShort,
};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("loss became non-finite at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    TrackTooShort(#[from] TrackTooShort),
    #[error(transparent)]
    Core(#[from] Error),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain gradient descent.
    #[default]
    Gd,
    /// Adam with beta1 0.9, beta2 0.999, eps 1e-8.
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub segment_len: usize,
    pub neg_pos_ratio: f64,
    /// Per-class cross-entropy weights; inverse class frequency when absent.
    pub class_weights: Option<Vec<f64>>,
    pub seed: u64,
    pub encoding: TargetEncoding,
    pub optimizer: Optimizer,
    /// Segments per update; 0 means the whole training set.
    pub batch_size: usize,
    pub window: usize,
    pub hidden: usize,
    /// Videos withheld from training, taken from the end of the id order.
    pub holdout: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 3e-4,
            epochs: 50,
            segment_len: 50,
            neg_pos_ratio: 1.0,
            class_weights: None,
            seed: 0,
            encoding: TargetEncoding::Hard,
            optimizer: Optimizer::Gd,
            batch_size: 0,
            window: 9,
            hidden: 32,
            holdout: 5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.into()));
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return bad("lr must be finite and non-negative");
        }
        if self.epochs == 0 || self.segment_len == 0 {
            return bad("epochs and segment_len must be positive");
        }
        if !(self.neg_pos_ratio.is_finite() && self.neg_pos_ratio >= 0.0) {
            return bad("neg_pos_ratio must be non-negative");
        }
        if self.window.is_multiple_of(2) {
            return bad("window must be odd");
        }
        if self.hidden == 0 {
            return bad("hidden must be positive");
        }
        if let Some(w) = &self.class_weights {
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return bad("class weights must be non-negative");
            }
        }
        Ok(())
    }
}

/// Inverse-frequency weights `1 / (N * prior)`, so that the prior-weighted mean
/// weight is 1. Classes with zero prior get weight 0.
pub fn inverse_frequency_weights(priors: &[f64]) -> Vec<f64> {
    let n = priors.len() as f64;
    priors
        .iter()
        .map(|&p| if p > 0.0 { 1.0 / (n * p) } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mse_term: f64,
    pub ce_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mse_term,ce_term,total\n");
        for e in &self.epochs {
            writeln!(out, "{},{},{},{}", e.epoch, e.mse_term, e.ce_term, e.total).unwrap();
        }
        out
    }
}

struct Adam {
    m: Params,
    v: Params,
    step: i32,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(shape: &ModelShape) -> Self {
        Self {
            m: Params::zeros(shape),
            v: Params::zeros(shape),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Params, grad: &Params, lr: f64) {
        self.step += 1;
        self.m.zip_apply(grad, |m, g| *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g);
        self.v.zip_apply(grad, |v, g| *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g);
        let c1 = 1.0 - Self::BETA1.powi(self.step);
        let c2 = 1.0 - Self::BETA2.powi(self.step);
        let m = self.m.flatten();
        let v = self.v.flatten();
        let mut i = 0;
        params.for_each_mut(|p| {
            *p -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + Self::EPS);
            i += 1;
        });
    }
}

/// Fits a fresh model on `sequences`.
pub fn fit(
    shape: ModelShape,
    sequences: &[Sequence],
    class_weights: &[f64],
    cfg: &TrainConfig,
) -> Result<(TinyModel, TrainingLog), TrainError> {
    cfg.validate()?;
    let mut model = TinyModel::init(shape, cfg.seed);
    let mut log = TrainingLog::default();
    let mut rng = SplitMix64::new(cfg.seed ^ 0x005E_ED0F_0DE5);
    let mut adam = Adam::new(&shape);
    let batch = if cfg.batch_size == 0 {
        sequences.len().max(1)
    } else {
        cfg.batch_size
    };
    let mut order: Vec<usize> = (0..sequences.len()).collect();

    for epoch in 1..=cfg.epochs {
        if batch < sequences.len() {
            rng.shuffle(&mut order);
        }
        for chunk in order.chunks(batch) {
            let mb: Vec<Sequence> = chunk.iter().map(|&i| sequences[i].clone()).collect();
            let (g, _) = gradients(&model, &mb, class_weights)?;
            if cfg.lr == 0.0 {
                continue;
            }
            match cfg.optimizer {
                Optimizer::Gd => model.params.zip_apply(&g, |p, g| *p -= cfg.lr * g),
                Optimizer::Adam => adam.update(&mut model.params, &g, cfg.lr),
            }
        }
        let l = batch_loss(&model, sequences, class_weights)?;
        if !l.total.is_finite() || !model.params.is_finite() {
            return Err(TrainError::DivergedLoss { epoch });
        }
        log.epochs.push(EpochLog {
            epoch,
            mse_term: l.mse_term,
            ce_term: l.ce_term,
            total: l.total,
        });
    }
    Ok((model, log))
}

/// Segments cut from the training videos, in video order.
pub fn training_segments(videos: &[LoadedVideo], cfg: &TrainConfig) -> Result<Vec<Sequence>, TrainError> {
    let sampling = SamplingConfig {
        segment_len: cfg.segment_len,
        neg_pos_ratio: cfg.neg_pos_ratio,
        encoding: cfg.encoding,
    };
    let mut out = Vec::new();
    for (i, v) in videos.iter().enumerate() {
        let seed = SplitMix64::new(cfg.seed.wrapping_add(i as u64)).next_u64();
        let s = sample_segments(&v.track, &v.annotation, &sampling, seed)?;
        out.extend(s.segments.into_iter().map(|s| s.sequence));
    }
    Ok(out)
}

/// Splits sorted videos into (train, holdout).
pub fn split_holdout(videos: &[LoadedVideo], holdout: usize) -> Result<(&[LoadedVideo], &[LoadedVideo]), TrainError> {
    if holdout >= videos.len() {
        return Err(TrainError::InvalidConfig(format!(
            "holdout of {holdout} leaves no training videos out of {}",
            videos.len()
        )));
    }
    Ok(videos.split_at(videos.len() - holdout))
}

pub fn model_shape(manifest: &Manifest, cfg: &TrainConfig) -> ModelShape {
    ModelShape {
        window: cfg.window,
        features: manifest.labels.len() + 1,
        hidden: cfg.hidden,
        classes: manifest.labels.len(),
    }
}

/// Trains on every manifest video except the holdout.
pub fn train_demo(manifest_path: &Path, cfg: &TrainConfig) -> Result<(TinyModel, TrainingLog), TrainError> {
    let (manifest, videos) = load_suite(manifest_path)?;
    train_on(&manifest, &videos, cfg)
}

pub fn train_on(
    manifest: &Manifest,
    videos: &[LoadedVideo],
    cfg: &TrainConfig,
) -> Result<(TinyModel, TrainingLog), TrainError> {
    cfg.validate()?;
    let (train, _) = split_holdout(videos, cfg.holdout)?;
    let sequences = training_segments(train, cfg)?;
    let weights = cfg
        .class_weights
        .clone()
        .unwrap_or_else(|| inverse_frequency_weights(&manifest.class_priors));
    if weights.len() != manifest.labels.len() {
        return Err(TrainError::InvalidConfig(format!(
            "{} class weights for {} classes",
            weights.len(),
            manifest.labels.len()
        )));
    }
    fit(model_shape(manifest, cfg), &sequences, &weights, cfg)
}

/// Runs the model over consecutive `segment_len` chunks of a track's features
/// and returns the concatenated outputs as a new track.
pub fn infer_track(model: &TinyModel, track: &ProbabilityTrack, segment_len: usize) -> Result<ProbabilityTrack, TrainError> {
    let features = demo_features(track);
    let mut spot = Vec::with_capacity(track.len());
    let mut emo = Vec::with_capacity(track.len());
    for chunk in features.chunks(segment_len.max(1)) {
        let out = model.forward(chunk)?;
        spot.extend(out.spot);
        emo.extend(out.emo);
    }
    Ok(ProbabilityTrack::new(
        track.video_id(),
        track.subject_id(),
        track.fps(),
        spot,
        emo,
        track.labels().to_vec(),
    )?)
}

/// Decodes and scores model predictions on the given videos.
pub fn evaluate_model(
    model: &TinyModel,
    manifest: &Manifest,
    videos: &[LoadedVideo],
    segment_len: usize,
    eval: &EvalConfig,
) -> Result<MetricsReport, TrainError> {
    let inferred = videos
        .iter()
        .map(|v| {
            Ok(LoadedVideo {
                track: infer_track(model, &v.track, segment_len)?,
                ..v.clone()
            })
        })
        .collect::<Result<Vec<_>, TrainError>>()?;
    let (report, _) = evaluate(manifest, &inferred, eval, Predictions::Decode)?;
    Ok(report)
}

/// Model plus the config that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub model: TinyModel,
}
