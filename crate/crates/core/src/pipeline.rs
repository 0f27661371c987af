//! Suite-level decode, classify and evaluate.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{assign_emotion, penalize, ClassifyError, PenaltyConfig};
use crate::decode::DecoderKind;
use crate::error::Error;
use crate::io::{read_annotation, read_manifest, read_track_with_meta};
use crate::metrics::{build_report, evaluate_video, Averaging, MetricsError, MetricsReport, VideoTally};
use crate::types::{Annotation, DecoderConfig, LabeledInterval, Manifest, ManifestEntry, ProbabilityTrack};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{video_id}: {source}")]
    Classify {
        video_id: String,
        #[source]
        source: ClassifyError,
    },
    #[error("{video_id}: {source}")]
    Metrics {
        video_id: String,
        #[source]
        source: MetricsError,
    },
}

/// Decoder and post-processing settings for one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub decoder: DecoderKind,
    /// Duration prior in frames; derived per video from fps when absent.
    #[serde(default)]
    pub k: Option<usize>,
    pub theta_low: f64,
    pub theta_high: f64,
    pub patience: usize,
    pub min_peak_height: f64,
    pub nms_iou: f64,
    pub penalty: PenaltyConfig,
    pub averaging: Averaging,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let d = DecoderConfig::default();
        Self {
            decoder: DecoderKind::Siss,
            k: None,
            theta_low: d.theta_low,
            theta_high: d.theta_high,
            patience: d.patience,
            min_peak_height: d.min_peak_height,
            nms_iou: d.nms_iou,
            penalty: PenaltyConfig::default(),
            averaging: Averaging::Macro,
        }
    }
}

impl EvalConfig {
    /// Decoder parameters for a video recorded at `fps`.
    pub fn decoder_config(&self, fps: f64) -> DecoderConfig {
        DecoderConfig {
            k: self.k.unwrap_or_else(|| DecoderConfig::for_fps(fps).k),
            theta_low: self.theta_low,
            theta_high: self.theta_high,
            patience: self.patience,
            min_peak_height: self.min_peak_height,
            nms_iou: self.nms_iou,
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        self.decoder_config(30.0).validate()?;
        if self.penalty.epsilon < 0.0 || !self.penalty.epsilon.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be non-negative, got {}",
                self.penalty.epsilon
            )));
        }
        Ok(())
    }
}

/// A manifest entry with its validated files.
#[derive(Debug, Clone)]
pub struct LoadedVideo {
    pub entry: ManifestEntry,
    pub track: ProbabilityTrack,
    pub annotation: Annotation,
}

pub fn resolve(manifest_path: &Path, rel: &str) -> PathBuf {
    manifest_path.parent().unwrap_or(Path::new(".")).join(rel)
}

/// Reads and cross-validates a manifest and every file it lists. Videos are
/// returned sorted by video id.
pub fn load_suite(manifest_path: &Path) -> Result<(Manifest, Vec<LoadedVideo>), Error> {
    let manifest = read_manifest(manifest_path)?;
    let mut videos = manifest
        .entries
        .par_iter()
        .map(|entry| load_entry(manifest_path, &manifest, entry))
        .collect::<Result<Vec<_>, _>>()?;
    videos.sort_by(|a, b| a.entry.video_id.cmp(&b.entry.video_id));
    Ok((manifest, videos))
}

fn load_entry(manifest_path: &Path, manifest: &Manifest, entry: &ManifestEntry) -> Result<LoadedVideo, Error> {
    let track = read_track_with_meta(
        &resolve(manifest_path, &entry.track_path),
        &entry.video_id,
        &entry.subject_id,
        entry.fps,
    )?;
    if track.labels() != manifest.labels.as_slice() {
        return Err(Error::InvalidLabels(format!(
            "{}: track classes {:?} differ from manifest {:?}",
            entry.video_id,
            track.labels(),
            manifest.labels
        )));
    }
    let annotation = read_annotation(&resolve(manifest_path, &entry.annotation_path))?;
    annotation.validate_labels(&manifest.labels)?;
    if annotation.video_id != entry.video_id {
        return Err(Error::InvalidTrack(format!(
            "annotation for {} names video {}",
            entry.video_id, annotation.video_id
        )));
    }
    if let Some(e) = annotation.events.iter().find(|e| e.interval.offset() >= track.len()) {
        return Err(Error::InvalidTrack(format!(
            "{}: event ending at frame {} exceeds {} frames",
            entry.video_id,
            e.interval.offset(),
            track.len()
        )));
    }
    Ok(LoadedVideo {
        entry: entry.clone(),
        track,
        annotation,
    })
}

/// Decodes one track and labels each interval.
pub fn decode_track(
    track: &ProbabilityTrack,
    cfg: &EvalConfig,
    priors: &[f64],
) -> Result<Vec<LabeledInterval>, ClassifyError> {
    let dcfg = cfg.decoder_config(track.fps());
    cfg.decoder
        .decode(track.spot(), &dcfg)
        .iter()
        .map(|iv| assign_emotion(track, iv, priors, &cfg.penalty))
        .collect()
}

#[derive(Debug, Clone)]
pub struct VideoResult {
    pub video_id: String,
    pub intervals: Vec<LabeledInterval>,
    pub tally: VideoTally,
}

/// Per-video predictions, either decoded here or supplied by the caller.
pub enum Predictions<'a> {
    Decode,
    Given(&'a (dyn Fn(&LoadedVideo) -> Vec<LabeledInterval> + Sync)),
}

/// Decodes (when needed), matches and aggregates every video. Work is spread
/// over the current rayon pool; results are assembled in video order, so the
/// report does not depend on the pool size.
pub fn evaluate(
    manifest: &Manifest,
    videos: &[LoadedVideo],
    cfg: &EvalConfig,
    predictions: Predictions<'_>,
) -> Result<(MetricsReport, Vec<VideoResult>), PipelineError> {
    let results = videos
        .par_iter()
        .map(|v| {
            let id = v.entry.video_id.clone();
            let intervals = match &predictions {
                Predictions::Decode => decode_track(&v.track, cfg, &manifest.class_priors)
                    .map_err(|source| PipelineError::Classify {
                        video_id: id.clone(),
                        source,
                    })?,
                Predictions::Given(f) => f(v),
            };
            let tally = evaluate_video(&id, &intervals, &v.annotation.events, &manifest.labels)
                .map_err(|source| PipelineError::Metrics {
                    video_id: id.clone(),
                    source,
                })?;
            Ok(VideoResult {
                video_id: id,
                intervals,
                tally,
            })
        })
        .collect::<Result<Vec<_>, PipelineError>>()?;
    let tallies: Vec<VideoTally> = results.iter().map(|r| r.tally.clone()).collect();
    Ok((build_report(&tallies, &manifest.labels, cfg.averaging), results))
}

/// Plot-ready per-frame curve: spot probability, whether the frame lies in a
/// decoded interval, and the penalized class scores.
pub fn curve_csv(
    track: &ProbabilityTrack,
    intervals: &[LabeledInterval],
    priors: &[f64],
    penalty: &PenaltyConfig,
) -> Result<String, ClassifyError> {
    let mut out = String::from("frame,spot,decoded");
    for l in track.labels() {
        write!(out, ",s_{l}").unwrap();
    }
    out.push('\n');
    for (f, (s, row)) in track.spot().iter().zip(track.emo()).enumerate() {
        let decoded = intervals.iter().any(|li| li.interval.contains(f)) as u8;
        write!(out, "{f},{s},{decoded}").unwrap();
        for v in penalize(row, priors, penalty)? {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}
