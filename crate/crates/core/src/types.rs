//! Domain types shared by every stage: probability tracks, frame intervals,
//! ground-truth annotations, suite manifests and the decoder prior.
//!
//! All frame arithmetic is 0-based and inclusive. `fps` is carried as metadata
//! only.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Name of the class pinned to index 0 of every label set.
pub const NEUTRAL: &str = "neutral";

/// Tolerance on emotion row sums held by a constructed [`ProbabilityTrack`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Tolerance on manifest class priors.
pub const PRIOR_SUM_TOLERANCE: f64 = 1e-6;

pub(crate) fn validate_labels(labels: &[String]) -> Result<()> {
    if labels.len() < 2 {
        return Err(Error::InvalidLabels(format!(
            "need at least 2 classes, got {}",
            labels.len()
        )));
    }
    if labels[0] != NEUTRAL {
        return Err(Error::InvalidLabels(format!(
            "class 0 must be {NEUTRAL:?}, got {:?}",
            labels[0]
        )));
    }
    let mut seen = HashSet::new();
    for l in labels {
        if l.is_empty() {
            return Err(Error::InvalidLabels("empty class name".into()));
        }
        if !seen.insert(l.as_str()) {
            return Err(Error::InvalidLabels(format!("duplicate class {l:?}")));
        }
    }
    Ok(())
}

fn check_probability(value: f64, context: impl FnOnce() -> String) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::ProbabilityOutOfRange {
            value,
            context: context(),
        })
    }
}

/// Per-frame spotting probability and emotion distribution for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTrack {
    video_id: String,
    subject_id: String,
    fps: f64,
    spot: Vec<f64>,
    emo: Vec<Vec<f64>>,
    labels: Vec<String>,
}

impl ProbabilityTrack {
    pub fn new(
        video_id: impl Into<String>,
        subject_id: impl Into<String>,
        fps: f64,
        spot: Vec<f64>,
        emo: Vec<Vec<f64>>,
        labels: Vec<String>,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidTrack(format!("fps must be positive, got {fps}")));
        }
        validate_labels(&labels)?;
        if spot.is_empty() {
            return Err(Error::InvalidTrack("track has no frames".into()));
        }
        if spot.len() != emo.len() {
            return Err(Error::InvalidTrack(format!(
                "{} spot values but {} emotion rows",
                spot.len(),
                emo.len()
            )));
        }
        for (frame, &s) in spot.iter().enumerate() {
            check_probability(s, || format!("spot at frame {frame}"))?;
        }
        for (frame, row) in emo.iter().enumerate() {
            if row.len() != labels.len() {
                return Err(Error::InvalidTrack(format!(
                    "frame {frame}: {} emotion values for {} classes",
                    row.len(),
                    labels.len()
                )));
            }
            for (c, &p) in row.iter().enumerate() {
                check_probability(p, || format!("class {c} at frame {frame}"))?;
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(Error::InvalidTrack(format!(
                    "frame {frame}: emotion row sums to {sum}"
                )));
            }
        }
        Ok(Self {
            video_id: video_id.into(),
            subject_id: subject_id.into(),
            fps,
            spot,
            emo,
            labels,
        })
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    /// Number of frames.
    pub fn len(&self) -> usize {
        self.spot.len()
    }

    /// Always false; a track holds at least one frame.
    pub fn is_empty(&self) -> bool {
        self.spot.is_empty()
    }

    /// Number of classes, neutral included.
    pub fn num_classes(&self) -> usize {
        self.labels.len()
    }

    pub fn spot(&self) -> &[f64] {
        &self.spot
    }

    pub fn emo(&self) -> &[Vec<f64>] {
        &self.emo
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Same data under different identifying metadata.
    pub fn with_meta(
        mut self,
        video_id: impl Into<String>,
        subject_id: impl Into<String>,
        fps: f64,
    ) -> Result<Self> {
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidTrack(format!("fps must be positive, got {fps}")));
        }
        self.video_id = video_id.into();
        self.subject_id = subject_id.into();
        self.fps = fps;
        Ok(self)
    }
}

/// Onset, apex and offset frames of one expression event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    onset: usize,
    apex: usize,
    offset: usize,
}

impl Interval {
    pub fn new(onset: usize, apex: usize, offset: usize) -> Result<Self> {
        if onset <= apex && apex <= offset {
            Ok(Self {
                onset,
                apex,
                offset,
            })
        } else {
            Err(Error::InvalidInterval {
                onset,
                apex,
                offset,
            })
        }
    }

    /// Interval without an apex of interest; the apex is placed at the onset.
    pub fn span(onset: usize, offset: usize) -> Result<Self> {
        Self::new(onset, onset, offset)
    }

    pub fn onset(&self) -> usize {
        self.onset
    }

    pub fn apex(&self) -> usize {
        self.apex
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Frame count, both ends included.
    pub fn len(&self) -> usize {
        self.offset - self.onset + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, frame: usize) -> bool {
        self.onset <= frame && frame <= self.offset
    }

    /// Number of frames shared with `other`.
    pub fn overlap(&self, other: &Interval) -> usize {
        let lo = self.onset.max(other.onset);
        let hi = self.offset.min(other.offset);
        if lo <= hi {
            hi - lo + 1
        } else {
            0
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawInterval {
    onset: usize,
    apex: usize,
    offset: usize,
}

impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawInterval {
            onset: self.onset,
            apex: self.apex,
            offset: self.offset,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawInterval::deserialize(d)?;
        Interval::new(raw.onset, raw.apex, raw.offset).map_err(serde::de::Error::custom)
    }
}

/// A decoded interval carrying its assigned emotion.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInterval {
    pub interval: Interval,
    pub label: String,
    pub confidence: f64,
}

/// One ground-truth micro-expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Event {
    pub interval: Interval,
    pub label: String,
}

/// Ground-truth events for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub video_id: String,
    pub subject_id: String,
    pub fps: f64,
    pub events: Vec<Event>,
}

impl Annotation {
    /// Checks fps and that no event is listed twice.
    pub fn validate(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::InvalidTrack(format!(
                "annotation fps must be positive, got {}",
                self.fps
            )));
        }
        let mut seen = HashSet::new();
        for e in &self.events {
            if !seen.insert(e) {
                return Err(Error::DuplicateEvent {
                    onset: e.interval.onset,
                    apex: e.interval.apex,
                    offset: e.interval.offset,
                    label: e.label.clone(),
                });
            }
        }
        Ok(())
    }

    /// Checks every event label against a label set; neutral is not an event label.
    pub fn validate_labels(&self, labels: &[String]) -> Result<()> {
        for e in &self.events {
            if e.label == NEUTRAL || !labels.contains(&e.label) {
                return Err(Error::UnknownLabel(e.label.clone()));
            }
        }
        Ok(())
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.events.iter().map(|e| e.interval).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub video_id: String,
    pub subject_id: String,
    pub track_path: String,
    pub annotation_path: String,
    pub fps: f64,
}

/// A collection of videos sharing one label set and class-frequency prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub labels: Vec<String>,
    pub class_priors: Vec<f64>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn validate(&self) -> Result<()> {
        validate_labels(&self.labels)?;
        if self.class_priors.len() != self.labels.len() {
            return Err(Error::InvalidPriors(format!(
                "{} priors for {} classes",
                self.class_priors.len(),
                self.labels.len()
            )));
        }
        if let Some(p) = self
            .class_priors
            .iter()
            .find(|p| !(p.is_finite() && **p >= 0.0))
        {
            return Err(Error::InvalidPriors(format!("negative or non-finite prior {p}")));
        }
        let sum: f64 = self.class_priors.iter().sum();
        if (sum - 1.0).abs() > PRIOR_SUM_TOLERANCE {
            return Err(Error::InvalidPriors(format!("priors sum to {sum}")));
        }
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.video_id.as_str()) {
                return Err(Error::DuplicateVideoId(e.video_id.clone()));
            }
            if !(e.fps.is_finite() && e.fps > 0.0) {
                return Err(Error::InvalidTrack(format!(
                    "{}: fps must be positive, got {}",
                    e.video_id, e.fps
                )));
            }
        }
        Ok(())
    }
}

/// Prior parameters of both interval decoders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecoderConfig {
    /// Expected event duration in frames.
    pub k: usize,
    /// Extension threshold inside the duration prior.
    pub theta_low: f64,
    /// Extension threshold beyond the duration prior.
    pub theta_high: f64,
    /// Consecutive violating frames that terminate extension.
    pub patience: usize,
    pub min_peak_height: f64,
    pub nms_iou: f64,
}

/// Expected event duration in seconds used to derive `k` from a frame rate.
pub const DEFAULT_DURATION_SECONDS: f64 = 0.5;

impl DecoderConfig {
    /// Defaults with `k = round(0.5 s * fps)`.
    pub fn for_fps(fps: f64) -> Self {
        Self {
            k: ((DEFAULT_DURATION_SECONDS * fps).round() as usize).max(1),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("{name} = {v} is outside [0, 1]")))
            }
        };
        if self.k == 0 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        unit("theta_low", self.theta_low)?;
        unit("theta_high", self.theta_high)?;
        unit("min_peak_height", self.min_peak_height)?;
        if self.theta_low > self.theta_high {
            return Err(Error::InvalidConfig(format!(
                "theta_low {} exceeds theta_high {}",
                self.theta_low, self.theta_high
            )));
        }
        if !(0.0..1.0).contains(&self.nms_iou) {
            return Err(Error::InvalidConfig(format!(
                "nms_iou = {} is outside [0, 1)",
                self.nms_iou
            )));
        }
        Ok(())
    }
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            k: 15,
            theta_low: 0.25,
            theta_high: 0.5,
            patience: 2,
            min_peak_height: 0.6,
            nms_iou: 0.3,
        }
    }
}
