//! Training segments cut from annotated tracks.

use serde::{Deserialize, Serialize};

use super::loss::{FrameTargets, Sequence};
use crate::rng::SplitMix64;
use crate::synth::BumpShape;
use crate::types::{Annotation, Interval, ProbabilityTrack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetEncoding {
    /// 1 inside every ground-truth interval, 0 elsewhere.
    #[default]
    Hard,
    /// 1 at the apex, falling linearly to 0 at onset and offset.
    Triangular,
}

/// Model inputs derived from a track: the spot channel mapped to
/// `0.8 - 0.6 s`, then the emotion channels in reverse class order mapped to
/// `0.25 + 0.5 p`, each clipped to `[0, 1]`. On probability inputs the clip
/// never binds, so the map is invertible.
pub fn demo_features(track: &ProbabilityTrack) -> Vec<Vec<f64>> {
    track
        .spot()
        .iter()
        .zip(track.emo())
        .map(|(&s, row)| {
            let mut f = Vec::with_capacity(row.len() + 1);
            f.push((0.8 - 0.6 * s).clamp(0.0, 1.0));
            f.extend(row.iter().rev().map(|&p| (0.25 + 0.5 * p).clamp(0.0, 1.0)));
            f
        })
        .collect()
}

/// Per-frame targets for a whole track.
pub fn frame_targets(track: &ProbabilityTrack, annotation: &Annotation, encoding: TargetEncoding) -> FrameTargets {
    let n = track.len();
    let mut spot = vec![0.0; n];
    let mut class = vec![0; n];
    for e in &annotation.events {
        let c = track.labels().iter().position(|l| *l == e.label).unwrap_or(0);
        for f in e.interval.onset()..=e.interval.offset().min(n - 1) {
            spot[f] = match encoding {
                TargetEncoding::Hard => 1.0,
                TargetEncoding::Triangular => BumpShape::Triangle.value(&e.interval, 1.0, f),
            };
            class[f] = c;
        }
    }
    FrameTargets { spot, class }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub segment_len: usize,
    pub neg_pos_ratio: f64,
    pub encoding: TargetEncoding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub start: usize,
    pub positive: bool,
    pub sequence: Sequence,
}

impl Segment {
    pub fn frames(&self) -> Interval {
        Interval::span(self.start, self.start + self.sequence.features.len() - 1)
            .expect("segments are non-empty")
    }
}

/// Fewer background windows existed than the ratio asked for; all were taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InsufficientNegativeSpace {
    pub requested: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledSegments {
    pub segments: Vec<Segment>,
    pub shortfall: Option<InsufficientNegativeSpace>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("track of {frames} frames is shorter than a {segment_len}-frame segment")]
pub struct TrackTooShort {
    pub frames: usize,
    pub segment_len: usize,
}

/// One segment centred on every ground-truth apex, plus
/// `round(ratio * positives)` background segments drawn uniformly without
/// replacement from the windows that touch no ground-truth frame.
pub fn sample_segments(
    track: &ProbabilityTrack,
    annotation: &Annotation,
    cfg: &SamplingConfig,
    seed: u64,
) -> Result<SampledSegments, TrackTooShort> {
    let len = cfg.segment_len;
    if len == 0 || track.len() < len {
        return Err(TrackTooShort {
            frames: track.len(),
            segment_len: len,
        });
    }
    let features = demo_features(track);
    let targets = frame_targets(track, annotation, cfg.encoding);
    let last_start = track.len() - len;
    let cut = |start: usize, positive: bool| Segment {
        start,
        positive,
        sequence: Sequence {
            features: features[start..start + len].to_vec(),
            targets: FrameTargets {
                spot: targets.spot[start..start + len].to_vec(),
                class: targets.class[start..start + len].to_vec(),
            },
        },
    };

    let mut segments: Vec<Segment> = annotation
        .events
        .iter()
        .map(|e| cut(e.interval.apex().saturating_sub(len / 2).min(last_start), true))
        .collect();

    let mut candidates: Vec<usize> = (0..=last_start)
        .filter(|&s| {
            let w = Interval::span(s, s + len - 1).expect("ordered");
            annotation.events.iter().all(|e| e.interval.overlap(&w) == 0)
        })
        .collect();
    let requested = (cfg.neg_pos_ratio * segments.len() as f64).round() as usize;
    let mut shortfall = None;
    if requested > candidates.len() {
        log::warn!(
            "{}: {} background segments requested, {} available",
            track.video_id(),
            requested,
            candidates.len()
        );
        shortfall = Some(InsufficientNegativeSpace {
            requested,
            available: candidates.len(),
        });
    }
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut candidates);
    candidates.truncate(requested);
    candidates.sort_unstable();
    segments.extend(candidates.into_iter().map(|s| cut(s, false)));
    Ok(SampledSegments { segments, shortfall })
}
