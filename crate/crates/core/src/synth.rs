//! Seeded synthetic probability tracks with ground-truth events.
//!
//! Draw order for one video, all from a single [`SplitMix64`] seeded with
//! `seed`:
//!
//! 1. per event: duration, amplitude, label;
//! 2. one sorted offset per event that spreads the slack frames;
//! 3. one baseline noise value per frame.
//!
//! Events never overlap and are separated by at least [`MIN_GAP`] frames. The
//! apex sits at `onset + (duration - 1) / 2`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::io::{write_annotation, write_manifest, write_track};
use crate::rng::SplitMix64;
use crate::types::{
    validate_labels, Annotation, DecoderConfig, Event, Interval, Manifest, ManifestEntry,
    ProbabilityTrack,
};

/// Minimum number of background frames between consecutive events.
pub const MIN_GAP: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("infeasible spec: {0}")]
    InfeasibleSpec(String),
    #[error(transparent)]
    Core(#[from] Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpShape {
    #[default]
    Triangle,
    Gaussian,
}

impl BumpShape {
    /// Clean bump value at `frame` for an event, zero outside it.
    pub fn value(self, interval: &Interval, amplitude: f64, frame: usize) -> f64 {
        if !interval.contains(frame) {
            return 0.0;
        }
        let (on, apex, off) = (interval.onset(), interval.apex(), interval.offset());
        match self {
            BumpShape::Triangle => {
                if frame == apex {
                    amplitude
                } else if frame < apex {
                    amplitude * (frame - on) as f64 / (apex - on) as f64
                } else {
                    amplitude * (off - frame) as f64 / (off - apex) as f64
                }
            }
            BumpShape::Gaussian => {
                let sigma = interval.len() as f64 / 6.0;
                let d = frame as f64 - apex as f64;
                amplitude * (-d * d / (2.0 * sigma * sigma)).exp()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSpec {
    pub seed: u64,
    pub frames: usize,
    pub n_events: usize,
    /// Inclusive bounds on event length in frames.
    pub duration_range: [usize; 2],
    pub amplitude_range: [f64; 2],
    pub noise_level: f64,
    pub shape: BumpShape,
    pub labels: Vec<String>,
    /// Event label weights over the non-neutral classes.
    pub class_mix: Vec<f64>,
    pub fps: f64,
    pub video_id: String,
    pub subject_id: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 600,
            n_events: 2,
            duration_range: [10, 20],
            amplitude_range: [0.6, 1.0],
            noise_level: 0.05,
            shape: BumpShape::Triangle,
            labels: vec![
                "neutral".into(),
                "negative".into(),
                "positive".into(),
                "surprise".into(),
            ],
            class_mix: vec![0.5, 0.3, 0.2],
            fps: 30.0,
            video_id: "synth".into(),
            subject_id: String::new(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InfeasibleSpec(m));
        validate_labels(&self.labels)?;
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        if self.class_mix.len() != self.labels.len() - 1 {
            return bad(format!(
                "class_mix has {} weights for {} emotion classes",
                self.class_mix.len(),
                self.labels.len() - 1
            ));
        }
        if self.class_mix.iter().any(|w| !(w.is_finite() && *w >= 0.0))
            || self.class_mix.iter().sum::<f64>() <= 0.0
        {
            return bad("class_mix must be non-negative with positive total".into());
        }
        let [dmin, dmax] = self.duration_range;
        if dmin == 0 || dmin > dmax {
            return bad(format!("bad duration range [{dmin}, {dmax}]"));
        }
        let [amin, amax] = self.amplitude_range;
        let theta_high = DecoderConfig::default().theta_high;
        if !(amin > theta_high && amin <= amax && amax <= 1.0) {
            return bad(format!(
                "amplitude range [{amin}, {amax}] must lie in ({theta_high}, 1]"
            ));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return bad(format!("noise level {} outside [0, 1]", self.noise_level));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps {} must be positive", self.fps));
        }
        Ok(())
    }
}

/// A generated event with the amplitude of its clean bump.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthEvent {
    pub event: Event,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub track: ProbabilityTrack,
    pub annotation: Annotation,
    pub events: Vec<SynthEvent>,
}

fn emotion_row(n: usize, event_class: Option<usize>, bump: f64, spot: f64) -> Vec<f64> {
    let mut row = vec![0.0; n];
    match event_class {
        Some(c) => {
            let mass = 0.7 + 0.3 * bump;
            let rest = 1.0 - mass;
            row[c] = mass;
            if n == 2 {
                row[0] = rest;
            } else {
                row[0] = rest / 2.0;
                let share = rest / 2.0 / (n - 2) as f64;
                for (i, r) in row.iter_mut().enumerate().skip(1) {
                    if i != c {
                        *r = share;
                    }
                }
            }
        }
        None => {
            row[0] = 1.0 - 0.2 * spot;
            let share = 0.2 * spot / (n - 1) as f64;
            row.iter_mut().skip(1).for_each(|r| *r = share);
        }
    }
    row
}

pub fn generate(spec: &SynthSpec) -> Result<SynthVideo, SynthError> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);
    let [dmin, dmax] = spec.duration_range;
    let [amin, amax] = spec.amplitude_range;

    let draws: Vec<(usize, f64, usize)> = (0..spec.n_events)
        .map(|_| {
            let d = rng.range_inclusive(dmin, dmax);
            let a = rng.uniform(amin, amax);
            let c = rng.categorical(&spec.class_mix) + 1;
            (d, a, c)
        })
        .collect();

    let needed: usize =
        draws.iter().map(|d| d.0).sum::<usize>() + MIN_GAP * spec.n_events.saturating_sub(1);
    if needed > spec.frames {
        return Err(SynthError::InfeasibleSpec(format!(
            "{} events need {needed} frames, track has {}",
            spec.n_events, spec.frames
        )));
    }
    let slack = spec.frames - needed;
    let mut offsets: Vec<usize> = (0..spec.n_events)
        .map(|_| rng.range_inclusive(0, slack))
        .collect();
    offsets.sort_unstable();

    let mut events = Vec::with_capacity(spec.n_events);
    let mut cursor = 0;
    for ((d, a, c), shift) in draws.iter().zip(&offsets) {
        let onset = cursor + shift;
        let offset = onset + d - 1;
        let apex = onset + (d - 1) / 2;
        events.push(SynthEvent {
            event: Event {
                interval: Interval::new(onset, apex, offset).expect("ordered by construction"),
                label: spec.labels[*c].clone(),
            },
            amplitude: *a,
        });
        cursor += d + MIN_GAP;
    }

    let n = spec.labels.len();
    let mut spot = Vec::with_capacity(spec.frames);
    let mut emo = Vec::with_capacity(spec.frames);
    let mut owner = 0;
    for f in 0..spec.frames {
        let noise = spec.noise_level * rng.next_f64();
        while owner < events.len() && events[owner].event.interval.offset() < f {
            owner += 1;
        }
        let current = events
            .get(owner)
            .filter(|e| e.event.interval.contains(f))
            .map(|e| {
                let c = draws[owner].2;
                (c, spec.shape.value(&e.event.interval, e.amplitude, f))
            });
        let bump = current.map_or(0.0, |(_, b)| b);
        let s = (bump + noise).clamp(0.0, 1.0);
        spot.push(s);
        emo.push(emotion_row(n, current.map(|(c, _)| c), bump, s));
    }

    let track = ProbabilityTrack::new(
        spec.video_id.clone(),
        spec.subject_id.clone(),
        spec.fps,
        spot,
        emo,
        spec.labels.clone(),
    )?;
    let annotation = Annotation {
        video_id: spec.video_id.clone(),
        subject_id: spec.subject_id.clone(),
        fps: spec.fps,
        events: events.iter().map(|e| e.event.clone()).collect(),
    };
    Ok(SynthVideo {
        track,
        annotation,
        events,
    })
}

/// A suite of videos generated from one template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub template: SynthSpec,
    pub n_videos: usize,
    pub base_seed: u64,
}

/// Generates `n_videos` videos in memory; video `i` uses seed `base_seed + i`.
pub fn generate_videos(suite: &SuiteSpec) -> Result<Vec<SynthVideo>, SynthError> {
    (0..suite.n_videos)
        .into_par_iter()
        .map(|i| {
            let spec = SynthSpec {
                seed: suite.base_seed.wrapping_add(i as u64),
                video_id: format!("synth_{i:04}"),
                subject_id: format!("subj_{i:04}"),
                ..suite.template.clone()
            };
            generate(&spec)
        })
        .collect()
}

/// Frame-level class frequencies, neutral counting every non-event frame.
pub fn frame_priors(videos: &[SynthVideo], n_classes: usize) -> Vec<f64> {
    let mut counts = vec![0u64; n_classes];
    for v in videos {
        let labels = v.track.labels();
        let mut event_frames = 0;
        for e in &v.annotation.events {
            let c = labels.iter().position(|l| *l == e.label).unwrap_or(0);
            counts[c] += e.interval.len() as u64;
            event_frames += e.interval.len();
        }
        counts[0] += (v.track.len() - event_frames) as u64;
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![1.0 / n_classes as f64; n_classes];
    }
    counts.iter().map(|&c| c as f64 / total as f64).collect()
}

/// Writes a suite as `tracks/<id>.csv`, `annotations/<id>.json` and
/// `manifest.json` under `out_dir`, with paths relative to the manifest.
pub fn generate_suite(suite: &SuiteSpec, out_dir: &Path) -> Result<Manifest, SynthError> {
    let videos = generate_videos(suite)?;
    let labels = suite.template.labels.clone();
    let manifest = Manifest {
        class_priors: frame_priors(&videos, labels.len()),
        labels,
        entries: videos
            .iter()
            .map(|v| ManifestEntry {
                video_id: v.track.video_id().to_string(),
                subject_id: v.track.subject_id().to_string(),
                track_path: format!("tracks/{}.csv", v.track.video_id()),
                annotation_path: format!("annotations/{}.json", v.track.video_id()),
                fps: v.track.fps(),
            })
            .collect(),
    };
    manifest.validate()?;
    videos.par_iter().zip(&manifest.entries).try_for_each(|(v, e)| {
        write_track(&v.track, &out_dir.join(&e.track_path))?;
        write_annotation(&v.annotation, &out_dir.join(&e.annotation_path))
    })?;
    write_manifest(&manifest, &out_dir.join("manifest.json"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::track_to_csv;

    #[test]
    fn no_events_no_noise_is_flat_neutral() {
        let spec = SynthSpec {
            n_events: 0,
            noise_level: 0.0,
            ..SynthSpec::default()
        };
        let v = generate(&spec).unwrap();
        assert!(v.track.spot().iter().all(|&s| s == 0.0));
        assert!(v.track.emo().iter().all(|r| r == &[1.0, 0.0, 0.0, 0.0]));
        assert!(v.annotation.events.is_empty());
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SynthSpec {
            seed: 42,
            ..SynthSpec::default()
        };
        let a = track_to_csv(&generate(&spec).unwrap().track);
        let b = track_to_csv(&generate(&spec).unwrap().track);
        assert_eq!(a, b);
        let other = track_to_csv(&generate(&SynthSpec { seed: 43, ..spec }).unwrap().track);
        assert_ne!(a, other);
    }

    #[test]
    fn triangle_ramp_arithmetic() {
        let iv = Interval::new(10, 15, 20).unwrap();
        let tri = BumpShape::Triangle;
        assert_eq!(tri.value(&iv, 0.9, 15), 0.9);
        assert_eq!(tri.value(&iv, 0.9, 10), 0.0);
        assert_eq!(tri.value(&iv, 0.9, 20), 0.0);
        assert!((tri.value(&iv, 0.9, 12) - 0.36).abs() < 1e-15);
        assert!((tri.value(&iv, 0.9, 18) - 0.36).abs() < 1e-15);
        assert_eq!(tri.value(&iv, 0.9, 21), 0.0);
    }

    #[test]
    fn gaussian_peaks_at_apex() {
        let iv = Interval::new(0, 6, 12).unwrap();
        let g = BumpShape::Gaussian;
        assert_eq!(g.value(&iv, 0.8, 6), 0.8);
        // sigma = 13 / 6, symmetric around the apex.
        assert_eq!(g.value(&iv, 0.8, 3), g.value(&iv, 0.8, 9));
        assert!(g.value(&iv, 0.8, 0) < 0.1);
    }

    #[test]
    fn events_are_separated() {
        for seed in 0..50 {
            let spec = SynthSpec {
                seed,
                frames: 120,
                n_events: 5,
                ..SynthSpec::default()
            };
            let v = generate(&spec).unwrap();
            let ev = &v.annotation.events;
            assert_eq!(ev.len(), 5);
            for w in ev.windows(2) {
                assert!(w[1].interval.onset() > w[0].interval.offset() + MIN_GAP);
            }
            assert!(ev.last().unwrap().interval.offset() < 120);
            for e in ev {
                assert_eq!(
                    e.interval.apex(),
                    e.interval.onset() + (e.interval.len() - 1) / 2
                );
            }
        }
    }

    #[test]
    fn infeasible_and_invalid_specs() {
        let spec = SynthSpec {
            frames: 30,
            n_events: 3,
            duration_range: [10, 10],
            ..SynthSpec::default()
        };
        assert!(matches!(generate(&spec), Err(SynthError::InfeasibleSpec(_))));
        let spec = SynthSpec {
            amplitude_range: [0.3, 0.9],
            ..SynthSpec::default()
        };
        assert!(generate(&spec).is_err());
        let spec = SynthSpec {
            class_mix: vec![1.0],
            ..SynthSpec::default()
        };
        assert!(generate(&spec).is_err());
    }

    #[test]
    fn event_rows_favour_the_event_label() {
        let v = generate(&SynthSpec {
            seed: 3,
            ..SynthSpec::default()
        })
        .unwrap();
        let labels = v.track.labels();
        for e in &v.annotation.events {
            let c = labels.iter().position(|l| *l == e.label).unwrap();
            for f in e.interval.onset()..=e.interval.offset() {
                let row = &v.track.emo()[f];
                assert!(row[c] >= 0.7);
            }
        }
        for (f, row) in v.track.emo().iter().enumerate() {
            if !v.annotation.events.iter().any(|e| e.interval.contains(f)) {
                assert!(row[0] >= 0.8);
            }
        }
    }

    #[test]
    fn suite_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let suite = SuiteSpec {
            template: SynthSpec::default(),
            n_videos: 1,
            base_seed: 9,
        };
        let m = generate_suite(&suite, dir.path()).unwrap();
        assert_eq!(m.entries.len(), 1);
        assert!((m.class_priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let back = crate::io::read_manifest(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(back, m);
        let e = &m.entries[0];
        crate::io::read_track(&dir.path().join(&e.track_path)).unwrap();
        crate::io::read_annotation(&dir.path().join(&e.annotation_path)).unwrap();
    }
}
