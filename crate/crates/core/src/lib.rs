//! Micro-expression interval decoding and spot-then-recognize evaluation.
//!
//! Input is a per-frame spotting probability plus a per-frame emotion
//! distribution for each video ([`ProbabilityTrack`]). The [`decode`] module
//! turns the spotting track into onset/apex/offset intervals, [`classify`]
//! labels each interval, and [`metrics`] scores the result against ground
//! truth. [`synth`] generates seeded tracks with known events and [`train`]
//! holds a small two-head model that learns both tracks from a shared trunk.

pub mod classify;
pub mod decode;
pub mod error;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod train;
pub mod types;

pub use classify::{assign_emotion, penalize, ClassifyError, PenaltyConfig, PenaltyMode};
pub use decode::{decode_fixed, decode_siss, find_peaks, DecoderKind, Peak};
pub use error::{Error, Result};
pub use metrics::{
    iou, match_intervals, recognition_scores, spotting_scores, strs, Averaging, MatchReport,
    MetricsReport,
};
pub use pipeline::{EvalConfig, PipelineError};
pub use synth::{BumpShape, SuiteSpec, SynthSpec};
pub use train::{TinyModel, TrainConfig};
pub use types::{
    Annotation, DecoderConfig, Event, Interval, LabeledInterval, Manifest, ManifestEntry,
    ProbabilityTrack, NEUTRAL,
};

/// Version of the on-disk formats written by this crate.
pub const FORMAT_VERSION: u32 = 1;
