//! Shared inputs for the benchmarks.

use mekit::synth::{generate, SynthSpec, SynthVideo};
use mekit::train::{sample_segments, SamplingConfig, Sequence, TargetEncoding};

/// A seeded synthetic video of `frames` frames with one event per 100 frames.
pub fn video(frames: usize, seed: u64) -> SynthVideo {
    generate(&SynthSpec {
        seed,
        frames,
        n_events: frames / 100,
        ..SynthSpec::default()
    })
    .expect("feasible spec")
}

/// Training segments cut from a 600-frame video.
pub fn segments(seed: u64) -> Vec<Sequence> {
    let v = video(600, seed);
    let cfg = SamplingConfig {
        segment_len: 50,
        neg_pos_ratio: 1.0,
        encoding: TargetEncoding::Hard,
    };
    sample_segments(&v.track, &v.annotation, &cfg, seed)
        .expect("track is long enough")
        .segments
        .into_iter()
        .map(|s| s.sequence)
        .collect()
}
