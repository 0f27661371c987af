#![allow(dead_code)]

pub mod reference;

use mekit::rng::SplitMix64;
use mekit::DecoderConfig;

/// A smoothed random walk in `[0, 1]` with occasional quantisation, so that
/// plateaus and exact ties show up often.
pub fn random_track(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    let mut v = rng.next_f64();
    let step = rng.uniform(0.02, 0.4);
    let quantum = match rng.range_inclusive(0, 2) {
        0 => None,
        1 => Some(0.05),
        _ => Some(0.25),
    };
    (0..len)
        .map(|_| {
            v = (v + rng.uniform(-step, step)).clamp(0.0, 1.0);
            if rng.next_f64() < 0.03 {
                v = rng.next_f64();
            }
            match quantum {
                Some(q) => ((v / q).round() * q).min(1.0),
                None => v,
            }
        })
        .collect()
}

/// A valid decoder configuration with `theta_low <= theta_high`.
pub fn random_config(rng: &mut SplitMix64) -> DecoderConfig {
    let a = rng.uniform(0.0, 0.8);
    let b = rng.uniform(0.0, 0.8);
    DecoderConfig {
        k: rng.range_inclusive(1, 30),
        theta_low: a.min(b),
        theta_high: a.max(b),
        patience: rng.range_inclusive(1, 4),
        min_peak_height: rng.uniform(0.3, 0.95),
        nms_iou: rng.uniform(0.0, 0.9),
    }
}

/// Fixed-seed runner without on-disk failure persistence.
pub fn proptest_config(cases: u32) -> proptest::prelude::ProptestConfig {
    proptest::prelude::ProptestConfig {
        cases,
        failure_persistence: None,
        rng_seed: proptest::test_runner::RngSeed::Fixed(0x006d_656b_6974),
        ..Default::default()
    }
}

use mekit::train::{batch_loss, gradients, FrameTargets, ModelShape, Sequence, TinyModel};

/// A random model with every parameter drawn from `U(-1, 1)`, a small batch and
/// positive class weights.
pub fn random_training_problem(seed: u64) -> (TinyModel, Vec<Sequence>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let shape = ModelShape {
        window: 2 * rng.range_inclusive(0, 3) + 1,
        features: rng.range_inclusive(1, 4),
        hidden: rng.range_inclusive(1, 6),
        classes: rng.range_inclusive(2, 5),
    };
    let mut model = TinyModel::zeros(shape);
    model.params.for_each_mut(|p| *p = rng.uniform(-1.0, 1.0));
    let batch = (0..rng.range_inclusive(1, 3))
        .map(|_| {
            let len = rng.range_inclusive(1, 12);
            Sequence {
                features: (0..len)
                    .map(|_| (0..shape.features).map(|_| rng.uniform(-1.0, 1.0)).collect())
                    .collect(),
                targets: FrameTargets {
                    spot: (0..len).map(|_| rng.next_f64()).collect(),
                    class: (0..len).map(|_| rng.range_inclusive(0, shape.classes - 1)).collect(),
                },
            }
        })
        .collect();
    let weights = (0..shape.classes).map(|_| rng.uniform(0.1, 3.0)).collect();
    (model, batch, weights)
}

/// Largest relative error between analytic and central-difference gradients,
/// with denominator `max(|a|, |b|, 1e-8)`.
pub fn gradient_check(model: &TinyModel, batch: &[Sequence], weights: &[f64], step: f64) -> f64 {
    let (analytic, _) = gradients(model, batch, weights).unwrap();
    let analytic = analytic.flatten();
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let mut plus = model.clone();
        *plus.params.get_mut(i) += step;
        let mut minus = model.clone();
        *minus.params.get_mut(i) -= step;
        let lp = batch_loss(&plus, batch, weights).unwrap().total;
        let lm = batch_loss(&minus, batch, weights).unwrap().total;
        let numeric = (lp - lm) / (2.0 * step);
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        worst = worst.max(err);
    }
    worst
}

use mekit::{Annotation, Event, Interval, Manifest, ManifestEntry, ProbabilityTrack};

pub fn random_labels(rng: &mut SplitMix64) -> Vec<String> {
    let n = rng.range_inclusive(2, 6);
    std::iter::once("neutral".to_string())
        .chain((1..n).map(|i| format!("emo{i}")))
        .collect()
}

fn random_simplex(rng: &mut SplitMix64, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.next_f64() + 1e-9).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / s).collect()
}

pub fn random_valid_track(rng: &mut SplitMix64) -> ProbabilityTrack {
    let labels = random_labels(rng);
    let len = rng.range_inclusive(1, 60);
    let spot = (0..len)
        .map(|_| match rng.range_inclusive(0, 5) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.next_f64(),
        })
        .collect();
    let emo = (0..len).map(|_| random_simplex(rng, labels.len())).collect();
    ProbabilityTrack::new("track", "", 30.0, spot, emo, labels).unwrap()
}

pub fn random_annotation(rng: &mut SplitMix64) -> Annotation {
    let labels = random_labels(rng);
    let mut at = rng.range_inclusive(0, 10);
    let events = (0..rng.range_inclusive(0, 6))
        .map(|_| {
            let len = rng.range_inclusive(0, 30);
            let apex = at + rng.range_inclusive(0, len);
            let iv = Interval::new(at, apex, at + len).unwrap();
            at += len + 1 + rng.range_inclusive(0, 20);
            Event {
                interval: iv,
                label: labels[rng.range_inclusive(1, labels.len() - 1)].clone(),
            }
        })
        .collect();
    Annotation {
        video_id: format!("vid_{}", rng.next_u64() % 1000),
        subject_id: format!("s{}", rng.next_u64() % 50),
        fps: [25.0, 30.0, 200.0, rng.uniform(1.0, 240.0)][rng.range_inclusive(0, 3)],
        events,
    }
}

pub fn random_manifest(rng: &mut SplitMix64) -> Manifest {
    let labels = random_labels(rng);
    let class_priors = random_simplex(rng, labels.len());
    let entries = (0..rng.range_inclusive(0, 8))
        .map(|i| ManifestEntry {
            video_id: format!("v{i:03}"),
            subject_id: format!("s{}", rng.next_u64() % 5),
            track_path: format!("tracks/v{i:03}.csv"),
            annotation_path: format!("annotations/v{i:03}.json"),
            fps: rng.uniform(1.0, 240.0),
        })
        .collect();
    Manifest {
        labels,
        class_priors,
        entries,
    }
}
