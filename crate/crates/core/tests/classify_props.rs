mod common;

use mekit::{assign_emotion, penalize, Interval, PenaltyConfig, ProbabilityTrack};
use proptest::prelude::*;

fn labels(n: usize) -> Vec<String> {
    std::iter::once("neutral".to_string())
        .chain((1..n).map(|i| format!("c{i}")))
        .collect()
}

fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..1.0, n).prop_map(|v| {
        let s: f64 = v.iter().sum();
        v.into_iter().map(|x| x / s).collect()
    })
}

fn track_and_priors() -> impl Strategy<Value = (ProbabilityTrack, Vec<f64>)> {
    (2usize..6).prop_flat_map(|n| {
        (prop::collection::vec(simplex(n), 1..30), simplex(n)).prop_map(move |(rows, priors)| {
            let spot = vec![0.5; rows.len()];
            let t = ProbabilityTrack::new("v", "s", 30.0, spot, rows, labels(n)).unwrap();
            (t, priors)
        })
    })
}

proptest! {
    #![proptest_config(common::proptest_config(300))]

    #[test]
    fn neutral_is_never_assigned((track, priors) in track_and_priors(), mode in 0usize..3) {
        let cfg = match mode {
            0 => PenaltyConfig::none(),
            1 => PenaltyConfig::default(),
            _ => PenaltyConfig::custom(priors.iter().map(|p| 1.0 - p / 2.0).collect()),
        };
        let iv = Interval::span(0, track.len() - 1).unwrap();
        let li = assign_emotion(&track, &iv, &priors, &cfg).unwrap();
        prop_assert_ne!(li.label.as_str(), "neutral");
        prop_assert!(track.labels().contains(&li.label));
        prop_assert!((0.0..=1.0).contains(&li.confidence));
    }

    #[test]
    fn scaling_custom_weights_changes_nothing(
        (track, priors) in track_and_priors(),
        scale in 0.01f64..100.0,
    ) {
        let w: Vec<f64> = priors.iter().map(|p| 1.0 / (p + 0.1)).collect();
        let scaled: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let a = penalize(&track.emo()[0], &priors, &PenaltyConfig::custom(w.clone())).unwrap();
        let b = penalize(&track.emo()[0], &priors, &PenaltyConfig::custom(scaled.clone())).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        let iv = Interval::span(0, track.len() - 1).unwrap();
        let la = assign_emotion(&track, &iv, &priors, &PenaltyConfig::custom(w)).unwrap();
        let lb = assign_emotion(&track, &iv, &priors, &PenaltyConfig::custom(scaled)).unwrap();
        prop_assert_eq!(la.label, lb.label);
    }

    #[test]
    fn penalized_scores_form_a_distribution((track, priors) in track_and_priors()) {
        let s = penalize(&track.emo()[0], &priors, &PenaltyConfig::default()).unwrap();
        prop_assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(s.iter().all(|&v| v >= 0.0));
    }
}
