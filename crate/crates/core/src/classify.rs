//! Emotion assignment for decoded intervals.
//!
//! The recognition rows inside an interval are averaged, reweighted against the
//! class prior to suppress majority classes, and the best non-neutral class is
//! taken: a decoded interval is already asserted to be an expression.

use serde::{Deserialize, Serialize};

use crate::types::{Interval, LabeledInterval, ProbabilityTrack};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ClassifyError {
    #[error("all class scores are zero after penalization")]
    AllZeroAfterPenalty,
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("class {0} has zero prior and epsilon is zero")]
    ZeroPrior(usize),
    #[error("custom penalty mode requires weights")]
    MissingWeights,
    #[error("interval {onset}..={offset} exceeds a track of {len} frames")]
    IntervalOutOfRange {
        onset: usize,
        offset: usize,
        len: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyMode {
    None,
    #[default]
    InversePrior,
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenaltyConfig {
    pub mode: PenaltyMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    pub epsilon: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            mode: PenaltyMode::InversePrior,
            weights: None,
            epsilon: 1e-6,
        }
    }
}

impl PenaltyConfig {
    pub fn none() -> Self {
        Self {
            mode: PenaltyMode::None,
            ..Self::default()
        }
    }

    pub fn inverse_prior(epsilon: f64) -> Self {
        Self {
            mode: PenaltyMode::InversePrior,
            weights: None,
            epsilon,
        }
    }

    pub fn custom(weights: Vec<f64>) -> Self {
        Self {
            mode: PenaltyMode::Custom,
            weights: Some(weights),
            epsilon: 1e-6,
        }
    }
}

fn renormalize(mut scores: Vec<f64>) -> Result<Vec<f64>, ClassifyError> {
    let total: f64 = scores.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(ClassifyError::AllZeroAfterPenalty);
    }
    scores.iter_mut().for_each(|s| *s /= total);
    Ok(scores)
}

/// Reweights a class distribution and renormalizes it.
///
/// `inverse_prior` divides by `prior + epsilon`, `custom` multiplies by the
/// configured weights.
pub fn penalize(dist: &[f64], priors: &[f64], cfg: &PenaltyConfig) -> Result<Vec<f64>, ClassifyError> {
    match cfg.mode {
        PenaltyMode::None => Ok(dist.to_vec()),
        PenaltyMode::InversePrior => {
            if priors.len() != dist.len() {
                return Err(ClassifyError::LengthMismatch {
                    expected: dist.len(),
                    got: priors.len(),
                });
            }
            let mut scores = Vec::with_capacity(dist.len());
            for (i, (&d, &p)) in dist.iter().zip(priors).enumerate() {
                let den = p + cfg.epsilon;
                if den <= 0.0 {
                    return Err(ClassifyError::ZeroPrior(i));
                }
                scores.push(d / den);
            }
            renormalize(scores)
        }
        PenaltyMode::Custom => {
            let weights = cfg.weights.as_ref().ok_or(ClassifyError::MissingWeights)?;
            if weights.len() != dist.len() {
                return Err(ClassifyError::LengthMismatch {
                    expected: dist.len(),
                    got: weights.len(),
                });
            }
            renormalize(dist.iter().zip(weights).map(|(d, w)| d * w).collect())
        }
    }
}

/// Mean emotion distribution over the frames of `interval`.
pub fn mean_distribution(track: &ProbabilityTrack, interval: &Interval) -> Result<Vec<f64>, ClassifyError> {
    if interval.offset() >= track.len() {
        return Err(ClassifyError::IntervalOutOfRange {
            onset: interval.onset(),
            offset: interval.offset(),
            len: track.len(),
        });
    }
    let mut mean = vec![0.0; track.num_classes()];
    for row in &track.emo()[interval.onset()..=interval.offset()] {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    let n = interval.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Labels one interval with its most likely non-neutral class.
///
/// Ties resolve to the lowest class index. Confidence is the chosen class's
/// penalized mass over the total non-neutral mass (0 when that total is 0).
pub fn assign_emotion(
    track: &ProbabilityTrack,
    interval: &Interval,
    priors: &[f64],
    cfg: &PenaltyConfig,
) -> Result<LabeledInterval, ClassifyError> {
    let scores = penalize(&mean_distribution(track, interval)?, priors, cfg)?;
    let mut best = 1;
    for c in 2..scores.len() {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    let emotion_mass: f64 = scores[1..].iter().sum();
    let confidence = if emotion_mass > 0.0 {
        (scores[best] / emotion_mass).clamp(0.0, 1.0)
    } else {
        0.0
    };
    Ok(LabeledInterval {
        interval: *interval,
        label: track.labels()[best].clone(),
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn track(rows: Vec<Vec<f64>>) -> ProbabilityTrack {
        let n = rows.len();
        ProbabilityTrack::new(
            "v",
            "s",
            30.0,
            vec![0.5; n],
            rows,
            vec!["neutral".into(), "A".into(), "B".into()],
        )
        .unwrap()
    }

    #[test]
    fn uniform_priors_leave_distribution_unchanged() {
        let dist = [0.2, 0.5, 0.3];
        let out = penalize(&dist, &[1.0 / 3.0; 3], &PenaltyConfig::default()).unwrap();
        for (a, b) in out.iter().zip(dist) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn inverse_prior_fixture() {
        let out = penalize(&[0.5, 0.5], &[0.8, 0.2], &PenaltyConfig::inverse_prior(0.0)).unwrap();
        assert!((out[0] - 0.2).abs() < 1e-12);
        assert!((out[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn none_is_identity() {
        let dist = [0.1, 0.6, 0.3];
        assert_eq!(penalize(&dist, &[0.9, 0.05, 0.05], &PenaltyConfig::none()).unwrap(), dist);
    }

    #[test]
    fn penalty_errors() {
        assert_eq!(
            penalize(&[0.5, 0.5], &[0.0, 0.0], &PenaltyConfig::custom(vec![0.0, 0.0])),
            Err(ClassifyError::AllZeroAfterPenalty)
        );
        assert_eq!(
            penalize(&[0.5, 0.5], &[0.0, 1.0], &PenaltyConfig::inverse_prior(0.0)),
            Err(ClassifyError::ZeroPrior(0))
        );
        assert!(penalize(&[0.5, 0.5], &[0.5], &PenaltyConfig::default()).is_err());
    }

    #[test]
    fn assign_fixtures() {
        let iv = Interval::span(0, 2).unwrap();
        let t = track(vec![vec![0.1, 0.6, 0.3]; 3]);
        let li = assign_emotion(&t, &iv, &[1.0 / 3.0; 3], &PenaltyConfig::none()).unwrap();
        assert_eq!(li.label, "A");
        assert!((li.confidence - 0.6 / 0.9).abs() < 1e-12);

        let t2 = track(vec![vec![0.0, 0.5, 0.5]; 3]);
        let li = assign_emotion(&t2, &iv, &[1.0 / 3.0; 3], &PenaltyConfig::none()).unwrap();
        assert_eq!(li.label, "A");

        // 0.1/0.34, 0.6/0.56, 0.3/0.10 -> B dominates.
        let li = assign_emotion(&t, &iv, &[0.34, 0.56, 0.10], &PenaltyConfig::inverse_prior(0.0)).unwrap();
        assert_eq!(li.label, "B");
        let expect = 3.0 / (0.6 / 0.56 + 3.0);
        assert!((li.confidence - expect).abs() < 1e-12);
    }

    #[test]
    fn neutral_is_masked() {
        let iv = Interval::span(0, 1).unwrap();
        let t = track(vec![vec![0.9, 0.04, 0.06]; 2]);
        let li = assign_emotion(&t, &iv, &[1.0 / 3.0; 3], &PenaltyConfig::none()).unwrap();
        assert_eq!(li.label, "B");
        let t = track(vec![vec![1.0, 0.0, 0.0]; 2]);
        let li = assign_emotion(&t, &iv, &[1.0 / 3.0; 3], &PenaltyConfig::none()).unwrap();
        assert_eq!((li.label.as_str(), li.confidence), ("A", 0.0));
    }

    #[test]
    fn out_of_range_interval() {
        let t = track(vec![vec![0.1, 0.6, 0.3]; 3]);
        let iv = Interval::span(1, 3).unwrap();
        assert!(matches!(
            assign_emotion(&t, &iv, &[1.0 / 3.0; 3], &PenaltyConfig::none()),
            Err(ClassifyError::IntervalOutOfRange { .. })
        ));
    }
}
