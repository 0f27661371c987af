//! Interval matching and spot-then-recognize scores.
//!
//! Spotting counts a prediction as a true positive when it is matched
//! one-to-one to a ground truth with IoU strictly above 0.5. Counts, IoU pairs
//! and confusion matrices are pooled across videos before any ratio is taken.

use serde::{Deserialize, Serialize};

use crate::types::{Event, Interval, LabeledInterval, NEUTRAL};

/// IoU above which a matched pair counts as a true positive.
pub const TP_IOU_THRESHOLD: f64 = 0.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("confusion matrix is not square: row {row} has {len} columns, expected {expected}")]
    NonSquareMatrix {
        row: usize,
        len: usize,
        expected: usize,
    },
    #[error("label {0:?} is not an emotion class of this label set")]
    UnknownLabel(String),
}

/// Temporal IoU over inclusive frame sets.
pub fn iou(a: &Interval, b: &Interval) -> f64 {
    let inter = a.overlap(b);
    let union = a.len() + b.len() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchPair {
    pub pred: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchPair>,
    pub fp: Vec<usize>,
    pub r#fn: Vec<usize>,
    pub threshold: f64,
}

/// Greedy one-to-one matching of predictions to ground truths.
///
/// Candidate pairs with `iou > threshold` are accepted in order of
/// (iou desc, pred index asc, gt index asc), skipping indices already used.
pub fn match_intervals(preds: &[Interval], gts: &[Interval], threshold: f64) -> MatchReport {
    let mut candidates = Vec::new();
    for (p, a) in preds.iter().enumerate() {
        for (g, b) in gts.iter().enumerate() {
            let v = iou(a, b);
            if v > threshold {
                candidates.push(MatchPair { pred: p, gt: g, iou: v });
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.iou
            .total_cmp(&x.iou)
            .then(x.pred.cmp(&y.pred))
            .then(x.gt.cmp(&y.gt))
    });

    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if !pred_used[c.pred] && !gt_used[c.gt] {
            pred_used[c.pred] = true;
            gt_used[c.gt] = true;
            pairs.push(c);
        }
    }
    MatchReport {
        pairs,
        fp: (0..preds.len()).filter(|&i| !pred_used[i]).collect(),
        r#fn: (0..gts.len()).filter(|&i| !gt_used[i]).collect(),
        threshold,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpottingScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

pub fn spotting_scores(tp: usize, fp: usize, fn_: usize) -> SpottingScores {
    let precision = ratio(tp as f64, (tp + fp) as f64);
    let recall = ratio(tp as f64, (tp + fn_) as f64);
    let f1 = ratio(2.0 * precision * recall, precision + recall);
    SpottingScores {
        precision,
        recall,
        f1,
    }
}

/// `(iou_tp, iou_all)` from the IoUs of pairs matched at threshold 0.
pub fn iou_summaries(ious: &[f64]) -> (f64, f64) {
    let mean = |it: &mut dyn Iterator<Item = f64>| {
        let (sum, n) = it.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        ratio(sum, n as f64)
    };
    let iou_all = mean(&mut ious.iter().copied());
    let iou_tp = mean(&mut ious.iter().copied().filter(|&v| v > TP_IOU_THRESHOLD));
    (iou_tp, iou_all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    #[default]
    Macro,
    Micro,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecognitionScores {
    /// UF1 under macro averaging, micro F1 otherwise.
    pub f1_rec: f64,
    pub uf1: f64,
    pub uar: f64,
    pub micro_f1: f64,
}

/// Scores from a confusion matrix with ground truth along rows.
pub fn recognition_scores(
    confusion: &[Vec<u64>],
    averaging: Averaging,
) -> Result<RecognitionScores, MetricsError> {
    let c = confusion.len();
    for (row, r) in confusion.iter().enumerate() {
        if r.len() != c {
            return Err(MetricsError::NonSquareMatrix {
                row,
                len: r.len(),
                expected: c,
            });
        }
    }
    if c == 0 {
        return Ok(RecognitionScores {
            f1_rec: 0.0,
            uf1: 0.0,
            uar: 0.0,
            micro_f1: 0.0,
        });
    }
    let mut f1_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut trace = 0u64;
    let mut total = 0u64;
    for k in 0..c {
        let tp = confusion[k][k];
        let support: u64 = confusion[k].iter().sum();
        let predicted: u64 = confusion.iter().map(|r| r[k]).sum();
        let fp = predicted - tp;
        let fn_ = support - tp;
        f1_sum += ratio(2.0 * tp as f64, (2 * tp + fp + fn_) as f64);
        recall_sum += ratio(tp as f64, support as f64);
        trace += tp;
        total += support;
    }
    let uf1 = f1_sum / c as f64;
    let uar = recall_sum / c as f64;
    let micro_f1 = ratio(trace as f64, total as f64);
    let f1_rec = match averaging {
        Averaging::Macro => uf1,
        Averaging::Micro => micro_f1,
    };
    Ok(RecognitionScores {
        f1_rec,
        uf1,
        uar,
        micro_f1,
    })
}

/// Spot-then-recognize score.
pub fn strs(f1_spot: f64, f1_rec: f64) -> f64 {
    f1_spot * f1_rec
}

/// Raw per-video evaluation counts. Tallies combine by concatenation and
/// element-wise addition, so pooling is order-independent up to float
/// summation order, which [`build_report`] fixes by video order.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTally {
    pub video_id: String,
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    /// IoUs of the one-to-one pairs matched at threshold 0.
    pub pair_ious: Vec<f64>,
    /// Rows: ground-truth emotion, columns: predicted emotion; neutral excluded.
    pub confusion: Vec<Vec<u64>>,
}

fn emotion_index(labels: &[String], label: &str) -> Result<usize, MetricsError> {
    labels
        .iter()
        .position(|l| l == label)
        .filter(|&i| i > 0 && label != NEUTRAL)
        .map(|i| i - 1)
        .ok_or_else(|| MetricsError::UnknownLabel(label.to_string()))
}

/// Matches one video's predictions against its ground truth.
pub fn evaluate_video(
    video_id: &str,
    preds: &[LabeledInterval],
    gts: &[Event],
    labels: &[String],
) -> Result<VideoTally, MetricsError> {
    let pred_iv: Vec<Interval> = preds.iter().map(|p| p.interval).collect();
    let gt_iv: Vec<Interval> = gts.iter().map(|g| g.interval).collect();
    let tp_match = match_intervals(&pred_iv, &gt_iv, TP_IOU_THRESHOLD);
    let all_match = match_intervals(&pred_iv, &gt_iv, 0.0);

    let c = labels.len().saturating_sub(1);
    let mut confusion = vec![vec![0u64; c]; c];
    for pair in &tp_match.pairs {
        let truth = emotion_index(labels, &gts[pair.gt].label)?;
        let guess = emotion_index(labels, &preds[pair.pred].label)?;
        confusion[truth][guess] += 1;
    }
    Ok(VideoTally {
        video_id: video_id.to_string(),
        tp: tp_match.pairs.len(),
        fp: tp_match.fp.len(),
        r#fn: tp_match.r#fn.len(),
        pair_ious: all_match.pairs.iter().map(|p| p.iou).collect(),
        confusion,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMetrics {
    pub video_id: String,
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1_spot: f64,
    pub iou_tp: f64,
    pub iou_all: f64,
    pub f1_rec: f64,
    pub uf1: f64,
    pub uar: f64,
    pub strs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: usize,
    pub fp: usize,
    pub r#fn: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1_spot: f64,
    pub iou_tp: f64,
    pub iou_all: f64,
    /// Emotion classes indexing the confusion matrix.
    pub emotion_labels: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub averaging: Averaging,
    pub f1_rec: f64,
    pub uf1: f64,
    pub uar: f64,
    pub strs: f64,
    pub per_video: Vec<VideoMetrics>,
}

fn summarize(
    tp: usize,
    fp: usize,
    fn_: usize,
    ious: &[f64],
    confusion: &[Vec<u64>],
    averaging: Averaging,
) -> (SpottingScores, (f64, f64), RecognitionScores) {
    let spot = spotting_scores(tp, fp, fn_);
    let ious = iou_summaries(ious);
    let rec = recognition_scores(confusion, averaging).expect("tally confusion is square");
    (spot, ious, rec)
}

/// Pools per-video tallies (in the given order) into one report.
pub fn build_report(tallies: &[VideoTally], labels: &[String], averaging: Averaging) -> MetricsReport {
    let c = labels.len().saturating_sub(1);
    let mut confusion = vec![vec![0u64; c]; c];
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let mut ious = Vec::new();
    let mut per_video = Vec::with_capacity(tallies.len());

    for t in tallies {
        tp += t.tp;
        fp += t.fp;
        fn_ += t.r#fn;
        ious.extend_from_slice(&t.pair_ious);
        for (acc, row) in confusion.iter_mut().zip(&t.confusion) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        let (s, (iou_tp, iou_all), r) =
            summarize(t.tp, t.fp, t.r#fn, &t.pair_ious, &t.confusion, averaging);
        per_video.push(VideoMetrics {
            video_id: t.video_id.clone(),
            tp: t.tp,
            fp: t.fp,
            r#fn: t.r#fn,
            precision: s.precision,
            recall: s.recall,
            f1_spot: s.f1,
            iou_tp,
            iou_all,
            f1_rec: r.f1_rec,
            uf1: r.uf1,
            uar: r.uar,
            strs: strs(s.f1, r.f1_rec),
        });
    }

    let (s, (iou_tp, iou_all), r) = summarize(tp, fp, fn_, &ious, &confusion, averaging);
    MetricsReport {
        tp,
        fp,
        r#fn: fn_,
        precision: s.precision,
        recall: s.recall,
        f1_spot: s.f1,
        iou_tp,
        iou_all,
        emotion_labels: labels.iter().skip(1).cloned().collect(),
        confusion,
        averaging,
        f1_rec: r.f1_rec,
        uf1: r.uf1,
        uar: r.uar,
        strs: strs(s.f1, r.f1_rec),
        per_video,
    }
}
