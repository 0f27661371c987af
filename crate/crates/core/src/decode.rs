//! Spotting-track decoders.
//!
//! Both decoders start from the same peak candidates. [`decode_fixed`] places a
//! window of exactly `k` frames around each peak. [`decode_siss`] grows each
//! interval outwards from its apex with a two-level threshold: frames within
//! `k / 2` of the apex only need `theta_low`, frames further out need
//! `theta_high`, and a direction stops after `patience` consecutive failing
//! frames. When the walk passes a frame higher than the current apex the apex
//! moves there and the walk starts over.

use crate::metrics::iou;
use crate::types::{DecoderConfig, Interval};

/// A local maximum of the spotting track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub index: usize,
    pub height: f64,
}

/// Plateau-aware local maxima with `height >= min_peak_height`.
///
/// A maximal run of equal values qualifies when it is strictly above both
/// neighbours, the sequence ends counting as negative infinity. The run is
/// represented by the floor of its midpoint. Sorted by (height desc, index asc).
pub fn find_peaks(spot: &[f64], min_peak_height: f64) -> Vec<Peak> {
    let mut peaks = Vec::new();
    let mut start = 0;
    while start < spot.len() {
        let value = spot[start];
        let mut end = start;
        while end + 1 < spot.len() && spot[end + 1] == value {
            end += 1;
        }
        let left_lower = start == 0 || spot[start - 1] < value;
        let right_lower = end + 1 == spot.len() || spot[end + 1] < value;
        if left_lower && right_lower && value >= min_peak_height {
            peaks.push(Peak {
                index: (start + end) / 2,
                height: value,
            });
        }
        start = end + 1;
    }
    sort_peaks(&mut peaks);
    peaks
}

fn sort_peaks(peaks: &mut [Peak]) {
    peaks.sort_by(|a, b| b.height.total_cmp(&a.height).then(a.index.cmp(&b.index)));
}

/// Greedy suppression in order of apex height desc; an interval is dropped when
/// its IoU with any kept interval exceeds `max_iou`. Output sorted by onset.
pub fn non_max_suppression(spot: &[f64], mut intervals: Vec<Interval>, max_iou: f64) -> Vec<Interval> {
    intervals.sort_by(|a, b| {
        spot[b.apex()]
            .total_cmp(&spot[a.apex()])
            .then(a.onset().cmp(&b.onset()))
            .then(a.offset().cmp(&b.offset()))
    });
    let mut kept: Vec<Interval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        if kept.iter().all(|k| iou(k, &iv) <= max_iou) {
            kept.push(iv);
        }
    }
    kept.sort();
    kept
}

/// Fixed-width baseline: a `k`-frame window around every peak, clamped to the
/// track, followed by NMS.
pub fn decode_fixed(spot: &[f64], config: &DecoderConfig) -> Vec<Interval> {
    if spot.is_empty() {
        return Vec::new();
    }
    let last = spot.len() - 1;
    let back = (config.k - 1) / 2;
    let intervals = find_peaks(spot, config.min_peak_height)
        .into_iter()
        .map(|p| {
            // Signed arithmetic so the left clamp can see negative onsets.
            let onset = p.index as i64 - back as i64;
            let offset = onset + config.k as i64 - 1;
            let onset = onset.clamp(0, last as i64) as usize;
            let offset = offset.clamp(0, last as i64) as usize;
            Interval::new(onset, p.index, offset).expect("window contains its peak")
        })
        .collect();
    non_max_suppression(spot, intervals, config.nms_iou)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Left,
    Right,
}

struct Walk {
    /// Last non-violating frame, or the apex.
    boundary: usize,
    /// Highest visited frame, earliest on ties.
    best: Option<usize>,
}

/// Extends from `apex` one frame at a time in `dir`.
fn walk(spot: &[f64], apex: usize, dir: Direction, config: &DecoderConfig) -> Walk {
    let half = config.k / 2;
    let mut boundary = apex;
    let mut best: Option<usize> = None;
    let mut run = 0;
    let mut f = apex;
    loop {
        f = match dir {
            Direction::Left if f > 0 => f - 1,
            Direction::Right if f + 1 < spot.len() => f + 1,
            _ => break,
        };
        let v = spot[f];
        match best {
            // Walking left visits earlier frames later, so ties move the best back.
            Some(b) if v > spot[b] || (v == spot[b] && f < b) => best = Some(f),
            None => best = Some(f),
            _ => {}
        }
        let bar = if f.abs_diff(apex) <= half {
            config.theta_low
        } else {
            config.theta_high
        };
        if v < bar {
            run += 1;
            if run >= config.patience {
                break;
            }
        } else {
            run = 0;
            boundary = f;
        }
    }
    Walk { boundary, best }
}

/// Grows one interval from a starting apex, moving the apex while the walk
/// uncovers strictly higher frames.
pub fn extend_from(spot: &[f64], start: usize, config: &DecoderConfig) -> Interval {
    let mut apex = start;
    loop {
        let left = walk(spot, apex, Direction::Left, config);
        let right = walk(spot, apex, Direction::Right, config);
        let higher = [left.best, right.best]
            .into_iter()
            .flatten()
            .filter(|&f| spot[f] > spot[apex])
            .min_by(|&a, &b| spot[b].total_cmp(&spot[a]).then(a.cmp(&b)));
        match higher {
            Some(f) => apex = f,
            None => {
                let (onset, offset) = (left.boundary, right.boundary);
                let top = earliest_argmax(&spot[onset..=offset]) + onset;
                return Interval::new(onset, top, offset).expect("apex lies inside its interval");
            }
        }
    }
}

fn earliest_argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Scalable interval selection decoder.
///
/// Peaks are visited in (height desc, index asc) order; a peak already inside an
/// accepted interval is skipped. Overlaps between the resulting intervals are
/// resolved by NMS and the output is sorted by onset.
pub fn decode_siss(spot: &[f64], config: &DecoderConfig) -> Vec<Interval> {
    let mut accepted: Vec<Interval> = Vec::new();
    for peak in find_peaks(spot, config.min_peak_height) {
        if accepted.iter().any(|iv| iv.contains(peak.index)) {
            continue;
        }
        accepted.push(extend_from(spot, peak.index, config));
    }
    non_max_suppression(spot, accepted, config.nms_iou)
}

/// Which decoder to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    #[default]
    Siss,
    Fixed,
}

impl DecoderKind {
    pub fn decode(self, spot: &[f64], config: &DecoderConfig) -> Vec<Interval> {
        match self {
            DecoderKind::Siss => decode_siss(spot, config),
            DecoderKind::Fixed => decode_fixed(spot, config),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, low: f64, high: f64, floor: f64) -> DecoderConfig {
        DecoderConfig {
            k,
            theta_low: low,
            theta_high: high,
            patience: 2,
            min_peak_height: floor,
            nms_iou: 0.3,
        }
    }

    fn iv(a: usize, b: usize, c: usize) -> Interval {
        Interval::new(a, b, c).unwrap()
    }

    #[test]
    fn peaks_fixtures() {
        assert!(find_peaks(&[0.0; 10], 0.5).is_empty());
        assert_eq!(
            find_peaks(&[0.0, 0.2, 0.8, 0.2, 0.0], 0.5),
            vec![Peak { index: 2, height: 0.8 }]
        );
        assert_eq!(
            find_peaks(&[0.0, 0.9, 0.9, 0.0], 0.5),
            vec![Peak { index: 1, height: 0.9 }]
        );
        assert!(find_peaks(&[], 0.0).is_empty());
    }

    #[test]
    fn peaks_at_boundaries_and_shoulders() {
        // Sequence ends count as -inf neighbours.
        assert_eq!(find_peaks(&[0.9, 0.1, 0.7], 0.5).len(), 2);
        // A shoulder plateau next to a higher frame is not a peak.
        assert_eq!(find_peaks(&[0.7, 0.7, 0.9, 0.1], 0.5).len(), 1);
        // Constant track is one plateau bounded by -inf on both sides.
        assert_eq!(
            find_peaks(&[0.8; 5], 0.5),
            vec![Peak { index: 2, height: 0.8 }]
        );
        let p = find_peaks(&[0.7, 0.1, 0.9, 0.1, 0.9], 0.5);
        assert_eq!(p.iter().map(|p| p.index).collect::<Vec<_>>(), vec![2, 4, 0]);
    }

    #[test]
    fn fixed_window_fixtures() {
        let mut spot = vec![0.0; 30];
        spot[10] = 0.9;
        assert_eq!(decode_fixed(&spot, &cfg(5, 0.25, 0.5, 0.6)), vec![iv(8, 10, 12)]);

        let mut spot = vec![0.0; 10];
        spot[1] = 0.9;
        assert_eq!(decode_fixed(&spot, &cfg(5, 0.25, 0.5, 0.6)), vec![iv(0, 1, 3)]);

        assert!(decode_fixed(&[0.1; 10], &cfg(5, 0.25, 0.5, 0.6)).is_empty());
    }

    #[test]
    fn even_k_window_extends_right() {
        let mut spot = vec![0.0; 30];
        spot[10] = 0.9;
        assert_eq!(decode_fixed(&spot, &cfg(4, 0.25, 0.5, 0.6)), vec![iv(9, 10, 12)]);
    }

    #[test]
    fn siss_traced_fixture_dual_threshold() {
        let spot = [0.0, 0.1, 0.3, 0.7, 0.9, 0.7, 0.6, 0.55, 0.1, 0.05, 0.0, 0.0];
        assert_eq!(decode_siss(&spot, &cfg(4, 0.2, 0.5, 0.6)), vec![iv(2, 4, 7)]);
    }

    #[test]
    fn siss_traced_fixture_single_dip_tolerated() {
        let spot = [0.0, 0.8, 0.15, 0.8, 0.0];
        assert_eq!(decode_siss(&spot, &cfg(6, 0.2, 0.5, 0.6)), vec![iv(1, 1, 3)]);
    }

    #[test]
    fn siss_below_floor_is_empty() {
        assert!(decode_siss(&[0.3; 20], &cfg(5, 0.2, 0.5, 0.6)).is_empty());
    }

    #[test]
    fn siss_reselects_higher_apex() {
        // Peak at 2 (0.7) is first only if higher; here the walk from 2 reaches 5.
        let spot = [0.0, 0.3, 0.7, 0.6, 0.8, 0.95, 0.4, 0.0, 0.0];
        let out = extend_from(&spot, 2, &cfg(6, 0.2, 0.5, 0.6));
        assert_eq!(out.apex(), 5);
        assert_eq!(out, extend_from(&spot, 5, &cfg(6, 0.2, 0.5, 0.6)));
    }

    #[test]
    fn siss_patience_one_stops_at_first_violation() {
        let spot = [0.0, 0.8, 0.15, 0.8, 0.0];
        let c = DecoderConfig {
            patience: 1,
            ..cfg(6, 0.2, 0.5, 0.6)
        };
        assert_eq!(
            decode_siss(&spot, &c),
            vec![iv(1, 1, 1), iv(3, 3, 3)]
        );
    }

    #[test]
    fn nms_drops_heavy_overlap() {
        let spot = [0.1, 0.5, 0.9, 0.8, 0.1, 0.1];
        let out = non_max_suppression(&spot, vec![iv(0, 3, 4), iv(1, 2, 4), iv(5, 5, 5)], 0.3);
        assert_eq!(out, vec![iv(1, 2, 4), iv(5, 5, 5)]);
    }
}
