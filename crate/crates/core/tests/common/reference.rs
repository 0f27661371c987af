//! A second SISS decoder written frame by frame from the decoding rules. It
//! shares no code with the library apart from the `Interval` type, and it
//! trades speed for directness: every quantity is recomputed from scratch.

use mekit::{DecoderConfig, Interval};

/// Frames `a..=b` as a set-like range, inclusive on both ends.
fn frames(iv: &Interval) -> std::ops::RangeInclusive<usize> {
    iv.onset()..=iv.offset()
}

/// Overlap counted frame by frame.
pub fn ref_iou(a: &Interval, b: &Interval) -> f64 {
    let inter = frames(a).filter(|f| frames(b).contains(f)).count();
    let union = frames(a).chain(frames(b)).collect::<std::collections::BTreeSet<_>>().len();
    inter as f64 / union as f64
}

/// Peak candidates as (index, height), sorted by height desc then index asc.
pub fn ref_peaks(spot: &[f64], floor: f64) -> Vec<(usize, f64)> {
    let n = spot.len();
    let mut out = Vec::new();
    for i in 0..n {
        let v = spot[i];
        let lo = (0..=i).rev().take_while(|&j| spot[j] == v).last().unwrap();
        let hi = (i..n).take_while(|&j| spot[j] == v).last().unwrap();
        let left_ok = lo == 0 || spot[lo - 1] < v;
        let right_ok = hi == n - 1 || spot[hi + 1] < v;
        if left_ok && right_ok && v >= floor && i == (lo + hi) / 2 {
            out.push((i, v));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}

/// Outcome of extending in one direction: the frames looked at, nearest
/// first, and the boundary.
fn side(spot: &[f64], apex: usize, step: isize, cfg: &DecoderConfig) -> (Vec<usize>, usize) {
    let along: Vec<usize> = (1..)
        .map(|d: isize| apex as isize + step * d)
        .take_while(|&f| f >= 0 && (f as usize) < spot.len())
        .map(|f| f as usize)
        .collect();
    let violates = |f: usize| {
        let bar = if f.abs_diff(apex) <= cfg.k / 2 { cfg.theta_low } else { cfg.theta_high };
        spot[f] < bar
    };
    // The walk stops on the first frame that completes `patience` violations in a row.
    let stop = (0..along.len())
        .find(|&i| i + 1 >= cfg.patience && (i + 1 - cfg.patience..=i).all(|j| violates(along[j])));
    let seen = match stop {
        Some(i) => along[..=i].to_vec(),
        None => along,
    };
    let boundary = seen.iter().rev().copied().find(|&f| !violates(f)).unwrap_or(apex);
    (seen, boundary)
}

fn ref_extend(spot: &[f64], start: usize, cfg: &DecoderConfig) -> Interval {
    let mut apex = start;
    loop {
        let (l_seen, onset) = side(spot, apex, -1, cfg);
        let (r_seen, offset) = side(spot, apex, 1, cfg);
        let seen: Vec<usize> = l_seen.into_iter().chain(r_seen).collect();
        let top = seen.iter().map(|&f| spot[f]).fold(f64::NEG_INFINITY, f64::max);
        if top > spot[apex] {
            apex = *seen.iter().filter(|&&f| spot[f] == top).min().unwrap();
            continue;
        }
        let best = frames(&Interval::span(onset, offset).unwrap())
            .map(|f| spot[f])
            .fold(f64::NEG_INFINITY, f64::max);
        let argmax = (onset..=offset).find(|&f| spot[f] == best).unwrap();
        return Interval::new(onset, argmax, offset).unwrap();
    }
}

pub fn reference_decode_siss(spot: &[f64], cfg: &DecoderConfig) -> Vec<Interval> {
    let mut proposals: Vec<Interval> = Vec::new();
    for (p, _) in ref_peaks(spot, cfg.min_peak_height) {
        if proposals.iter().any(|iv| frames(iv).contains(&p)) {
            continue;
        }
        proposals.push(ref_extend(spot, p, cfg));
    }
    // Suppression: highest apex first, ties broken by onset then offset.
    let mut order: Vec<usize> = (0..proposals.len()).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = (&proposals[i], &proposals[j]);
        spot[b.apex()]
            .partial_cmp(&spot[a.apex()])
            .unwrap()
            .then((a.onset(), a.offset()).cmp(&(b.onset(), b.offset())))
    });
    let mut kept: Vec<Interval> = Vec::new();
    for i in order {
        let cand = proposals[i];
        if kept.iter().all(|k| ref_iou(k, &cand) <= cfg.nms_iou) {
            kept.push(cand);
        }
    }
    kept.sort_by_key(|iv| (iv.onset(), iv.apex(), iv.offset()));
    kept
}
