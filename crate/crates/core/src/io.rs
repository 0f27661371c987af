//! File formats.
//!
//! * Track CSV: header `frame,spot,p_<label0>,...`, one row per frame, frames
//!   `0..T` in order.
//! * Annotation, manifest, intervals and report files are JSON.
//!
//! Reals are written in the shortest decimal form that parses back to the same
//! `f64`, so every write/read cycle is lossless. All writes go through a
//! temporary file in the target directory followed by a rename.

use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::types::{
    validate_labels, Annotation, Event, Interval, LabeledInterval, Manifest, ProbabilityTrack,
};

/// Emotion rows whose sum is within this distance of 1 are accepted on read
/// and rescaled to sum to 1.
pub const READ_ROW_SUM_TOLERANCE: f64 = 1e-3;

/// Rows closer to 1 than this are left untouched on read.
const RENORMALIZE_EPSILON: f64 = 1e-12;

/// Frame rate assumed when a track is read without manifest metadata.
pub const DEFAULT_FPS: f64 = 30.0;

/// Writes `bytes` to `path` via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    std::io::Write::write_all(&mut tmp, bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn from_json<T: for<'de> Deserialize<'de>>(path: &Path, text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    s.push('\n');
    s
}

// ---------------------------------------------------------------------------
// Tracks

/// Reads a track CSV. The video id is the file stem, the subject id is empty
/// and the frame rate is [`DEFAULT_FPS`].
pub fn read_track(path: &Path) -> Result<ProbabilityTrack> {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_track_with_meta(path, &stem, "", DEFAULT_FPS)
}

pub fn read_track_with_meta(
    path: &Path,
    video_id: &str,
    subject_id: &str,
    fps: f64,
) -> Result<ProbabilityTrack> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_track(file, video_id, subject_id, fps)
}

/// Parses Track CSV text from any reader.
pub fn parse_track<R: Read>(
    reader: R,
    video_id: &str,
    subject_id: &str,
    fps: f64,
) -> Result<ProbabilityTrack> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(r) => r.map_err(|e| malformed(1, e))?,
        None => {
            return Err(Error::MalformedRow {
                line: 1,
                reason: "missing header".into(),
            })
        }
    };
    if header.len() < 4 || &header[0] != "frame" || &header[1] != "spot" {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "header must be frame,spot,p_<label>,... with at least two classes".into(),
        });
    }
    let mut labels = Vec::with_capacity(header.len() - 2);
    for col in header.iter().skip(2) {
        match col.strip_prefix("p_") {
            Some(l) => labels.push(l.to_string()),
            None => {
                return Err(Error::MalformedRow {
                    line: 1,
                    reason: format!("column {col:?} lacks the p_ prefix"),
                })
            }
        }
    }
    validate_labels(&labels)?;

    let mut spot = Vec::new();
    let mut emo = Vec::new();
    for (i, record) in records.enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| malformed(line, e))?;
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let frame: usize = record[0].trim().parse().map_err(|_| Error::MalformedRow {
            line,
            reason: format!("bad frame index {:?}", &record[0]),
        })?;
        if frame != i {
            return Err(Error::NonContiguousFrames {
                line,
                expected: i,
                found: frame,
            });
        }
        let mut values = Vec::with_capacity(record.len() - 1);
        for field in record.iter().skip(1) {
            let v: f64 = field.trim().parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("bad number {field:?}"),
            })?;
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::ProbabilityOutOfRange {
                    value: v,
                    context: format!("line {line}"),
                });
            }
            values.push(v);
        }
        let mut row = values.split_off(1);
        let sum: f64 = row.iter().sum();
        let gap = (sum - 1.0).abs();
        if gap > READ_ROW_SUM_TOLERANCE {
            return Err(Error::RowSumOutOfTolerance { line, sum });
        }
        if gap > RENORMALIZE_EPSILON {
            row.iter_mut().for_each(|v| *v /= sum);
        }
        spot.push(values[0]);
        emo.push(row);
    }
    ProbabilityTrack::new(video_id, subject_id, fps, spot, emo, labels)
}

fn malformed(line: usize, e: csv::Error) -> Error {
    Error::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

pub fn track_to_csv(track: &ProbabilityTrack) -> String {
    let mut out = String::from("frame,spot");
    for l in track.labels() {
        out.push_str(",p_");
        out.push_str(l);
    }
    out.push('\n');
    for (frame, (s, row)) in track.spot().iter().zip(track.emo()).enumerate() {
        write!(out, "{frame},{s}").unwrap();
        for p in row {
            write!(out, ",{p}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn write_track(track: &ProbabilityTrack, path: &Path) -> Result<()> {
    write_atomic(path, track_to_csv(track).as_bytes())
}

// ---------------------------------------------------------------------------
// Annotations

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    onset: usize,
    apex: usize,
    offset: usize,
    label: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnnotation {
    video_id: String,
    subject_id: String,
    fps: f64,
    events: Vec<RawEvent>,
}

pub fn parse_annotation(path: &Path, text: &str) -> Result<Annotation> {
    let raw: RawAnnotation = from_json(path, text)?;
    let events = raw
        .events
        .into_iter()
        .map(|e| {
            Ok(Event {
                interval: Interval::new(e.onset, e.apex, e.offset)?,
                label: e.label,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ann = Annotation {
        video_id: raw.video_id,
        subject_id: raw.subject_id,
        fps: raw.fps,
        events,
    };
    ann.validate()?;
    Ok(ann)
}

pub fn read_annotation(path: &Path) -> Result<Annotation> {
    parse_annotation(path, &read_to_string(path)?)
}

pub fn annotation_to_json(ann: &Annotation) -> String {
    to_json(&RawAnnotation {
        video_id: ann.video_id.clone(),
        subject_id: ann.subject_id.clone(),
        fps: ann.fps,
        events: ann
            .events
            .iter()
            .map(|e| RawEvent {
                onset: e.interval.onset(),
                apex: e.interval.apex(),
                offset: e.interval.offset(),
                label: e.label.clone(),
            })
            .collect(),
    })
}

pub fn write_annotation(ann: &Annotation, path: &Path) -> Result<()> {
    write_atomic(path, annotation_to_json(ann).as_bytes())
}

// ---------------------------------------------------------------------------
// Manifests

pub fn parse_manifest(path: &Path, text: &str) -> Result<Manifest> {
    let m: Manifest = from_json(path, text)?;
    m.validate()?;
    Ok(m)
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    parse_manifest(path, &read_to_string(path)?)
}

pub fn manifest_to_json(m: &Manifest) -> String {
    to_json(m)
}

pub fn write_manifest(m: &Manifest, path: &Path) -> Result<()> {
    write_atomic(path, manifest_to_json(m).as_bytes())
}

// ---------------------------------------------------------------------------
// Decoded intervals

/// One line of an intervals file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalRecord {
    pub video_id: String,
    pub onset: usize,
    pub apex: usize,
    pub offset: usize,
    pub label: String,
    pub confidence: f64,
}

impl IntervalRecord {
    pub fn new(video_id: &str, li: &LabeledInterval) -> Self {
        Self {
            video_id: video_id.to_string(),
            onset: li.interval.onset(),
            apex: li.interval.apex(),
            offset: li.interval.offset(),
            label: li.label.clone(),
            confidence: li.confidence,
        }
    }

    pub fn to_labeled(&self) -> Result<LabeledInterval> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::ProbabilityOutOfRange {
                value: self.confidence,
                context: format!("confidence of {} interval", self.video_id),
            });
        }
        Ok(LabeledInterval {
            interval: Interval::new(self.onset, self.apex, self.offset)?,
            label: self.label.clone(),
            confidence: self.confidence,
        })
    }
}

pub fn intervals_to_json(video_id: &str, intervals: &[LabeledInterval]) -> String {
    let records: Vec<IntervalRecord> = intervals
        .iter()
        .map(|li| IntervalRecord::new(video_id, li))
        .collect();
    to_json(&records)
}

pub fn write_intervals(video_id: &str, intervals: &[LabeledInterval], path: &Path) -> Result<()> {
    write_atomic(path, intervals_to_json(video_id, intervals).as_bytes())
}

pub fn parse_intervals(path: &Path, text: &str) -> Result<Vec<IntervalRecord>> {
    let records: Vec<IntervalRecord> = from_json(path, text)?;
    for r in &records {
        r.to_labeled()?;
    }
    Ok(records)
}

pub fn read_intervals(path: &Path) -> Result<Vec<IntervalRecord>> {
    parse_intervals(path, &read_to_string(path)?)
}

// ---------------------------------------------------------------------------
// Reports

pub fn report_to_json(report: &MetricsReport) -> String {
    to_json(report)
}

pub fn read_report(path: &Path) -> Result<MetricsReport> {
    from_json(path, &read_to_string(path)?)
}

/// One row per video and a final `ALL` row.
pub fn report_to_csv(report: &MetricsReport) -> String {
    let mut out =
        String::from("video_id,tp,fp,fn,precision,recall,f1_spot,iou_tp,iou_all,f1_rec,uf1,uar,strs\n");
    for v in &report.per_video {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            v.video_id,
            v.tp,
            v.fp,
            v.r#fn,
            v.precision,
            v.recall,
            v.f1_spot,
            v.iou_tp,
            v.iou_all,
            v.f1_rec,
            v.uf1,
            v.uar,
            v.strs
        )
        .unwrap();
    }
    let r = report;
    writeln!(
        out,
        "ALL,{},{},{},{},{},{},{},{},{},{},{},{}",
        r.tp, r.fp, r.r#fn, r.precision, r.recall, r.f1_spot, r.iou_tp, r.iou_all, r.f1_rec, r.uf1, r.uar, r.strs
    )
    .unwrap();
    out
}

/// Writes the JSON report to `path` and its CSV twin next to it.
pub fn write_report(report: &MetricsReport, path: &Path) -> Result<()> {
    write_atomic(path, report_to_json(report).as_bytes())?;
    write_atomic(&path.with_extension("csv"), report_to_csv(report).as_bytes())
}
