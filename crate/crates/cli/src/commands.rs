//! Subcommand bodies. Each one validates every input before it writes
//! anything, and every file is written atomically.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use mekit::io::{read_intervals, read_manifest, read_track_with_meta, write_atomic, write_intervals, write_report};
use mekit::pipeline::{curve_csv, decode_track, evaluate, load_suite, LoadedVideo, Predictions};
use mekit::synth::{generate_suite, SuiteSpec, SynthError};
use mekit::train::{evaluate_model, train_on, Checkpoint, TrainError};
use mekit::LabeledInterval;

use crate::config::RunConfig;
use crate::failure::{Failure, ResultExt};

fn out_path(flag: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, Failure> {
    flag.or_else(|| cfg.out.clone())
        .ok_or_else(|| Failure::invalid("no output path: pass --out or set \"out\" in the config"))
}

fn to_pretty_json<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(value).expect("in-memory values serialize");
    s.push('\n');
    s.into_bytes()
}

pub struct DecodeInput {
    pub track: PathBuf,
    pub out: Option<PathBuf>,
    pub fps: Option<f64>,
    pub video_id: Option<String>,
    pub manifest: Option<PathBuf>,
}

pub fn decode(input: DecodeInput, cfg: &RunConfig) -> Result<String, Failure> {
    let out = out_path(input.out, cfg)?;
    let video_id = input.video_id.unwrap_or_else(|| {
        input
            .track
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let fps = input.fps.unwrap_or(mekit::io::DEFAULT_FPS);
    let track = read_track_with_meta(&input.track, &video_id, "", fps).invalid()?;
    let priors = match &input.manifest {
        Some(path) => {
            let m = read_manifest(path).invalid()?;
            if m.labels != track.labels() {
                return Err(Failure::invalid(format!(
                    "track classes {:?} differ from manifest classes {:?}",
                    track.labels(),
                    m.labels
                )));
            }
            m.class_priors
        }
        // Without a manifest every class is equally likely a priori.
        None => vec![1.0 / track.num_classes() as f64; track.num_classes()],
    };
    let intervals = decode_track(&track, &cfg.eval, &priors).invalid()?;
    write_intervals(&video_id, &intervals, &out).internal()?;
    Ok(format!("{video_id}: {} intervals -> {}", intervals.len(), out.display()))
}

/// Reads `<dir>/<video_id>.json` for every video.
fn load_predictions(dir: &Path, videos: &[LoadedVideo]) -> Result<HashMap<String, Vec<LabeledInterval>>, Failure> {
    let mut out = HashMap::new();
    for v in videos {
        let id = &v.entry.video_id;
        let path = dir.join(format!("{id}.json"));
        let mut intervals = Vec::new();
        for r in read_intervals(&path).invalid()? {
            if &r.video_id != id {
                return Err(Failure::invalid(format!(
                    "{}: record for video {} in the file for {id}",
                    path.display(),
                    r.video_id
                )));
            }
            let li = r.to_labeled().invalid()?;
            if li.interval.offset() >= v.track.len() {
                return Err(Failure::invalid(format!(
                    "{}: interval ending at frame {} exceeds {} frames",
                    path.display(),
                    li.interval.offset(),
                    v.track.len()
                )));
            }
            intervals.push(li);
        }
        out.insert(id.clone(), intervals);
    }
    Ok(out)
}

pub fn eval(manifest: &Path, out: Option<PathBuf>, predictions: Option<&Path>, cfg: &RunConfig) -> Result<String, Failure> {
    let out = out_path(out, cfg)?;
    let (m, videos) = load_suite(manifest).invalid()?;
    let given = predictions.map(|dir| load_predictions(dir, &videos)).transpose()?;
    let lookup = |v: &LoadedVideo| given.as_ref().map(|g| g[&v.entry.video_id].clone()).unwrap_or_default();
    let source = match given {
        Some(_) => Predictions::Given(&lookup),
        None => Predictions::Decode,
    };
    let (report, results) = evaluate(&m, &videos, &cfg.eval, source).invalid()?;
    let curves = videos
        .iter()
        .zip(&results)
        .map(|(v, r)| curve_csv(&v.track, &r.intervals, &m.class_priors, &cfg.eval.penalty).map(|c| (&r.video_id, c)))
        .collect::<Result<Vec<_>, _>>()
        .invalid()?;

    write_report(&report, &out.join("report.json")).internal()?;
    for (id, csv) in curves {
        write_atomic(&out.join("curves").join(format!("{id}.csv")), csv.as_bytes()).internal()?;
    }
    Ok(format!(
        "{} videos: f1_spot {:.4} f1_rec {:.4} strs {:.4} iou_all {:.4} -> {}",
        videos.len(),
        report.f1_spot,
        report.f1_rec,
        report.strs,
        report.iou_all,
        out.display()
    ))
}

pub fn synth(spec_path: &Path, out: Option<PathBuf>, cfg: &RunConfig) -> Result<String, Failure> {
    let out = out_path(out, cfg)?;
    let text = std::fs::read_to_string(spec_path)
        .map_err(|e| mekit::Error::io(spec_path, e))
        .invalid()?;
    let suite: SuiteSpec = serde_json::from_str(&text)
        .map_err(|e| anyhow::anyhow!("{}: {e}", spec_path.display()))
        .invalid()?;
    suite.template.validate().invalid()?;
    let manifest = generate_suite(&suite, &out).map_err(|e| match e {
        SynthError::InfeasibleSpec(_) => Failure::Invalid(e.into()),
        SynthError::Core(_) => Failure::Internal(e.into()),
    })?;
    Ok(format!("{} videos -> {}", manifest.entries.len(), out.display()))
}

fn train_failure(e: TrainError) -> Failure {
    match e {
        TrainError::DivergedLoss { .. } | TrainError::Model(_) => Failure::Internal(e.into()),
        _ => Failure::Invalid(e.into()),
    }
}

pub fn traindemo(manifest: &Path, out: Option<PathBuf>, cfg: &RunConfig) -> Result<String, Failure> {
    let out = out_path(out, cfg)?;
    let (m, videos) = load_suite(manifest).invalid()?;
    let (model, log) = train_on(&m, &videos, &cfg.train).map_err(train_failure)?;
    let (_, holdout) = mekit::train::split_holdout(&videos, cfg.train.holdout).map_err(train_failure)?;
    let report = evaluate_model(&model, &m, holdout, cfg.train.segment_len, &cfg.eval).map_err(train_failure)?;

    let checkpoint = Checkpoint {
        config: cfg.train.clone(),
        model,
    };
    write_atomic(&out.join("checkpoint.json"), &to_pretty_json(&checkpoint)).internal()?;
    write_atomic(&out.join("train_log.csv"), log.to_csv().as_bytes()).internal()?;
    write_report(&report, &out.join("holdout_report.json")).internal()?;
    let (first, last) = (log.epochs.first(), log.epochs.last());
    Ok(format!(
        "loss {:.4} -> {:.4} over {} epochs; held-out f1_spot {:.4} -> {}",
        first.map_or(f64::NAN, |e| e.total),
        last.map_or(f64::NAN, |e| e.total),
        log.epochs.len(),
        report.f1_spot,
        out.display()
    ))
}
