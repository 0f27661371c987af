use std::path::Path;
use std::process::{Command, Output};

fn mekit(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mekit"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_suite_spec(dir: &Path, n_videos: usize) {
    std::fs::write(
        dir.join("suite.json"),
        format!(r#"{{"template": {{"frames": 600, "n_events": 2}}, "n_videos": {n_videos}, "base_seed": 11}}"#),
    )
    .unwrap();
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn synth_then_eval_runs_clean() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_suite_spec(d, 6);
    let o = mekit(&["synth", "suite.json", "--out", "suite"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = mekit(&["eval", "suite/manifest.json", "--out-dir", "ev"], d);
    assert!(o.status.success(), "{}", stderr(&o));

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("ev/report.json")).unwrap()).unwrap();
    let f1 = report["f1_spot"].as_f64().unwrap();
    let rec = report["f1_rec"].as_f64().unwrap();
    assert_eq!(report["strs"].as_f64().unwrap(), f1 * rec);
    assert!(d.join("ev/report.csv").exists());
    let curve = std::fs::read_to_string(d.join("ev/curves/synth_0000.csv")).unwrap();
    assert!(curve.starts_with("frame,spot,decoded,s_neutral,"));
    assert_eq!(curve.lines().count(), 601);
}

#[test]
fn eval_on_given_predictions_and_thread_counts_agree() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_suite_spec(d, 4);
    assert!(mekit(&["synth", "suite.json", "--out", "suite"], d).status.success());
    std::fs::create_dir(d.join("pred")).unwrap();
    for i in 0..4 {
        let id = format!("synth_{i:04}");
        let o = mekit(
            &[
                "decode",
                &format!("suite/tracks/{id}.csv"),
                "--out",
                &format!("pred/{id}.json"),
                "--manifest",
                "suite/manifest.json",
            ],
            d,
        );
        assert!(o.status.success(), "{}", stderr(&o));
    }
    assert!(mekit(&["eval", "suite/manifest.json", "--out-dir", "a"], d).status.success());
    let o = mekit(&["eval", "suite/manifest.json", "--out-dir", "b", "--predictions", "pred"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = Command::new(env!("CARGO_BIN_EXE_mekit"))
        .args(["eval", "suite/manifest.json", "--out-dir", "c"])
        .env("ME_KIT_THREADS", "1")
        .current_dir(d)
        .output()
        .unwrap();
    assert!(o.status.success());
    let read = |p: &str| std::fs::read(d.join(p)).unwrap();
    assert_eq!(read("a/report.json"), read("b/report.json"));
    assert_eq!(read("a/report.json"), read("c/report.json"));
}

#[test]
fn malformed_track_exits_two_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "frame,spot,p_neutral,p_a\n0,0.1,0.5,0.5\n1,0.2,0.5\n").unwrap();
    let o = mekit(&["decode", "bad.csv", "--out", "out.json"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));
    assert!(!d.join("out.json").exists());
}

#[test]
fn missing_file_exits_two_without_partial_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_suite_spec(d, 3);
    assert!(mekit(&["synth", "suite.json", "--out", "suite"], d).status.success());
    std::fs::remove_file(d.join("suite/tracks/synth_0001.csv")).unwrap();
    let o = mekit(&["eval", "suite/manifest.json", "--out-dir", "ev"], d);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("synth_0001.csv"));
    assert!(!d.join("ev").exists());
}

#[test]
fn flat_track_decodes_to_an_empty_list() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("frame,spot,p_neutral,p_a\n");
    for f in 0..40 {
        csv.push_str(&format!("{f},0.1,0.9,0.1\n"));
    }
    std::fs::write(d.join("flat.csv"), csv).unwrap();
    let o = mekit(&["decode", "flat.csv", "--out", "flat.json"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("flat.json")).unwrap()).unwrap();
    assert_eq!(v, serde_json::json!([]));
}

#[test]
fn traindemo_with_zero_rate_logs_constant_loss() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_suite_spec(d, 4);
    assert!(mekit(&["synth", "suite.json", "--out", "suite"], d).status.success());
    let o = mekit(
        &["traindemo", "suite/manifest.json", "--out", "td", "--lr", "0", "--epochs", "4", "--holdout", "1"],
        d,
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let log = std::fs::read_to_string(d.join("td/train_log.csv")).unwrap();
    let totals: Vec<&str> = log.lines().skip(1).map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(totals.len(), 4);
    assert!(totals.iter().all(|t| *t == totals[0]));
    for f in ["checkpoint.json", "holdout_report.json", "holdout_report.csv"] {
        assert!(d.join("td").join(f).exists(), "{f}");
    }
}

#[test]
fn config_file_flags_and_print() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("run.json"), r#"{"eval": {"patience": 4, "theta_high": 0.55}}"#).unwrap();
    let o = mekit(&["eval", "m.json", "--config", "run.json", "--patience", "3", "--print-config"], d);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["eval"]["patience"], 3);
    assert_eq!(v["eval"]["theta_high"], 0.55);

    std::fs::write(d.join("typo.json"), r#"{"eval": {"patiense": 4}}"#).unwrap();
    let o = mekit(&["eval", "m.json", "--config", "typo.json", "--print-config"], d);
    assert_eq!(o.status.code(), Some(2));
    let o = mekit(&["eval", "m.json", "--theta-low", "0.9", "--print-config"], d);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn version_exits_zero() {
    let o = mekit(&["version"], Path::new("."));
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("format version 1"));
}
