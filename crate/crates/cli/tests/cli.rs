use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adarc_core::climax::{predict_unsupervised, Method, PredictionRecord};
use adarc_core::eval::{climax_recall, parse_predictions, read_report, KS, WINDOWS};
use adarc_core::ingest::{read_annotations, Rational};
use adarc_core::seqmodel::load_checkpoint;
use adarc_core::signals::{encode_signals, read_signals, SignalTrack};
use adarc_core::synth::SynthManifest;
use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn adarc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adarc"))
        .arg("--quiet")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = adarc(args);
    assert!(
        out.status.success(),
        "adarc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Synthetic corpus with extracted signals.
fn corpus(dir: &Path, kind: &str, n: usize, seed: u64) -> PathBuf {
    let d = dir.join(format!("{kind}{n}"));
    ok(&["--seed", &seed.to_string(), "synth", "--kind", kind, "--n", &n.to_string(), "--out", s(&d)]);
    ok(&["extract", "--data-dir", s(&d)]);
    d
}

fn read(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn manifest(p: &Path) -> serde_json::Value {
    serde_json::from_slice(&read(p)).unwrap()
}

fn signal_fixture(dir: &Path, name: &str, seconds: usize, cut: Option<(usize, usize)>) -> PathBuf {
    let mut track = SignalTrack {
        fps: Rational::new(1, 1),
        audio: (0..seconds).map(|i| (i as f64 * 0.7).sin().abs()).collect(),
        shots: vec![[0; 5]; seconds],
        flow: vec![0.0; seconds],
    };
    if let Some((a, b)) = cut {
        for v in &mut track.shots[a..=b] {
            *v = [1, 1, 0, 0, 0];
        }
    }
    let p = dir.join(format!("{name}.jsonl"));
    std::fs::write(&p, encode_signals(name, &track)).unwrap();
    p
}

fn predictions(p: &Path) -> Vec<PredictionRecord> {
    parse_predictions(&String::from_utf8(read(p)).unwrap()).unwrap()
}

#[test]
fn synth_records_climax_seconds_and_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for d in [&a, &b] {
        ok(&["--seed", "1", "synth", "--kind", "climax", "--n", "20", "--out", s(d)]);
    }
    let m: SynthManifest = serde_json::from_slice(&read(&a.join("synth.json"))).unwrap();
    assert_eq!(m.video_ids.len(), 20);
    assert_eq!(m.climax_seconds.len(), 20);
    assert!(m.climax_seconds.values().all(|&c| c < m.config.duration_sec));
    assert_eq!(read_annotations(a.join("annotations.jsonl")).unwrap().len(), 20);
    for rel in ["annotations.jsonl", "features.jsonl", "synth.json", "video/clx0007.y4m", "audio/clx0007.wav"] {
        assert_eq!(read(&a.join(rel)), read(&b.join(rel)), "{rel} differs");
    }
    let run = manifest(&a.join("manifest.json"));
    assert_eq!(run["command"], "synth");
    assert_eq!(run["seed"], 1);
    assert_eq!(run["config"]["n"], 20);
}

#[test]
fn synth_rejects_tiny_corpora() {
    let tmp = TempDir::new().unwrap();
    let out = adarc(&["synth", "--kind", "sentiment", "--n", "3", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("at least 5"));
}

#[test]
fn audio_method_finds_every_planted_spike() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 10, 5);
    let out = tmp.path().join("audio.jsonl");
    ok(&["predict", "--method", "audio", "--k", "1", "--signals", s(&d.join("signals.jsonl")), "--out", s(&out)]);
    let m: SynthManifest = serde_json::from_slice(&read(&d.join("synth.json"))).unwrap();
    for p in predictions(&out) {
        assert_eq!(p.timestamps_sec, vec![m.climax_seconds[&p.video_id] as u32], "{}", p.video_id);
    }
}

#[test]
fn extract_writes_one_line_per_frame_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().join("c");
    ok(&["--seed", "2", "synth", "--kind", "climax", "--n", "6", "--out", s(&d)]);
    let video = d.join("video/clx0002.y4m");
    let audio = d.join("audio/clx0002.wav");
    let one = tmp.path().join("one.jsonl");
    let two = tmp.path().join("two.jsonl");
    for out in [&one, &two] {
        ok(&["extract", "--video", s(&video), "--audio", s(&audio), "--out", s(out)]);
    }
    let text = String::from_utf8(read(&one)).unwrap();
    assert_eq!(text.lines().count(), 25 * 4);
    assert_eq!(read(&one), read(&two));

    let serial = tmp.path().join("serial.jsonl");
    let parallel = tmp.path().join("parallel.jsonl");
    ok(&["--jobs", "1", "extract", "--data-dir", s(&d), "--out", s(&serial)]);
    ok(&["--jobs", "3", "extract", "--data-dir", s(&d), "--out", s(&parallel)]);
    assert_eq!(read(&serial), read(&parallel));
    let batch = String::from_utf8(read(&serial)).unwrap();
    let part: String = batch.lines().filter(|l| l.contains("\"clx0002\"")).map(|l| format!("{l}\n")).collect();
    assert_eq!(part, text);
}

#[test]
fn extract_reports_missing_audio() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().join("c");
    ok(&["synth", "--kind", "climax", "--n", "5", "--out", s(&d)]);
    let missing = tmp.path().join("nowhere.wav");
    let out = adarc(&[
        "extract", "--video", s(&d.join("video/clx0000.y4m")), "--audio", s(&missing),
        "--out", s(&tmp.path().join("x.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nowhere.wav"), "{}", stderr(&out));
}

#[test]
fn extract_reports_malformed_video_with_offset() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path().join("c");
    ok(&["synth", "--kind", "climax", "--n", "5", "--out", s(&d)]);
    let video = d.join("video/clx0000.y4m");
    let mut bytes = read(&video);
    bytes.truncate(bytes.len() - 10);
    std::fs::write(&video, bytes).unwrap();
    let out = adarc(&["extract", "--data-dir", s(&d)]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("clx0000.y4m") && msg.contains("byte"), "{msg}");
}

#[test]
fn baseline_predicts_fixed_seconds() {
    let tmp = TempDir::new().unwrap();
    let sig = signal_fixture(tmp.path(), "long", 40, None);
    let out = tmp.path().join("p.jsonl");
    ok(&["predict", "--method", "baseline", "--k", "3", "--signals", s(&sig), "--out", s(&out)]);
    assert_eq!(predictions(&out)[0].timestamps_sec, vec![5, 15, 25]);
}

#[test]
fn shots_method_picks_the_centre_of_the_only_run() {
    let tmp = TempDir::new().unwrap();
    let sig = signal_fixture(tmp.path(), "cut", 30, Some((10, 14)));
    let out = tmp.path().join("p.jsonl");
    ok(&["predict", "--method", "shots", "--k", "1", "--signals", s(&sig), "--out", s(&out)]);
    assert_eq!(predictions(&out)[0].timestamps_sec, vec![12]);
}

#[test]
fn unsupervised_predictions_equal_library_calls() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 8, 9);
    let signals = read_signals(d.join("signals.jsonl")).unwrap();
    for method in [Method::Audio, Method::Flow, Method::Shots, Method::Baseline] {
        let out = tmp.path().join(format!("{method}.jsonl"));
        ok(&[
            "predict", "--method", method.as_str(), "--k", "3",
            "--signals", s(&d.join("signals.jsonl")), "--out", s(&out),
        ]);
        let expected: Vec<PredictionRecord> = signals
            .iter()
            .map(|(id, t)| PredictionRecord::new(id, 3, predict_unsupervised(t, method, 3)))
            .collect();
        assert_eq!(predictions(&out), expected, "{method}");
    }
}

#[test]
fn lstm_needs_a_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let sig = signal_fixture(tmp.path(), "v", 10, None);
    let out = adarc(&["predict", "--method", "lstm", "--signals", s(&sig), "--out", s(&tmp.path().join("p"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--checkpoint"));
}

#[test]
fn evaluate_matches_library_recall() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 20, 4);
    let preds = tmp.path().join("baseline.jsonl");
    ok(&["predict", "--method", "baseline", "--k", "3", "--signals", s(&d.join("signals.jsonl")), "--out", s(&preds)]);
    let report_path = tmp.path().join("report.json");
    ok(&["evaluate", "--task", "climax", "--predictions", s(&preds), "--data-dir", s(&d), "--out", s(&report_path)]);

    let records = read_annotations(d.join("annotations.jsonl")).unwrap();
    let map: HashMap<String, Vec<u32>> = predictions(&preds)
        .into_iter()
        .map(|p| (p.video_id, p.timestamps_sec))
        .collect();
    let report = read_report(&report_path).unwrap();
    let row = &report.climax.unwrap().rows[0];
    assert_eq!(row.method, "baseline");
    for k in KS {
        for w in WINDOWS {
            assert_eq!(row.get(k, w).unwrap(), climax_recall(&map, &records, k, w).unwrap(), "k={k} w={w}");
        }
    }
    assert!(report_path.with_extension("txt").exists());
}

#[test]
fn evaluate_names_the_bad_line() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 5, 4);
    let preds = tmp.path().join("p.jsonl");
    ok(&["predict", "--method", "audio", "--signals", s(&d.join("signals.jsonl")), "--out", s(&preds)]);
    let mut text = String::from_utf8(read(&preds)).unwrap();
    text.insert_str(text.find('\n').unwrap() + 1, "{\"video_id\": 3}\n");
    std::fs::write(&preds, text).unwrap();
    let out = adarc(&["evaluate", "--task", "climax", "--predictions", s(&preds), "--data-dir", s(&d), "--out", s(&tmp.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn evaluate_rejects_empty_annotations() {
    let tmp = TempDir::new().unwrap();
    let ann = tmp.path().join("annotations.jsonl");
    std::fs::write(&ann, "").unwrap();
    let sig = signal_fixture(tmp.path(), "v", 10, None);
    let preds = tmp.path().join("p.jsonl");
    ok(&["predict", "--method", "baseline", "--signals", s(&sig), "--out", s(&preds)]);
    let out = adarc(&["evaluate", "--task", "climax", "--predictions", s(&preds), "--annotations", s(&ann), "--out", s(&tmp.path().join("r.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("no videos"));
}

#[test]
fn zero_step_training_writes_the_initial_model() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 10, 3);
    let out = tmp.path().join("m");
    ok(&["--seed", "11", "train", "--task", "climax", "--data-dir", s(&d), "--out", s(&out), "--steps", "0"]);
    let ckpt = load_checkpoint(out.join("checkpoint.ckpt"), None).unwrap();
    assert_eq!(ckpt.step, 0);
    assert_eq!(ckpt.seed, 11);
    assert!(out.join("train_log.csv").exists());
    let m = manifest(&out.join("manifest.json"));
    assert_eq!(m["command"], "train");
    assert_eq!(m["config"]["steps"], 0);
}

#[test]
fn training_is_bitwise_reproducible_and_flags_override_config() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 10, 3);
    let cfg = tmp.path().join("train.toml");
    std::fs::write(&cfg, "steps = 50\nbatch = 4\neval_every = 5\nblocks = [\"flow\", \"shots\", \"audio\"]\n").unwrap();
    let mut ckpts = Vec::new();
    for name in ["a", "b"] {
        let out = tmp.path().join(name);
        ok(&["--seed", "7", "--config", s(&cfg), "train", "--data-dir", s(&d), "--out", s(&out), "--steps", "12"]);
        ckpts.push(read(&out.join("checkpoint.ckpt")));
        let log = String::from_utf8(read(&out.join("train_log.csv"))).unwrap();
        assert_eq!(log.lines().count(), 1 + 12);
    }
    assert_eq!(ckpts[0], ckpts[1]);
    let other = tmp.path().join("c");
    ok(&["--seed", "8", "--config", s(&cfg), "train", "--data-dir", s(&d), "--out", s(&other), "--steps", "12"]);
    assert_ne!(read(&other.join("checkpoint.ckpt")), ckpts[0]);
}

#[test]
fn unknown_config_keys_are_input_errors() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 5, 3);
    let cfg = tmp.path().join("train.toml");
    std::fs::write(&cfg, "stepz = 5\n").unwrap();
    let out = adarc(&["--config", s(&cfg), "train", "--data-dir", s(&d), "--out", s(&tmp.path().join("m"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("stepz"));
}

#[test]
fn divergence_exits_with_the_numeric_code() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 10, 3);
    let out = adarc(&["train", "--data-dir", s(&d), "--out", s(&tmp.path().join("m")), "--steps", "20", "--lr", "1e308"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("step"), "{}", stderr(&out));
}

#[test]
fn manifests_hash_their_inputs() {
    let tmp = TempDir::new().unwrap();
    let sig = signal_fixture(tmp.path(), "v", 12, None);
    let out = tmp.path().join("p.jsonl");
    ok(&["predict", "--method", "audio", "--signals", s(&sig), "--out", s(&out)]);
    let m = manifest(&tmp.path().join("p.jsonl.manifest.json"));
    let expected: String = Sha256::digest(read(&sig)).iter().map(|b| format!("{b:02x}")).collect();
    assert_eq!(m["inputs"][0]["sha256"], expected.as_str());
    assert_eq!(m["outputs"][0], s(&out));
    assert_eq!(m["version"], env!("CARGO_PKG_VERSION"));
    let manifests = std::fs::read_dir(tmp.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with("manifest.json"))
        .count();
    assert_eq!(manifests, 1);
}

#[test]
fn plots_have_one_row_per_second() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 5, 6);
    let plots = tmp.path().join("plots");
    ok(&["emit-plots", "--signals", s(&d.join("signals.jsonl")), "--out", s(&plots)]);
    let csv = String::from_utf8(read(&plots.join("clx0003.csv"))).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "second,audio,shots,flow,climax_prob");
    assert_eq!(lines.len(), 1 + 25);
    assert!(plots.join("manifest.json").exists());
}

#[test]
fn sentiment_pipeline_round_trip() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "sentiment", 15, 2);
    let m = tmp.path().join("m");
    ok(&["train", "--task", "sentiment", "--data-dir", s(&d), "--out", s(&m), "--steps", "5"]);
    let scores = tmp.path().join("scores.jsonl");
    ok(&[
        "predict", "--method", "lstm", "--signals", s(&d.join("signals.jsonl")),
        "--features", s(&d.join("features.jsonl")), "--checkpoint", s(&m.join("checkpoint.ckpt")),
        "--out", s(&scores),
    ]);
    let from_scores = tmp.path().join("a.json");
    ok(&["evaluate", "--task", "sentiment", "--predictions", s(&scores), "--data-dir", s(&d), "--out", s(&from_scores)]);
    let from_ckpt = tmp.path().join("b.json");
    ok(&[
        "evaluate", "--task", "sentiment", "--checkpoint", s(&m.join("checkpoint.ckpt")),
        "--data-dir", s(&d), "--out", s(&from_ckpt),
    ]);
    assert_eq!(read_report(&from_scores).unwrap(), read_report(&from_ckpt).unwrap());
}

#[test]
fn climax_training_reaches_high_validation_recall() {
    let tmp = TempDir::new().unwrap();
    let d = corpus(tmp.path(), "climax", 100, 31);
    let cfg = tmp.path().join("train.toml");
    std::fs::write(&cfg, "eval_every = 100\nblocks = [\"flow\", \"shots\", \"audio\"]\n").unwrap();
    let m = tmp.path().join("m");
    ok(&["--seed", "31", "--config", s(&cfg), "train", "--task", "climax", "--data-dir", s(&d), "--out", s(&m), "--steps", "2000"]);
    let report = tmp.path().join("val.json");
    ok(&[
        "evaluate", "--task", "climax", "--checkpoint", s(&m.join("checkpoint.ckpt")),
        "--data-dir", s(&d), "--fold", "0", "--split", "val", "--out", s(&report),
    ]);
    let row = read_report(&report).unwrap().climax.unwrap().rows.remove(0);
    assert_eq!(row.n_videos, 20);
    assert!(row.get(1, 2).unwrap() >= 0.9, "{row:?}");
}
