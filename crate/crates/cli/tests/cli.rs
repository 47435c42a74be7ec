use std::path::Path;
use std::process::{Command, Output};

use vidocr_core::pipeline::{self, RunManifest};
use vidocr_core::pnm;
use vidocr_core::postprocess;
use vidocr_core::raster::{Frame, PixelKind};

fn vidocr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vidocr")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "-o", s(dir)];
    args.extend_from_slice(extra);
    let out = vidocr(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_or_empty_input_is_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("i.jsonl");
    assert_eq!(code(&vidocr(&["run", "-i", s(&tmp.path().join("nope")), "-o", s(&out)])), 2);
    let empty = tmp.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    assert_eq!(code(&vidocr(&["run", "-i", s(&empty), "-o", s(&out)])), 2);
}

#[test]
fn blank_frames_give_an_empty_index() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("blank");
    std::fs::create_dir(&dir).unwrap();
    for i in 0..4u32 {
        let f = Frame::new(i, 64, 32, PixelKind::Gray, vec![128; 64 * 32]).unwrap();
        pnm::write_file(&dir.join(format!("frame_{i:06}.pgm")), &pnm::encode_frame(&f)).unwrap();
    }
    let index = tmp.path().join("i.jsonl");
    let out = vidocr(&["run", "-i", s(&dir), "-o", s(&index)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(postprocess::read_index(&index).unwrap().is_empty());
    assert!(RunManifest::load(&pipeline::manifest_path(&index)).unwrap().tracks.is_empty());
}

#[test]
fn bad_settings_are_exit_3() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, &[]);
    let index = tmp.path().join("i.jsonl");
    assert_eq!(code(&vidocr(&["run", "-i", s(&scene), "-o", s(&index), "--fusion", "bogus"])), 3);
    assert_eq!(code(&vidocr(&["run", "-i", s(&scene), "-o", s(&index), "--ocr-timeout=-1"])), 3);
    assert_eq!(code(&vidocr(&["run", "-i", s(&scene), "--no-such-flag"])), 3);
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "colour = 3\n").unwrap();
    assert_eq!(code(&vidocr(&["run", "-i", s(&scene), "-o", s(&index), "--config", s(&cfg)])), 3);
    assert_eq!(code(&vidocr(&["run", "-i", s(&scene)])), 3);
}

#[test]
fn intermediates_leave_the_index_alone() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, &["--text", "LIVE 24"]);
    let plain = tmp.path().join("a/i.jsonl");
    let debug = tmp.path().join("b/i.jsonl");
    std::fs::create_dir_all(plain.parent().unwrap()).unwrap();
    std::fs::create_dir_all(debug.parent().unwrap()).unwrap();
    assert!(vidocr(&["run", "-i", s(&scene), "-o", s(&plain)]).status.success());
    assert!(vidocr(&["run", "-i", s(&scene), "-o", s(&debug), "--emit-intermediates"]).status.success());
    assert_eq!(std::fs::read(&plain).unwrap(), std::fs::read(&debug).unwrap());
    assert_eq!(
        std::fs::read(pipeline::manifest_path(&plain)).unwrap(),
        std::fs::read(pipeline::manifest_path(&debug)).unwrap()
    );
    let track = pipeline::debug_dir(&debug).join("track_0");
    for f in ["enhanced.pgm", "seed.pbm", "binary.pbm"] {
        assert!(track.join(f).is_file(), "{f}");
    }
    assert!(!pipeline::debug_dir(&plain).exists());
    let texts: Vec<String> = postprocess::read_index(&plain).unwrap().into_iter().map(|e| e.text).collect();
    assert_eq!(texts, ["LIVE 24"]);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, &[]);
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "input = \"scene\"\noutput = \"out.jsonl\"\nfusion = \"median\"\nseed = 7\n").unwrap();
    assert!(vidocr(&["run", "--config", s(&cfg)]).status.success());
    let m = RunManifest::load(&pipeline::manifest_path(&tmp.path().join("out.jsonl"))).unwrap();
    assert_eq!((m.fusion.as_str(), m.seed), ("median", 7));

    assert!(vidocr(&["run", "--config", s(&cfg), "--fusion", "max", "--seed", "9"]).status.success());
    let m = RunManifest::load(&pipeline::manifest_path(&tmp.path().join("out.jsonl"))).unwrap();
    assert_eq!((m.fusion.as_str(), m.seed), ("max", 9));
}

#[test]
fn eval_reports_metrics() {
    let tmp = tempfile::tempdir().unwrap();
    let scene = tmp.path().join("scene");
    synth(&scene, &["--text", "SPORT 3"]);
    let index = tmp.path().join("i.jsonl");
    assert!(vidocr(&["run", "-i", s(&scene), "-o", s(&index), "--emit-intermediates"]).status.success());
    let out = vidocr(&["eval", "--truth", s(&scene), "--index", s(&index)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(m["cer"], 0.0);
    assert_eq!(m["hypothesis"], "SPORT 3");
    assert!(m["pixel"]["f1"].as_f64().unwrap() > 0.5);

    // a run over different frames does not score against this truth
    let other = tmp.path().join("other");
    synth(&other, &["--text", "SPORT 3", "--seed", "5"]);
    let out = vidocr(&["eval", "--truth", s(&other), "--index", s(&index)]);
    assert!(!out.status.success());
}

#[test]
fn train_filters_without_samples_is_the_shipped_bank() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("bank.sfb");
    assert!(vidocr(&["train-filters", "-o", s(&out)]).status.success());
    let shipped = include_str!("../../core/assets/default_bank.sfb");
    assert_eq!(std::fs::read_to_string(&out).unwrap(), shipped);
}

#[test]
fn train_filters_from_a_sample_directory() {
    let tmp = tempfile::tempdir().unwrap();
    let samples = tmp.path().join("samples");
    let (w, h) = (9usize, 9usize);
    let dirs: [(&str, fn(usize, usize) -> bool); 4] = [
        ("horizontal", |x, y| y == 4 && x > 0),
        ("vertical", |x, y| x == 4 && y > 0),
        ("left-diagonal", |x, y| x == y),
        ("right-diagonal", |x, y| x + y == 8),
    ];
    for (name, ink) in dirs {
        let d = samples.join(name);
        std::fs::create_dir_all(&d).unwrap();
        let values = (0..w * h).map(|i| if ink(i % w, i / w) { 20 } else { 220 }).collect();
        let f = Frame::new(0, w, h, PixelKind::Gray, values).unwrap();
        pnm::write_file(&d.join("a.pgm"), &pnm::encode_frame(&f)).unwrap();
    }
    let out = tmp.path().join("bank.sfb");
    let run = vidocr(&["train-filters", "-o", s(&out), "--samples", s(&samples), "--threshold", "0.4"]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let bank = vidocr_core::binarize::StrokeFilterBank::parse(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(bank.filters().iter().all(|f| f.threshold() == 0.4));

    assert_eq!(code(&vidocr(&["train-filters", "-o", s(&out), "--samples", s(&tmp.path().join("x"))])), 2);
}

#[test]
fn synth_rejects_unknown_characters() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&vidocr(&["synth", "-o", s(tmp.path()), "--text", "news"])), 3);
}
