use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use incell::data::icts;

fn incell(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incell")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = incell(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny(dir: &Path, kind: &str, seed: &str) {
    ok(&[
        "generate", "--kind", kind, "--out", p(dir), "--seed", seed, "--steps", "10", "--features", "10", "--train", "40",
        "--test", "12",
    ]);
}

#[test]
fn generate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let args = |d: &Path| ["generate", "--kind", "earlier", "--seed", "7", "--train", "20", "--test", "6", "--out", d.to_str().unwrap()].map(String::from);
    let ha = ok(&args(&a).each_ref().map(String::as_str));
    let hb = ok(&args(&b).each_ref().map(String::as_str));
    let hashes = |s: &str| s.lines().map(|l| l.split_whitespace().next().unwrap().to_string()).collect::<Vec<_>>();
    assert_eq!(hashes(&ha), hashes(&hb));
    assert_eq!(hashes(&ha).len(), 2);
    assert_eq!(fs::read(a.join("train.icts")).unwrap(), fs::read(b.join("train.icts")).unwrap());
    assert_eq!(icts::load(&a.join("test.icts")).unwrap().len(), 6);
}

#[test]
fn invalid_input_exits_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = incell(&["generate", "--kind", "sideways", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("sideways") && err.contains("Usage"), "{err}");

    let out = incell(&["generate", "--kind"]);
    assert_eq!(out.status.code(), Some(2));

    let out = incell(&["generate", "--kind", "moving", "--start", "90", "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));

    let out = incell(&["train", "--model", "lstm-sideways", "--data", p(tmp.path()), "--checkpoint", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_files_exit_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = incell(&["train", "--model", "lstm", "--data", p(&tmp.path().join("none")), "--checkpoint", "x"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("train.icts"));
}

#[test]
fn moving_box_masks_follow_start() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["generate", "--kind", "moving", "--start", "40", "--train", "4", "--test", "2", "--out", p(tmp.path())]);
    let d = icts::load(&tmp.path().join("train.icts")).unwrap();
    for s in &d.samples {
        let m = s.mask.as_ref().unwrap();
        for t in 0..100 {
            let active = m.row_slice(t).iter().any(|&v| v > 0.0);
            assert_eq!(active, (40..60).contains(&t), "t={t}");
        }
    }
}

#[test]
fn train_saliency_evaluate_flow() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    tiny(&data, "earlier", "3");
    let before = fs::read(data.join("test.icts")).unwrap();
    let ckpt = tmp.path().join("m.ckpt");
    let config = tmp.path().join("run.toml");
    fs::write(&config, "[model]\nhidden = 6\nhops = 2\nattention_dim = 4\n[train]\nmax_epochs = 2\nbatch_size = 8\n").unwrap();
    let stdout = ok(&[
        "train", "--model", "lstm-incell", "--data", p(&data), "--checkpoint", p(&ckpt), "--config", p(&config), "--seed", "1",
    ]);
    assert!(stdout.contains("best test accuracy"));
    let model = incell::checkpoint::load(&ckpt).unwrap();
    assert_eq!((model.spec.hidden, model.spec.hops, model.spec.attention_dim), (6, 2, 4));
    let log = fs::read_to_string(tmp.path().join("m.ckpt.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let maps = tmp.path().join("maps");
    ok(&["saliency", "--checkpoint", p(&ckpt), "--data", p(&data.join("test.icts")), "--out", p(&maps), "--samples", "3"]);
    let index = fs::read_to_string(maps.join("index.csv")).unwrap();
    let rows: Vec<&str> = index.lines().collect();
    assert_eq!(rows.len(), 4);
    for row in &rows[1..] {
        let cols: Vec<&str> = row.split(',').collect();
        let csv = fs::read_to_string(maps.join(cols[6])).unwrap();
        assert_eq!(csv.lines().filter(|l| !l.is_empty()).count(), 10);
        let pgm = fs::read(maps.join(cols[7])).unwrap();
        assert!(pgm.starts_with(b"P5"));
    }

    let metrics = tmp.path().join("metrics.csv");
    let curve = tmp.path().join("drop.csv");
    ok(&[
        "evaluate", "--checkpoint", p(&ckpt), "--data", p(&data.join("test.icts")), "--out", p(&metrics), "--drop-grid", "0,50,100",
        "--drop-out", p(&curve),
    ]);
    let m = fs::read_to_string(&metrics).unwrap();
    assert!(m.starts_with("model,acc,wjac,euc,explained\nlstm-incell,"));
    let c = fs::read_to_string(&curve).unwrap();
    assert_eq!(c.lines().count(), 4);
    assert_eq!(fs::read(data.join("test.icts")).unwrap(), before);
}

#[test]
fn every_subcommand_has_help() {
    for sub in ["generate", "train", "saliency", "evaluate", "experiment"] {
        let text = ok(&[sub, "--help"]);
        assert!(text.contains("Usage"), "{sub}");
    }
    assert!(ok(&["--help"]).contains("Exit codes"));
}

#[test]
fn experiment_needs_a_suite() {
    let out = incell(&["experiment", "--out", "x"]);
    assert_eq!(out.status.code(), Some(2));
}
