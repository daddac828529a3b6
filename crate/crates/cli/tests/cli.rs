use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn evlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evlab"))
        .args(args)
        .env("EVLAB_DETERMINISTIC", "1")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = evlab(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_pgm(path: &Path, w: usize, h: usize, v: u8) {
    let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
    bytes.extend(std::iter::repeat_n(v, w * h));
    fs::write(path, bytes).unwrap();
}

#[test]
fn events_on_five_frames_gives_four_entries() {
    let tmp = tempfile::tempdir().unwrap();
    let seq = tmp.path().join("seq");
    fs::create_dir(&seq).unwrap();
    for i in 0..5u8 {
        write_pgm(&seq.join(format!("{i:02}.pgm")), 6, 4, i * 20);
    }
    let out = tmp.path().join("ev");
    let stdout = ok(&["events", "--th", "8", "--mode", "successive", "--pos", p(&seq), "--out", p(&out)]);
    assert!(stdout.contains("entries=4"), "{stdout}");
    let manifest = fs::read_to_string(out.join("train.tsv")).unwrap();
    assert_eq!(manifest.lines().count(), 4);
    assert!(manifest.lines().all(|l| l.ends_with("\tpositive\t8")));
}

#[test]
fn single_class_eval_is_a_data_error() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    ok(&["synth", "--out", p(&raw), "--positives", "4", "--negatives", "0", "--size", "16", "--test-every", "0"]);
    let ev = tmp.path().join("ev");
    ok(&["events", "--pos", p(&raw.join("train/positive")), "--out", p(&ev)]);
    let ae = tmp.path().join("ae.eaw");
    ok(&["train-ae", "--manifest", p(&ev.join("train.tsv")), "--out", p(&ae), "--input-size", "16", "--epochs", "1"]);

    // A classifier head needs both classes to train.
    let clf = tmp.path().join("clf.eaw");
    let out = evlab(&["train-clf", "--encoder", p(&ae), "--manifest", p(&ev.join("train.tsv")), "--out", p(&clf)]);
    assert_eq!(out.status.code(), Some(2));

    // Scoring a classifier on a single-class manifest fails the same way.
    let raw2 = tmp.path().join("raw2");
    ok(&["synth", "--out", p(&raw2), "--positives", "4", "--negatives", "4", "--size", "16", "--test-every", "0"]);
    let ev2 = tmp.path().join("ev2");
    ok(&["events", "--pos", p(&raw2.join("train/positive")), "--neg", p(&raw2.join("train/negative")), "--out", p(&ev2)]);
    ok(&["train-clf", "--encoder", p(&ae), "--manifest", p(&ev2.join("train.tsv")), "--out", p(&clf), "--epochs", "1"]);
    let out = evlab(&["eval", "--weights", p(&clf), "--manifest", p(&ev.join("train.tsv"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("single-class"));
}

#[test]
fn small_pipeline_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw");
    ok(&["synth", "--out", p(&raw), "--positives", "20", "--negatives", "20", "--size", "32", "--seed", "3"]);
    let ev = tmp.path().join("ev");
    for split in ["train", "test"] {
        let pos = raw.join(split).join("positive");
        let neg = raw.join(split).join("negative");
        ok(&["events", "--pos", p(&pos), "--neg", p(&neg), "--out", p(&ev), "--split", split]);
    }
    let (train, test) = (ev.join("train.tsv"), ev.join("test.tsv"));

    let mut weights = Vec::new();
    for run in 0..2 {
        let ae = tmp.path().join(format!("ae{run}.eaw"));
        let clf = tmp.path().join(format!("clf{run}.eaw"));
        ok(&["train-ae", "--manifest", p(&train), "--out", p(&ae), "--input-size", "32", "--width-mult", "0.5", "--epochs", "2", "--seed", "5"]);
        ok(&["train-clf", "--encoder", p(&ae), "--manifest", p(&train), "--out", p(&clf), "--epochs", "10", "--seed", "5"]);
        weights.push((fs::read(&ae).unwrap(), fs::read(&clf).unwrap(), fs::read(ae.with_extension("loss.csv")).unwrap()));
    }
    assert_eq!(weights[0], weights[1]);
    let loss = String::from_utf8(weights[0].2.clone()).unwrap();
    assert!(loss.starts_with("epoch,loss\n1,"));

    let clf = tmp.path().join("clf0.eaw");
    let roc = tmp.path().join("roc.csv");
    let line = ok(&["eval", "--weights", p(&clf), "--manifest", p(&test), "--roc", p(&roc)]);
    assert!(line.starts_with("accuracy=") && line.contains("% auroc="), "{line}");
    assert!(fs::read_to_string(&roc).unwrap().starts_with("fpr,tpr\n0,0\n"));

    let ae = tmp.path().join("ae0.eaw");
    assert!(ok(&["eval", "--weights", p(&ae), "--manifest", p(&test)]).starts_with("reconstruction_accuracy="));
    let mi = tmp.path().join("mi.csv");
    let probe = ok(&["probe", "--weights", p(&ae), "--manifest", p(&test), "--bins", "4", "--out", p(&mi)]);
    assert_eq!(fs::read_to_string(&mi).unwrap(), probe);
    assert_eq!(probe.lines().nth(1), Some("layer,mi_bits"));
    assert_eq!(probe.lines().count(), 2 + 6);

    let counts = ok(&["params", "--weights", p(&clf)]);
    assert!(counts.starts_with("kind=classifier width_mult=0.5 total="), "{counts}");
    let lat = tmp.path().join("lat.csv");
    let b = ok(&["bench", "--weights", p(&clf), "--warmup", "1", "--iters", "10", "--latency-csv", p(&lat)]);
    assert!(b.contains(" fps=") && b.contains("iters=10"), "{b}");
    assert_eq!(fs::read_to_string(&lat).unwrap().lines().count(), 11);
    assert_eq!(evlab(&["bench", "--weights", p(&clf), "--iters", "5"]).status.code(), Some(2));

    let sweep = tmp.path().join("sweep.csv");
    let sel = ok(&[
        "select", "--pos", p(&raw.join("train/positive")), "--neg", p(&raw.join("train/negative")),
        "--candidates", "8,12", "--criterion", "density_band", "--out", p(&sweep),
    ]);
    assert!(sel.contains("chosen_threshold="), "{sel}");
    assert_eq!(fs::read_to_string(&sweep).unwrap().lines().count(), 3);
}

#[test]
fn config_file_keys() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.cfg");
    fs::write(&cfg, "positives = 2\nnegatives = 3\nsize = 16\ntest_every = 0\n").unwrap();
    let raw = tmp.path().join("raw");
    let out = ok(&["synth", "--config", p(&cfg), "--out", p(&raw), "--negatives", "1"]);
    assert!(out.contains("train: sequences=3"), "{out}");

    fs::write(&cfg, "positives = 2\nlearning_rate = 1\n").unwrap();
    let bad = evlab(&["synth", "--config", p(&cfg), "--out", p(&raw)]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown key `learning-rate`"));
    fs::write(&cfg, "positives 2\n").unwrap();
    assert_eq!(evlab(&["synth", "--config", p(&cfg), "--out", p(&raw)]).status.code(), Some(1));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(evlab(&[]).status.code(), Some(1));
    assert_eq!(evlab(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(evlab(&["events", "--th", "300", "--pos", "x", "--out", "y"]).status.code(), Some(1));
    assert_eq!(evlab(&["events", "--pos", "/nonexistent", "--out", "/tmp/never"]).status.code(), Some(2));
    let help = ok(&["train-ae", "--help"]);
    for key in ["--config", "--manifest", "--out", "--loss-csv", "--width-mult", "--input-size", "--loss", "--epochs", "--batch", "--lr", "--seed"] {
        assert!(help.contains(key), "{key} missing from help");
    }
    for sub in ["events", "train-ae", "train-clf", "eval", "probe", "select", "bench", "params", "synth"] {
        assert!(ok(&[sub, "--help"]).contains("--config"), "{sub}");
    }
}
