use std::path::Path;
use std::process::{Command, Output};

fn frugal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frugal"))
        .args(args)
        .current_dir(dir)
        .env_remove("FRUGAL_SEED")
        .output()
        .unwrap()
}

fn synth(dir: &Path, name: &str, n: &str, seed: &str) {
    let out = frugal(
        &["synth", "--n", n, "--m", "5", "--positive-ratio", "0.2", "--seed", seed, "-o", name],
        dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_writes_labeled_csv() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "s.csv", "50", "1");
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("f1,f2,f3,f4,f5,label"));
    let labels: Vec<&str> = lines.map(|l| l.rsplit(',').next().unwrap()).collect();
    assert_eq!(labels.len(), 50);
    assert_eq!(labels.iter().filter(|&&l| l == "1").count(), 10);
}

#[test]
fn predict_fixed_and_tuned() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "train.csv", "200", "1");
    synth(dir.path(), "test.csv", "40", "2");
    let out = frugal(
        &["predict", "--train", "train.csv", "--test", "test.csv", "--treatment", "cla", "--c", "50", "-o", "p.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(text.starts_with("row,label,score\n"));
    assert_eq!(text.lines().count(), 41);

    let out = frugal(
        &["predict", "--train", "train.csv", "--test", "test.csv", "--trees", "5", "-o", "q.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("5 labels read"));
}

#[test]
fn tune_reports_full_trace() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "train.csv", "200", "3");
    let out = frugal(
        &["tune", "--train", "train.csv", "--trees", "5", "--budget", "0.1", "-o", "t.json"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(v["label_reads"], 20);
    assert_eq!(v["tuning"]["trace"].as_array().unwrap().len(), 57);
    assert!(v["tuning"]["winner"]["mode"].is_string());
}

#[test]
fn benchmark_csv_has_one_row_per_metric() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "train.csv", "200", "4");
    synth(dir.path(), "test.csv", "100", "5");
    let out = frugal(
        &[
            "benchmark", "--train", "train.csv", "--test", "test.csv", "--treatment", "cla-ml",
            "--c", "50", "--trees", "5", "--csv", "agg.csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("agg.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "treatment,dataset,metric,median,iqr,defined,undefined,failures");
    assert_eq!(lines.len(), 8);
    assert!(lines[1..].iter().all(|l| l.starts_with("cla-ml,test,")));
    // The table goes to stdout when no path is given.
    assert!(String::from_utf8_lossy(&out.stdout).contains("cla-ml"));
}

#[test]
fn dimension_profile_csv() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "d.csv", "100", "6");
    let out = frugal(
        &["dimension", "--data", "d.csv", "--label-column", "label", "--radii", "10"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("r,C(r)\n"));
    assert_eq!(text.lines().count(), 12);
    assert!(text.lines().last().unwrap().starts_with("# D="));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let run = |seed: &str, out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_frugal"))
            .args(["synth", "--n", "30", "-o", out])
            .current_dir(dir.path())
            .env("FRUGAL_SEED", seed)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(dir.path().join(out)).unwrap()
    };
    assert_eq!(run("9", "a.csv"), run("9", "b.csv"));
    assert_ne!(run("9", "a.csv"), run("10", "c.csv"));
}

#[test]
fn failures_exit_with_category_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.csv"), "a,b,label\n1,x,0\n").unwrap();
    synth(dir.path(), "ok.csv", "40", "7");

    let out = frugal(&["dimension", "--data", "missing.csv"], dir.path());
    assert_eq!(out.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));

    let out = frugal(&["dimension", "--data", "bad.csv", "--label-column", "label"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("row 2"));

    let out = frugal(
        &["predict", "--train", "ok.csv", "--test", "ok.csv", "--c", "50", "-o", "p.csv"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(4));

    let out = frugal(
        &["benchmark", "--train", "ok.csv", "--test", "ok.csv", "--bins", "40"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(5));
}
