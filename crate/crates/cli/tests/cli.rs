#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{fixture_config, write_fixture_database};

fn ecgdx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ecgdx"))
        .args(args)
        .env_remove("ECGDX_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(x: &Path) -> String {
    x.to_str().unwrap().to_string()
}

fn fixture(dir: &Path, classifier: &str) -> String {
    write_fixture_database(dir, 40.0);
    let cfg = dir.join("exp.cfg");
    fs::write(&cfg, fixture_config(classifier, "")).unwrap();
    p(&cfg)
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(ecgdx(&[]).status.code(), Some(2));
    assert_eq!(ecgdx(&["eval-single"]).status.code(), Some(2));
    assert_eq!(
        ecgdx(&["--threads", "0", "eval-single", "--config", "x.cfg"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ecgdx(&["grid-search", "--config", "x.cfg", "--c-grid", "1,-2"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        ecgdx(&["features", "--config", "a", "--record", "b"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(ecgdx(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_1_with_kind() {
    let dir = tempfile::tempdir().unwrap();
    let o = ecgdx(&["ingest", "--record", &p(&dir.path().join("none.hea"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[io]"), "{}", stderr(&o));

    // configuration is checked before any data is read: the data directory does not exist
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, fixture_config("svm", "data_dir = missing\n")).unwrap();
    let o = ecgdx(&[
        "eval-single",
        "--config",
        &p(&cfg),
        "--classifier",
        "forest",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[config]"), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn ingest_summary() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "svm");
    let samples = dir.path().join("s208.csv");
    let o = ecgdx(&[
        "ingest",
        "--record",
        &p(&dir.path().join("s208.hea")),
        "--annotations",
        &p(&dir.path().join("s208.atr")),
        "--out",
        &p(&samples),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.starts_with("record s208: 2 leads"), "{text}");
    assert!(text.contains("PVC"), "{text}");
    let csv = fs::read_to_string(&samples).unwrap();
    assert_eq!(csv.lines().count(), 40 * 360 + 1);

    // the exported samples read back as a CSV record
    let o = ecgdx(&["ingest", "--record", &p(&samples), "--rate", "360"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("14400 samples"), "{text}");
}

#[test]
fn detect_writes_peaks_and_stages() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), "svm");
    let out = dir.path().join("peaks.csv");
    let stages = dir.path().join("stages.csv");
    let o = ecgdx(&[
        "detect",
        "--record",
        &p(&dir.path().join("s100.hea")),
        "--annotations",
        &p(&dir.path().join("s100.atr")),
        "--out",
        &p(&out),
        "--stages",
        &p(&stages),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("sensitivity"), "{}", stderr(&o));
    let peaks = fs::read_to_string(&out).unwrap();
    let mut lines = peaks.lines();
    assert_eq!(lines.next(), Some("r_index"));
    let idx: Vec<usize> = lines.map(|l| l.parse().unwrap()).collect();
    assert!(
        idx.len() >= 35 && idx.windows(2).all(|w| w[0] < w[1]),
        "{idx:?}"
    );
    let st = fs::read_to_string(&stages).unwrap();
    assert!(st.starts_with("index,filtered,derivative,squared,integrated\n"));
}

#[test]
fn eval_single_is_repeatable_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "svm");
    let run = |threads: &str, out: &Path| {
        let o = ecgdx(&[
            "--threads",
            threads,
            "eval-single",
            "--config",
            &cfg,
            "--out",
            &p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        (o.stdout, fs::read(out).unwrap())
    };
    let a = run("1", &dir.path().join("a.csv"));
    let b = run("4", &dir.path().join("b.csv"));
    assert_eq!(a, b);
    let text = String::from_utf8(a.0).unwrap();
    assert!(text.contains("ccuracy"), "{text}");
    assert!(String::from_utf8(a.1).unwrap().starts_with("class,"));
}

#[test]
fn features_train_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "knn");
    let feats = dir.path().join("features.csv");
    let model = dir.path().join("knn.mdl");
    let preds = dir.path().join("pred.csv");

    let o = ecgdx(&["features", "--config", &cfg, "--out", &p(&feats)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = fs::read_to_string(&feats)
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert!(
        header.starts_with("lead0_a1,") && header.ends_with(",label"),
        "{header}"
    );

    let o = ecgdx(&[
        "train",
        "--features",
        &p(&feats),
        "--classifier",
        "knn",
        "--set",
        "k=1",
        "--model",
        &p(&model),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));

    let o = ecgdx(&[
        "predict",
        "--model",
        &p(&model),
        "--features",
        &p(&feats),
        "--out",
        &p(&preds),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("accuracy 1.0000"), "{}", stderr(&o));
    let text = fs::read_to_string(&preds).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("row,predicted,actual"));
    for l in lines {
        let f: Vec<&str> = l.split(',').collect();
        assert_eq!(f[1], f[2], "{l}");
    }

    // unlabelled features from a single record
    let single = dir.path().join("single.csv");
    let o = ecgdx(&[
        "features",
        "--record",
        &p(&dir.path().join("s109.hea")),
        "--out",
        &p(&single),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = ecgdx(&[
        "predict",
        "--model",
        &p(&model),
        "--features",
        &p(&single),
        "--format",
        "txt",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = String::from_utf8(o.stdout).unwrap();
    let lbbb = out.lines().filter(|l| *l == "LBBB").count();
    assert!(lbbb * 10 >= out.lines().count() * 9, "{out}");
}

#[test]
fn grid_search_and_cross() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), "svm");
    let o = ecgdx(&[
        "grid-search",
        "--config",
        &cfg,
        "--c-grid",
        "2^0,2^4",
        "--gamma-grid",
        "2^-6,2^-2",
        "--folds",
        "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 6, "{text}");
    assert!(
        text.lines().last().unwrap().starts_with("best: c = "),
        "{text}"
    );

    let report = dir.path().join("x.txt");
    let o = ecgdx(&[
        "eval-cross",
        "--train-config",
        &cfg,
        "--test-config",
        &cfg,
        "--format",
        "txt",
        "--out",
        &p(&report),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(&report).unwrap(), o.stdout);

    let o = ecgdx(&["grid-search", "--config", &cfg, "--classifier", "nb"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error[config]"));
}
