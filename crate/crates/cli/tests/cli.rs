use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn knnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_knnn")).args(args).output().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_grid_csv(file: &Path, side: usize) {
    let mut text = String::new();
    for i in 0..side * side {
        text += &format!("{},{}\n", (i % side) as f64 * 0.1, (i / side) as f64 * 0.1 + 0.01 * (i % 3) as f64);
    }
    fs::write(file, text).unwrap();
}

fn synth(dir: &TempDir, shape: &str, n_train: &str, n_test: &str) -> String {
    let prefix = path(dir, shape);
    let out = knnn(&["synth", "--shape", shape, "--n-train", n_train, "--n-test", n_test, "--seed", "3", "--out-prefix", &prefix]);
    assert!(out.status.success(), "{}", stderr(&out));
    prefix
}

#[test]
fn build_writes_loadable_model() {
    let dir = tempfile::tempdir().unwrap();
    let train = path(&dir, "train.csv");
    write_grid_csv(Path::new(&train), 10);
    let model = path(&dir, "model.knnn");
    let out = knnn(&["build", "--train", &train, "--out", &model]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("per point"));
    let loaded = knnn::load_model(&model).unwrap();
    assert_eq!(loaded.model.train().rows(), 100);
    assert_eq!(loaded.method, knnn::Method::Knnn);
}

#[test]
fn too_many_neighbors_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let train = path(&dir, "train.csv");
    write_grid_csv(Path::new(&train), 10);
    let out = knnn(&["build", "--train", &train, "--k-nnn", "200", "--out", &path(&dir, "m")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("not enough neighbors"));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let train = path(&dir, "train.csv");
    write_grid_csv(Path::new(&train), 10);
    let m = path(&dir, "m");
    assert_eq!(knnn(&["build", "--train", &train, "--L", "0", "--out", &m]).status.code(), Some(2));
    assert_eq!(knnn(&["build", "--train", &train, "--bogus", "--out", &m]).status.code(), Some(2));
    assert_eq!(knnn(&["build", "--train", &train]).status.code(), Some(2));
    assert_eq!(knnn(&["build", "--train", &train, "--method", "pca", "--out", &m]).status.code(), Some(2));
    assert_eq!(knnn(&[]).status.code(), Some(2));
}

#[test]
fn training_rows_score_zero_with_k_one() {
    let dir = tempfile::tempdir().unwrap();
    let train = path(&dir, "train.csv");
    write_grid_csv(Path::new(&train), 10);
    let model = path(&dir, "model.knnn");
    assert!(knnn(&["build", "--train", &train, "--k", "1", "--out", &model]).status.success());

    let queries = path(&dir, "queries.csv");
    let first3: Vec<&str> = fs::read_to_string(&train).unwrap().leak().lines().take(3).collect();
    fs::write(&queries, first3.join("\n") + "\n").unwrap();
    let scores = path(&dir, "scores.csv");
    let out = knnn(&["score", "--model", &model, "--queries", &queries, "--out", &scores]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("latency"));
    let values: Vec<f64> = fs::read_to_string(&scores).unwrap().lines().map(|l| l.parse().unwrap()).collect();
    assert_eq!(values, vec![0.0, 0.0, 0.0]);
}

#[test]
fn empty_or_mismatched_queries_fail() {
    let dir = tempfile::tempdir().unwrap();
    let train = path(&dir, "train.csv");
    write_grid_csv(Path::new(&train), 10);
    let model = path(&dir, "model.knnn");
    assert!(knnn(&["build", "--train", &train, "--out", &model]).status.success());

    let empty = path(&dir, "empty.csv");
    fs::write(&empty, "").unwrap();
    let out = knnn(&["score", "--model", &model, "--queries", &empty, "--out", &path(&dir, "s")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("empty input"));

    let wide = path(&dir, "wide.csv");
    fs::write(&wide, "1,2,3\n").unwrap();
    let out = knnn(&["score", "--model", &model, "--queries", &wide, "--out", &path(&dir, "s")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("plan mismatch"));
}

#[test]
fn synth_build_score_eval_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth(&dir, "moons", "100", "500");
    let (train, test, labels) = (prefix.clone() + "_train.csv", prefix.clone() + "_test.csv", prefix + "_labels.csv");
    assert_eq!(fs::read_to_string(&train).unwrap().lines().count(), 100);
    assert_eq!(fs::read_to_string(&test).unwrap().lines().count(), 600);
    assert_eq!(fs::read_to_string(&labels).unwrap().lines().count(), 600);

    let model = path(&dir, "model.knnn");
    assert!(knnn(&["build", "--train", &train, "--out", &model]).status.success());
    let scores = path(&dir, "scores.csv");
    assert!(knnn(&["score", "--model", &model, "--queries", &test, "--out", &scores]).status.success());
    assert_eq!(fs::read_to_string(&scores).unwrap().lines().count(), 600);

    let out = knnn(&["eval", "--scores", &scores, "--labels", &labels]);
    assert!(out.status.success(), "{}", stderr(&out));
    let printed = String::from_utf8(out.stdout).unwrap();
    let value: f64 = printed.trim().parse().unwrap();
    assert!((0.0..=1.0).contains(&value));
    assert_eq!(printed.trim().split('.').nth(1).unwrap().len(), 4);
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = synth(&dir, "circles", "50", "100");
    let b_dir = tempfile::tempdir().unwrap();
    let b = synth(&b_dir, "circles", "50", "100");
    for suffix in ["_train.csv", "_test.csv", "_labels.csv"] {
        assert_eq!(fs::read(a.clone() + suffix).unwrap(), fs::read(b.clone() + suffix).unwrap());
    }
}

#[test]
fn sweep_on_three_lines_favors_packs() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth(&dir, "threelines", "250", "2000");
    let out_csv = path(&dir, "sweep.csv");
    let out = knnn(&[
        "sweep",
        "--train",
        &(prefix.clone() + "_train.csv"),
        "--test",
        &(prefix.clone() + "_test.csv"),
        "--labels",
        &(prefix + "_labels.csv"),
        "--grid",
        "knn:k=75; knnn:k=3,k_nnn=25",
        "--out",
        &out_csv,
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = fs::read_to_string(&out_csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("method,k,k_nnn,L,n,reorder,auroc"));
    let aurocs: Vec<f64> = lines.map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(aurocs.len(), 2);
    assert!(aurocs[1] > aurocs[0], "{aurocs:?}");
}

#[test]
fn heatmap_writes_csv_and_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth(&dir, "circles", "100", "10");
    let model = path(&dir, "model.knnn");
    assert!(knnn(&["build", "--train", &(prefix + "_train.csv"), "--out", &model]).status.success());
    let out_prefix = path(&dir, "heat");
    let out = knnn(&["--threads", "2", "heatmap", "--model", &model, "--res", "200x200", "--out-prefix", &out_prefix]);
    assert!(out.status.success(), "{}", stderr(&out));

    let csv = fs::read_to_string(out_prefix.clone() + ".csv").unwrap();
    assert_eq!(csv.lines().count(), 200);
    assert!(csv.lines().all(|l| l.split(',').count() == 200));
    let pgm = fs::read(out_prefix + ".pgm").unwrap();
    let header = b"P5\n200 200\n255\n";
    assert_eq!(&pgm[..header.len()], header);
    assert_eq!(pgm.len(), header.len() + 200 * 200);

    let out = knnn(&["heatmap", "--model", &model, "--method", "local", "--bbox", "-1,-1,1,1", "--res", "20x10", "--out-prefix", &path(&dir, "local")]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(path(&dir, "local.csv")).unwrap().lines().count(), 10);
    assert_eq!(knnn(&["heatmap", "--model", &model, "--res", "0x10", "--out-prefix", "x"]).status.code(), Some(2));
}

#[test]
fn heatmap_needs_two_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = synth(&dir, "fig6", "40", "10");
    let model = path(&dir, "model.knnn");
    assert!(knnn(&["build", "--train", &(prefix + "_train.csv"), "--L", "2", "--out", &model]).status.success());
    let out = knnn(&["heatmap", "--model", &model, "--out-prefix", &path(&dir, "h")]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn header_rows_are_skipped_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let train = path(&dir, "train.csv");
    write_grid_csv(Path::new(&train), 6);
    let with_header = path(&dir, "header.csv");
    fs::write(&with_header, "x,y\n".to_string() + &fs::read_to_string(&train).unwrap()).unwrap();
    let model = path(&dir, "model.knnn");
    assert_eq!(knnn(&["build", "--train", &with_header, "--out", &model]).status.code(), Some(1));
    assert!(knnn(&["build", "--header", "--train", &with_header, "--out", &model]).status.success());
}
