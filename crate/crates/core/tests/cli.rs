use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fbg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fbg-skin")).args(args).env_remove("OUT_DIR").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: [&str; 12] = [
    "--set",
    "frames=100",
    "--set",
    "hidden=8",
    "--set",
    "force_epochs=1",
    "--set",
    "loc_epochs=1",
    "--set",
    "frame_stride=5",
    "--set",
    "folds=2",
];

#[test]
fn unknown_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbg(&["gen", "--out", dir.path().to_str().unwrap(), "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));
}

#[test]
fn bad_subcommand_is_a_usage_error() {
    assert_eq!(fbg(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn missing_model_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let o = fbg(&["eval", "--out", dir.path().to_str().unwrap(), "--model", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("model bundle not found"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("plain");
    fs::write(&file, "x").unwrap();
    let o = fbg(&["gen", "--n", "2", "--set", "frames=20", "--out", file.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn missing_output_directory() {
    let o = fbg(&["rf"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn vonfrey_writes_fit_and_published_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = fbg(&["vonfrey", "--out", out, "--set", "vonfrey_subjects=2", "--set", "vonfrey_sites=10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for f in ["trials.csv", "rates.csv", "fit.txt", "manifest.txt"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let fit = fs::read_to_string(dir.path().join("fit.txt")).unwrap();
    assert!(fit.contains("published."), "{fit}");
    assert_eq!(fs::read_to_string(dir.path().join("trials.csv")).unwrap().lines().count(), 1 + 2 * 10 * 8);
}

#[test]
fn rf_writes_per_sensor_maps() {
    let dir = tempfile::tempdir().unwrap();
    let o = fbg(&["rf", "--out", dir.path().to_str().unwrap(), "--set", "dual_lobes=true"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("tables/receptive_fields.csv").is_file());
    assert!(dir.path().join("maps/threshold_force_s16.csv").is_file());
}

fn run_ok(args: &[&str]) {
    let o = fbg(args);
    assert!(o.status.success(), "{args:?}: {}", stderr(&o));
}

#[test]
fn gen_train_infer_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    let p = |s: &str| root.join(s).to_str().unwrap().to_owned();
    let mut gen = vec!["gen", "--n", "20", "--gzip", "--out"];
    let data = p("data");
    gen.push(&data);
    gen.extend(TINY);
    run_ok(&gen);
    let dataset = p("data/dataset.csv.gz");
    assert!(Path::new(&dataset).is_file());

    let model = p("model");
    let mut train = vec!["train", "--dataset", &dataset, "--out", &model];
    train.extend(TINY);
    run_ok(&train);
    for f in ["force.ckpt", "loc_SG.ckpt", "loc_DSG.ckpt", "stats.txt", "model_manifest.txt", "split.txt"] {
        assert!(root.join("model").join(f).is_file(), "{f}");
    }

    // A frames CSV only needs the dlNN_nm columns.
    let mut csv = String::from("t_s,");
    csv.push_str(&(1..=16).map(|i| format!("dl{i:02}_nm")).collect::<Vec<_>>().join(","));
    csv.push('\n');
    for k in 0..12 {
        csv.push_str(&format!("{}", k as f64 * 0.01));
        for s in 0..16 {
            csv.push_str(&format!(",{}", 0.01 * (k * s) as f64));
        }
        csv.push('\n');
    }
    let frames = p("frames.csv");
    fs::write(&frames, csv).unwrap();
    let pred = p("pred");
    run_ok(&["infer", "--model", &model, "--input", &frames, "--out", &pred]);
    let out = fs::read_to_string(root.join("pred/predictions.csv")).unwrap();
    assert_eq!(out.lines().count(), 13, "{out}");

    fs::write(&frames, "t_s,dl01_nm\n0,1\n").unwrap();
    let o = fbg(&["infer", "--model", &model, "--input", &frames, "--out", &pred]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("dl02_nm"), "{}", stderr(&o));
}
