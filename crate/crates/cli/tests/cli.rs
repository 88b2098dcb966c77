//! Runs the `sensebridge` binary end to end on a small synthetic dataset.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SPEC: &str = r#"
name = "cli-synth"
n_subjects = 3
n_sensors = 2
n_actions = 4
noise_std = 0.5
samples_per_action = 20
seed = 5
repetitions = 2
cycles = 2
unlabeled_repetitions = 1
observability = [[1.0, 1.0, 0.2, 0.2], [1.0, 1.0, 1.0, 1.0]]

[[activities]]
label = "a"
actions = [0, 2]

[[activities]]
label = "b"
actions = [0, 3]

[[activities]]
label = "c"
actions = [1]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sensebridge"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Temp dir holding a generated dataset under `data/`.
fn dataset() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.toml");
    fs::write(&spec, SPEC).unwrap();
    let out = run(&["synth", "--config", spec.to_str().unwrap(), "--out", dir.path().join("data").to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    dir
}

fn manifest(dir: &TempDir) -> PathBuf {
    dir.path().join("data").join("manifest.toml")
}

fn write_config(dir: &TempDir, name: &str, extra: &str) -> PathBuf {
    let path = dir.path().join(name);
    let body = format!(
        "name = \"cli\"\nseed = 7\ntest_sensor = \"S1\"\nvariant = \"LinB\"\n\n[data]\nmanifest = \"data/manifest.toml\"\n\n[window]\nlength_s = 1.0\nstep_s = 0.5\n\n[representation]\nk_per_sensor = 3\n{extra}"
    );
    fs::write(&path, body).unwrap();
    path
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

#[test]
fn valid_dataset_validates() {
    let dir = dataset();
    let out = run(&["validate", "--config", manifest(&dir).to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).trim_end().ends_with("OK"));
}

#[test]
fn label_outside_recording_is_reported() {
    let dir = dataset();
    let labels = dir.path().join("data").join("labels.csv");
    let mut body = fs::read_to_string(&labels).unwrap();
    body.push_str("subj02,9000,9010,a\n");
    fs::write(&labels, body).unwrap();
    let out = run(&["validate", "--config", manifest(&dir).to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("subject subj02: label interval [9000, 9010) lies outside recording"), "{stdout}");
}

#[test]
fn missing_label_file_is_reported() {
    let dir = dataset();
    fs::remove_file(dir.path().join("data").join("labels.csv")).unwrap();
    let out = run(&["validate", "--config", manifest(&dir).to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stdout).contains("labels.csv"), "{}", text(&out.stdout));
}

#[test]
fn grid_writes_a_report_per_cell_and_one_table() {
    let dir = dataset();
    let config = write_config(&dir, "grid.toml", "\n[grid]\ntest_sensors = [\"S1\", \"S2\"]\n");
    let out_dir = dir.path().join("out");
    let out = run(&["--quiet", "grid", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let reports = fs::read_dir(out_dir.join("reports")).unwrap().count();
    assert_eq!(reports, 12);
    let csv = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("test_sensor,Trad,Clusters,LinR,LogR,LinB,LogB,Clusters_delta_pp"));
    assert!(out_dir.join("comparison.txt").exists());
    assert!(!out_dir.join("failures.txt").exists());
}

#[test]
fn grid_reruns_are_byte_identical_apart_from_timing() {
    let dir = dataset();
    let config = write_config(&dir, "grid.toml", "\n[grid]\ntest_sensors = [\"S1\", \"S2\"]\nvariants = [\"Trad\", \"LinR\", \"LogB\"]\n");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out_dir, workers) in [(&a, "1"), (&b, "2")] {
        let out = run(&["--quiet", "grid", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--workers", workers]);
        assert!(out.status.success(), "{}", text(&out.stderr));
    }
    let files = files_under(&a);
    assert_eq!(files, files_under(&b));
    for f in files.iter().filter(|f| f.as_os_str() != "timing.json") {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{}", f.display());
    }
}

#[test]
fn trad_only_grid_has_no_deltas() {
    let dir = dataset();
    let config = write_config(&dir, "grid.toml", "\n[grid]\ntest_sensors = [\"S1\", \"S2\"]\nvariants = [\"Trad\"]\n");
    let out_dir = dir.path().join("out");
    let out = run(&["--quiet", "grid", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert_eq!(fs::read_dir(out_dir.join("reports")).unwrap().count(), 2);
    let csv = fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("test_sensor,Trad,best"));
}

#[test]
fn run_writes_report_model_and_echo() {
    let dir = dataset();
    let config = write_config(&dir, "run.toml", "");
    let out_dir = dir.path().join("run");
    let out = run(&["run", "--config", config.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--seed", "3"]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("LinB"));
    for f in ["config.toml", "report.json", "model.json", "timing.json"] {
        assert!(out_dir.join(f).exists(), "{f} missing");
    }
    assert!(fs::read_to_string(out_dir.join("config.toml")).unwrap().contains("seed = 3"));

    let report = run(&["inspect", out_dir.join("report.json").to_str().unwrap()]);
    assert!(report.status.success());
    assert!(text(&report.stdout).contains("run_report"));
    let model = run(&["inspect", out_dir.join("model.json").to_str().unwrap()]);
    assert!(model.status.success());
    let stdout = text(&model.stdout);
    assert!(stdout.contains("pipeline") && stdout.contains("stage weights"), "{stdout}");
}

#[test]
fn config_and_usage_errors_exit_with_one() {
    let dir = dataset();
    let out = run(&["run", "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("--bogus"));

    let config = write_config(&dir, "bad.toml", "\n[classifier]\nc_inverse = 1.0\n");
    let out = run(&["run", "--config", config.to_str().unwrap(), "--out", dir.path().join("x").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("c_inverse"));

    let config = write_config(&dir, "nogrid.toml", "");
    let out = run(&["grid", "--config", config.to_str().unwrap(), "--out", dir.path().join("y").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["inspect", dir.path().join("spec.toml").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(text(&out.stdout).contains("grid"));
}
