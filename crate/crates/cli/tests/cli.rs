use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"{
  "seed": 7,
  "phantom": {"height": 16, "width": 16},
  "mask": {"acceleration_factor": 4, "center_fraction": 0.1},
  "inr": {"hidden_layers": 1, "hidden_width": 16, "fourier_features": 8, "fourier_scale": 1, "omega0": 10},
  "curriculum": {"k2": [10, 10, 20]},
  "optimizer": {"learning_rate": 0.001, "log_every": 5},
  "output": {"write_pgm": true}
}"#;

fn coggen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coggen"))
        .args(args)
        .current_dir(dir)
        .env("COGGEN_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), TINY).unwrap();
    dir
}

#[test]
fn reconstruct_is_byte_identical_across_runs() {
    let dir = setup();
    for run in ["a", "b"] {
        ok(&coggen(&["reconstruct", "--config", "cfg.json", "--out-dir", run], dir.path()));
    }
    for file in ["recon.cgim", "mask.cgim", "ground_truth.cgim", "curve.csv", "params.json"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let curve = fs::read_to_string(dir.path().join("a/curve.csv")).unwrap();
    // Points at 0, 5, ..., 35 plus the final one at 40.
    assert_eq!(curve.lines().count(), 1 + 9);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "coggen-report/1");
    assert_eq!(report["stages"].as_array().unwrap().len(), 3);
    assert_eq!(report["curve_file"], "curve.csv");
    assert!(dir.path().join("a/recon.pgm").exists());
}

#[test]
fn seed_override_changes_outputs() {
    let dir = setup();
    ok(&coggen(&["gen-mask", "--spec", "cfg.json", "--out", "m7.cgim"], dir.path()));
    ok(&coggen(&["--seed", "8", "gen-mask", "--spec", "cfg.json", "--out", "m8.cgim"], dir.path()));
    ok(&coggen(&["gen-mask", "--spec", "cfg.json", "--out", "again.cgim", "--seed", "7"], dir.path()));
    let m7 = fs::read(dir.path().join("m7.cgim")).unwrap();
    assert_eq!(m7.len(), 17 + 256);
    assert_ne!(m7, fs::read(dir.path().join("m8.cgim")).unwrap());
    assert_eq!(m7, fs::read(dir.path().join("again.cgim")).unwrap());
}

#[test]
fn vanilla_flag_uses_one_stage() {
    let dir = setup();
    ok(&coggen(&["reconstruct", "--config", "cfg.json", "--out-dir", "v", "--vanilla"], dir.path()));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("v/report.json")).unwrap()).unwrap();
    assert_eq!(report["vanilla"], true);
    let stages = report["stages"].as_array().unwrap();
    assert_eq!(stages.len(), 1);
    assert_eq!(stages[0]["iterations"], 40);
    assert!(stages[0]["lambda"].is_null());
}

#[test]
fn phantom_file_decodes() {
    let dir = setup();
    ok(&coggen(&["gen-phantom", "--spec", "cfg.json", "--out", "x.cgim"], dir.path()));
    let grid = coggen::io::read_grid(dir.path().join("x.cgim")).unwrap();
    assert_eq!(grid.shape(), (16, 16));
    assert_eq!(grid.max_magnitude(), 1.0);
}

#[test]
fn ablate_writes_every_arm() {
    let dir = setup();
    ok(&coggen(
        &["ablate", "--suite", "mode-weighting", "--config", "cfg.json", "--seeds", "2", "--out-dir", "abl"],
        dir.path(),
    ));
    let csv = fs::read_to_string(dir.path().join("abl/ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    for seed in [7, 8] {
        for arm in ["uniform", "teacher-only", "student-only", "dual"] {
            assert!(dir.path().join(format!("abl/seed_{seed}/{arm}/curve.csv")).exists());
        }
    }
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("abl/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["means"].as_array().unwrap().len(), 4);
}

#[test]
fn verify_theory_section() {
    let dir = setup();
    ok(&coggen(&["verify-theory", "--section", "pl", "--out", "t.json"], dir.path()));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(report["format"], "coggen-theory/1");
    assert_eq!(report["passed"], true);
    assert!(report["spectral"].is_null());
}

#[test]
fn exit_codes() {
    let dir = setup();
    fs::write(dir.path().join("bad.json"), r#"{"optimizer": {"learning_rate": -1}}"#).unwrap();
    fs::write(dir.path().join("broken.json"), "{").unwrap();
    let code = |args: &[&str]| coggen(args, dir.path()).status.code();
    assert_eq!(code(&["gen-mask", "--spec", "bad.json", "--out", "m.cgim"]), Some(2));
    assert_eq!(code(&["gen-mask", "--spec", "broken.json", "--out", "m.cgim"]), Some(2));
    assert_eq!(code(&["gen-mask", "--spec", "missing.json", "--out", "m.cgim"]), Some(4));
    assert_eq!(code(&["gen-mask", "--spec", "cfg.json", "--out", "no/such/dir/m.cgim"]), Some(4));

    let diverging = TINY.replace("0.001", "1000000");
    fs::write(dir.path().join("div.json"), diverging).unwrap();
    assert_eq!(code(&["reconstruct", "--config", "div.json", "--out-dir", "d"]), Some(3));
    assert!(dir.path().join("d/curve.csv").exists());
}
