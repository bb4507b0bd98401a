use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "\
center_frequency = 10e9
bandwidth = 50e6
freq_samples = 16
receivers = 8
aperture = 2pi
receiver_range = 10000
receiver_height = 250
tx_position = 15800, 0, 250
scene_side = 7.2
points_per_side = 3
snr_db = none
iterations = 200
step_size = 0.2
seed = 1
oversample_factor = 1
amplitude_mode = compensated
phase_model = exact
scene = blocks
";

fn gwf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwf")).args(args).output().unwrap()
}

fn config(dir: &Path, text: &str) -> String {
    let p = dir.join("small.cfg");
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn reconstruct_writes_images_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let o = gwf(&["reconstruct", "--config", &cfg, "--out", out.to_str().unwrap(), "--trace"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["truth.pgm", "estimate.pgm", "estimate.csv", "estimate.range.txt", "summary.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iteration,objective,aligned_mse");
    assert_eq!(trace.lines().count(), 202);
}

#[test]
fn simulate_then_reconstruct_from_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("sim");
    let o = gwf(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let data = out.join("data.csv");
    assert_eq!(fs::read_to_string(&data).unwrap().lines().count(), 1 + 28 * 16);
    let o = gwf(&[
        "reconstruct", "--config", &cfg, "--out", out.to_str().unwrap(), "--data", data.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("estimate.pgm").exists());
}

#[test]
fn sweep_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = gwf(&[
            "sweep", "--config", &cfg, "--out", out.to_str().unwrap(), "--sweep", "receivers",
            "--values", "6:2:8", "--seeds", "0..2",
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        fs::read(out.join("sweep.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 5);
}

#[test]
fn bounds_and_validate_on_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = gwf(&["bounds", "--config", "preset:active", "--out", out]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("min spacing"));
    assert!(dir.path().join("bounds.csv").exists());
    let o = gwf(&["validate", "--config", "preset:passive", "--out", out, "--trials", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    assert_eq!(gwf(&["bounds", "--config", "/definitely/missing.cfg", "--out", out]).status.code(), Some(1));
    let bad = config(dir.path(), &SMALL.replace("freq_samples = 16", "freq_samples = 0"));
    assert_eq!(gwf(&["simulate", "--config", &bad, "--out", out]).status.code(), Some(1));
    assert_eq!(gwf(&["sweep", "--config", "preset:active"]).status.code(), Some(1));
    let diverging = config(dir.path(), &SMALL.replace("step_size = 0.2", "step_size = 500"));
    assert_eq!(gwf(&["reconstruct", "--config", &diverging, "--out", out]).status.code(), Some(2));
    assert_eq!(gwf(&["--help"]).status.code(), Some(0));
}
