use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn polydepth(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polydepth")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn synth(dir: &Path, count: &str) {
    let o = polydepth(&["synth", "--count", count, "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synth_then_eval_linear() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6");
    assert!(dir.path().join("manifest.txt").is_file());
    assert!(dir.path().join("scene_0000.z.prad").is_file());
    let o = polydepth(&["eval", "--data", dir.path().to_str().unwrap(), "--method", "linear", "--unit", "m"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("method,scene,"), "{header}");
    assert!(text.lines().count() > 6);
}

#[test]
fn fit_writes_one_row_per_scene() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "4");
    let out = dir.path().join("fit.csv");
    let o = polydepth(&[
        "fit",
        "--data",
        dir.path().to_str().unwrap(),
        "--degree",
        "3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.starts_with("scene,kind,degree,z_max,c0,c1,c2,c3,"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn train_writes_log_config_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), "6");
    let out = dir.path().join("run");
    let o = polydepth(&[
        "train",
        "--data",
        dir.path().to_str().unwrap(),
        "--epochs",
        "2",
        "--set",
        "c_r=8",
        "--set",
        "c_z=8",
        "--set",
        "c_v=8",
        "--set",
        "c_s=8",
        "--set",
        "prototypes=4",
        "--set",
        "val_every=2",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("best.ckpt").is_file());
    assert!(out.join("train.cfg").is_file());
    let log = fs::read_to_string(out.join("log.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);

    let ckpt = out.join("best.ckpt");
    let o = polydepth(&[
        "inspect",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--data",
        dir.path().to_str().unwrap(),
        "--scene",
        "scene_0001",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("z,depth,slope\n"));
}

#[test]
fn inspect_explicit_coefficients() {
    let o = polydepth(&["inspect", "--coeffs", "0,0,-1.5,1", "--z-max", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let (curve, inflections) = text.split_once("\n\n").unwrap();
    assert_eq!(curve.lines().count(), 513);
    let rows: Vec<&str> = inflections.lines().collect();
    assert_eq!(rows[0], "z,change");
    assert_eq!(rows.len(), 2);
}

#[test]
fn gradcheck_passes() {
    let o = polydepth(&["gradcheck"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).starts_with("check,entries,max_rel_error,passed\n"));
}

#[test]
fn exit_codes_follow_the_error_kind() {
    assert_eq!(polydepth(&["eval", "--bogus"]).status.code(), Some(1));
    assert_eq!(polydepth(&[]).status.code(), Some(1));
    let missing = tempfile::tempdir().unwrap();
    let o = polydepth(&["eval", "--data", missing.path().to_str().unwrap(), "--method", "linear"]);
    assert_eq!(o.status.code(), Some(2));
    let o = polydepth(&["eval", "--data", missing.path().to_str().unwrap(), "--method", "nonsense"]);
    assert_eq!(o.status.code(), Some(1));
}
