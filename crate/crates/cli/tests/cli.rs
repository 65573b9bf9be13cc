use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn torsio(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_torsio"))
        .args(args)
        .current_dir(dir)
        .env("TORSIO_THREADS", "1")
        .env_remove("TORSIO_SEED")
        .output()
        .expect("binary runs")
}

fn setup() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    let files = [
        ("zero.json", r#"{"type":"zero"}"#),
        ("disk.json", r#"{"type":"inf_outside","region":{"type":"ball","center":[0,0],"radius":1}}"#),
        ("disk_region.json", r#"{"type":"ball","center":[0,0],"radius":1}"#),
        ("interval.json", r#"{"type":"inf_outside","region":{"type":"box","lo":[0],"hi":[1]}}"#),
    ];
    for (name, text) in files {
        std::fs::write(dir.path().join(name), text).unwrap();
    }
    dir
}

fn json(path: PathBuf) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gallery_run_bounded_domain_is_compact() {
    let dir = setup();
    let out = torsio(dir.path(), &["gallery", "run", "bounded_domain", "--out", "g.json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(dir.path().join("g.json"));
    assert_eq!(v["result"]["cross"]["l2"]["decision"], "compact");
    assert_eq!(v["result"]["matches"], true);
    assert_eq!(v["run_config"]["command"]["name"], "gallery_run");
}

#[test]
fn zero_measure_is_not_compact_into_l1() {
    let dir = setup();
    let args = ["diagnose", "--embedding", "l1", "--measure", "zero.json", "--box=-24,-24,24,24", "--h", "0.5"];
    let out = torsio(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["result"]["verdict"]["decision"], "not_compact");
    assert!(String::from_utf8_lossy(&out.stderr).contains("finite box"));
}

#[test]
fn invalid_input_exits_with_two() {
    let dir = setup();
    let cases: [&[&str]; 5] = [
        &["solve", "--bogus"],
        &["solve", "--measure", "missing.json", "--box=0,1", "--h", "0.1"],
        &["gallery", "run", "no_such_preset"],
        &["probe", "--criterion", "9", "--measure", "zero.json", "--box=-4,-4,4,4", "--h", "0.25"],
        &["rigidity", "--measure", "disk.json", "--box=-2,-2,2,2", "--h", "0.25", "--radii", "1,3"],
    ];
    for args in cases {
        assert_eq!(torsio(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn non_convergence_exits_with_three_and_still_writes() {
    let dir = setup();
    let args = ["solve", "--measure", "disk.json", "--box=-2,-2,2,2", "--h", "0.0625", "--max-iter", "2", "--out", "s.json"];
    assert_eq!(torsio(dir.path(), &args).status.code(), Some(3));
    assert_eq!(json(dir.path().join("s.json"))["result"]["converged"], false);
}

#[test]
fn strict_inconclusive_exits_with_four() {
    let dir = setup();
    let base = ["diagnose", "--measure", "zero.json", "--box=-4,-4,4,4", "--h", "0.25"];
    assert_eq!(torsio(dir.path(), &base).status.code(), Some(0));
    let strict: Vec<&str> = base.iter().copied().chain(["--strict"]).collect();
    assert_eq!(torsio(dir.path(), &strict).status.code(), Some(4));
}

#[test]
fn solve_reports_the_interval_torsion_and_dumps_csv() {
    let dir = setup();
    let args = ["solve", "--measure", "interval.json", "--box=-0.50048828125,1.50048828125", "--h", "0.0009765625", "--out", "s.json", "--csv", "u.csv"];
    assert_eq!(torsio(dir.path(), &args).status.code(), Some(0));
    let max = json(dir.path().join("s.json"))["result"]["max"].as_f64().unwrap();
    assert!((max - (1.0 - 1.0 / 0.5f64.cosh())).abs() < 1e-4);
    let csv = std::fs::read_to_string(dir.path().join("u.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("i0,x0,value"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row[0], "0");
    // 17 significant digits in scientific notation
    let mantissa = row[1].trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.len(), 18, "{}", row[1]);
}

#[test]
fn eig_and_rigidity_on_the_disk() {
    let dir = setup();
    let out = torsio(dir.path(), &["eig", "--region", "disk_region.json", "--box=-1.5,-1.5,1.5,1.5", "--h", "0.03125", "-k", "2"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let l = v["result"]["eigenvalues"].as_array().unwrap();
    assert!((l[0].as_f64().unwrap() / 5.783186 - 1.0).abs() < 0.03);
    let out = torsio(dir.path(), &["rigidity", "--measure", "disk.json", "--box=-2,-2,2,2", "--h", "0.0078125", "--radii", "1.5"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let p = v["result"]["P"].as_f64().unwrap();
    assert!((p / (std::f64::consts::PI / 8.0) - 1.0).abs() < 0.03);
}

#[test]
fn rerun_reproduces_artifacts_bit_identically() {
    let dir = setup();
    std::fs::create_dir(dir.path().join("again")).unwrap();
    let runs: [&[&str]; 3] = [
        &["optimize", "-k", "2", "-m", "2", "--budget", "50", "--seed", "4", "--cells-per-diameter", "16", "--out", "a.json", "--csv", "a.csv"],
        &["torsion", "--measure", "disk.json", "--box=-2,-2,2,2", "--h", "0.125", "--p", "3", "--out", "a.json", "--csv", "a.csv"],
        &["abscissa", "--measure", "disk.json", "--box=-2,-2,2,2", "--h", "0.125", "--out", "a.json", "--csv", "a.csv"],
    ];
    for args in runs {
        assert_eq!(torsio(dir.path(), args).status.code(), Some(0), "{args:?}");
        let out = torsio(dir.path(), &["rerun", "a.json", "--out-dir", "again"]);
        assert_eq!(out.status.code(), Some(0));
        for f in ["a.json", "a.csv"] {
            let first = std::fs::read(dir.path().join(f)).unwrap();
            let second = std::fs::read(dir.path().join("again").join(f)).unwrap();
            assert!(first == second, "{args:?}: {f} differs");
        }
    }
}

#[test]
fn seed_comes_from_the_environment_when_not_given() {
    let dir = setup();
    let out = Command::new(env!("CARGO_BIN_EXE_torsio"))
        .args(["optimize", "-k", "1", "-m", "1", "--budget", "50", "--cells-per-diameter", "8"])
        .env("TORSIO_SEED", "17")
        .env("TORSIO_THREADS", "1")
        .current_dir(dir.path())
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["run_config"]["command"]["ga"]["seed"], 17);
    assert_eq!(v["run_config"]["threads"], 1);
}

#[test]
fn gallery_list_names_every_preset() {
    let dir = setup();
    let out = torsio(dir.path(), &["gallery", "list"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v["result"].as_array().unwrap().iter().map(|p| p["name"].as_str().unwrap()).collect();
    assert_eq!(names, torsio_core::gallery::NAMES);
}
