use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nbrw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nbrw")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn empty_grid_exits_2_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": "speed-sweep", "law": {"name": "binary_gaussian"}, "grids": {"N": []}}"#,
    );
    let out = dir.path().join("out");
    let o = nbrw(&["speed-sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grids.N"));
    assert!(!out.exists());
}

#[test]
fn subcommand_must_match_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"experiment": "verify"}"#);
    let o = nbrw(&["predict", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"experiment": "verify", "#);
    let o = nbrw(&["verify", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn speed_sweep_is_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": "speed-sweep", "law": {"name": "binary_gaussian"},
            "grids": {"N": [1000, 100, 10]}, "steps": 300, "reps": 4}"#,
    );
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let oa = nbrw(&["speed-sweep", "--config", &cfg, "--seed", "9", "--out", a.to_str().unwrap(), "--threads", "1"]);
    let ob = nbrw(&["speed-sweep", "--config", &cfg, "--seed", "9", "--out", b.to_str().unwrap(), "--threads", "3"]);
    assert_eq!(oa.status.code(), Some(0), "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(ob.status.code(), Some(0));
    for f in ["speed_sweep.csv", "trajectory.csv", "cloud.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let sweep = fs::read_to_string(a.join("speed_sweep.csv")).unwrap();
    let v: Vec<f64> = sweep.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(v.len(), 3);
    assert!(v.iter().all(|x| *x < 0.0));
    assert!(v.windows(2).all(|w| w[0] <= w[1]), "{v:?}");

    let c = dir.path().join("c");
    nbrw(&["speed-sweep", "--config", &cfg, "--seed", "10", "--out", c.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(c.join("trajectory.csv")).unwrap());
}

#[test]
fn verify_on_shipped_laws_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": "verify", "suite": {"reps": 10000, "particles": 2000000, "spine_reps": 5000}}"#,
    );
    let out = dir.path().join("out");
    let o = nbrw(&["verify", "--config", &cfg, "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("verify.json")).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert!(reports.len() >= 15);
    assert!(reports.iter().all(|r| r["pass"] == true));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("truncation_window") && manifest.contains("wall_time_seconds"));
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"experiment": "corridor", "law": {"name": "binary_gaussian"}, "grids": {"n": [8, 4]}, "reps": 2,
            "corridor": {"corridor": [[0, -1, 1], [0.25, 0.3, 0.35], [1, 0.3, 0.35]], "walk": "lazy",
                         "exponent": 1, "population": 4}}"#,
    );
    let out = dir.path().join("out");
    let o = nbrw(&["corridor", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn predict_writes_nu_n() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"experiment": "predict", "grids": {"N": [22026]}}"#);
    let out = dir.path().join("out");
    let o = nbrw(&["predict", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("predict_speed.csv")).unwrap();
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    let l = 22026f64.ln();
    let expected = std::f64::consts::PI.powi(2) / 2.0 * 2.0 * std::f64::consts::LN_2 / (l * l);
    assert!((row[2] - expected).abs() < 1e-15);

    let cfg = write_config(dir.path(), "d.json", r#"{"experiment": "predict", "grids": {"N": [1]}}"#);
    let o = nbrw(&["predict", "--config", &cfg, "--out", dir.path().join("o2").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside domain"));
}

#[test]
fn help_lists_subcommands() {
    let o = nbrw(&["--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for s in ["calibrate", "verify", "speed-sweep", "rho-scaling", "corridor", "predict"] {
        assert!(text.contains(s), "{s}");
    }
}
