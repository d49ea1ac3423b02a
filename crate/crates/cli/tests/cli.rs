use std::fs::File;
use std::process::{Command, Output};

fn hardy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardy"))
        .args(args)
        .env_remove("HARDY_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(o: &Output) -> Vec<csv::StringRecord> {
    let s = stdout(o);
    csv::Reader::from_reader(s.as_bytes()).records().map(|r| r.unwrap()).collect()
}

#[test]
fn z_eval_at_lehmer_point() {
    let o = hardy(&["z", "eval", "--t", "2.47575"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&o);
    let z: f64 = r[0][1].parse().unwrap();
    assert!((z + 0.52625).abs() <= 5e-5, "{z}");
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("config_hash=") && err.contains("cfg_fingerprint=") && err.contains("version="));
}

#[test]
fn moments_table_at_one() {
    let o = hardy(&["moments", "table", "--k", "1", "--to", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&o);
    assert_eq!(r.len(), 1);
    let e: f64 = r[0][2].parse().unwrap();
    let expect = 1.0 + (2.0 * std::f64::consts::PI).ln() - 2.0 * 0.577_215_664_901_532_9;
    assert_eq!(&r[0][1], "0.0");
    assert!((e - expect).abs() < 1e-12);
}

#[test]
fn json_carries_reproducibility_block() {
    let o = hardy(&["--format", "json", "z", "eval", "--t", "20"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["command"], "z eval");
    assert_eq!(v["reproducibility"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["rows"][0]["t"], 20.0);
}

#[test]
fn identical_runs_are_byte_identical() {
    let args = ["--format", "json", "z", "scan", "--from", "10", "--to", "30"];
    let a = hardy(&args);
    let b = hardy(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn usage_and_config_errors_exit_1() {
    assert_eq!(hardy(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(hardy(&["z", "eval"]).status.code(), Some(1));
    assert_eq!(hardy(&["--help"]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "grid_step = 0.025\nnot_a_key = 3\n").unwrap();
    let o = hardy(&["--config", cfg.to_str().unwrap(), "z", "eval", "--t", "5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("not_a_key"));

    std::fs::write(&cfg, "[tolerances]\nparseval = 2.0\n").unwrap();
    assert_eq!(hardy(&["--config", cfg.to_str().unwrap(), "z", "eval", "--t", "5"]).status.code(), Some(1));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "format = \"json\"\n[eval]\nmethod = \"riemann_siegel_fast\"\n").unwrap();
    let o = hardy(&["--config", cfg.to_str().unwrap(), "--format", "csv", "--method", "oracle", "z", "eval", "--t", "50"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(&rows(&o)[0][2], "euler_maclaurin_oracle");
}

#[test]
fn computation_error_exits_2() {
    assert_eq!(hardy(&["mellin", "eval", "--k", "9", "--sigma", "3", "--t", "1"]).status.code(), Some(2));
}

#[test]
fn failed_check_exits_3() {
    // U = x leaves the inversion integral far from Z(x)
    let o = hardy(&["verify", "inversion", "--k", "1", "--x", "20", "--c", "1.5", "--U", "20"]);
    let r = rows(&o);
    let err: f64 = r[0][7].parse().unwrap();
    assert_eq!(o.status.code(), Some(if err <= 0.1 { 0 } else { 3 }));
}

#[test]
fn grid_build_and_extend() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = hardy(&["--cache-dir", d, "grid", "build", "--to", "50", "--step", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let built = rows(&o);
    assert_eq!(&built[0][2], "50.0");
    let o = hardy(&["--cache-dir", d, "grid", "extend", "--to", "80", "--step", "0.05"]);
    assert_eq!(o.status.code(), Some(0));
    let ext = rows(&o);
    assert_eq!(&ext[0][0], &built[0][0]);
    assert_eq!(&ext[0][2], "80.0");

    let file = dir.path().join(&ext[0][0]);
    let grid = hardy_core::store::load_grid(&file).unwrap();
    let fresh = hardy_core::moments::build_grid(1.0, 80.0, 0.05, &Default::default()).unwrap();
    assert_eq!(grid.values(), fresh.values());

    assert_eq!(hardy(&["grid", "build", "--to", "10"]).status.code(), Some(1));
}

#[test]
fn cache_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hardy"))
        .args(["grid", "build", "--to", "20"])
        .env("HARDY_CACHE_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let name = rows(&o)[0][0].to_string();
    assert!(dir.path().join(name).exists());
}

#[test]
fn locked_cache_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let lock = File::create(dir.path().join(".lock")).unwrap();
    lock.lock().unwrap();
    let o = hardy(&["--cache-dir", dir.path().to_str().unwrap(), "grid", "build", "--to", "20"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("locked"));
}
