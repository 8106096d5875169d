use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pbaloc::cli::{COMPARISON_COLUMNS, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_OK, EXIT_ORACLE, TRACE_COLUMNS};

fn pbaloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbaloc")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

fn gen_scene(dir: &Path) -> String {
    let scene = dir.join("scene.pgm");
    let scene = scene.to_str().unwrap().to_string();
    let out = pbaloc(&["gen-scene", "--dims", "200x300", "--center", "100,50", "--noise", "0.2", "--seed", "7", "-o", &scene]);
    assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
    scene
}

#[test]
fn gen_scene_writes_pgm_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_scene(dir.path());
    let pgm = fs::read(&scene).unwrap();
    assert!(pgm.starts_with(b"P5"));
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("scene.json")).unwrap()).unwrap();
    assert_eq!(meta["target_center"]["row"], 100);
    assert_eq!(meta["target_center"]["col"], 50);
    assert_eq!(meta["seed"], 7);
}

#[test]
fn localize_trace_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_scene(dir.path());
    let mut runs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let path = dir.path().join(name);
        let out = pbaloc(&["localize", "--scene", &scene, "--oracle", "bsc", "--eps", "0", "--seed", "3", "-o", path.to_str().unwrap()]);
        assert_eq!(code(&out), EXIT_OK, "{}", String::from_utf8_lossy(&out.stderr));
        let stdout = String::from_utf8(out.stdout).unwrap();
        assert!(stdout.contains("status Converged"), "{stdout}");
        runs.push(data_lines(&path));
    }
    assert_eq!(runs[0][0], TRACE_COLUMNS.join(","));
    assert!(runs[0].len() > 1);
    assert_eq!(runs[0], runs[1]);

    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(text.starts_with("# pbaloc "));
    assert!(text.lines().any(|l| l.starts_with("# config_hash=")));
}

#[test]
fn compare_reports_both_methods() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_scene(dir.path());
    let path = dir.path().join("cmp.csv");
    let out = pbaloc(&["compare", "--scene", &scene, "--eps", "0", "--windows", "100,150", "--shift", "25", "-o", path.to_str().unwrap()]);
    // Block-truth runs often find the center but never meet the stop rule.
    assert!([EXIT_OK, EXIT_NOT_CONVERGED].contains(&code(&out)), "{}", String::from_utf8_lossy(&out.stderr));
    let lines = data_lines(&path);
    assert_eq!(lines[0], COMPARISON_COLUMNS.join(","));
    assert!(lines[1].starts_with("pba,"));
    assert!(lines[1].contains(",100,50,0.0,"), "{}", lines[1]);
    // 200x300: w=100 gives 5*9 windows, w=150 gives 3*7.
    assert!(lines[2].starts_with("sliding_window,66,"), "{}", lines[2]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("speedup"));
}

#[test]
fn baseline_counts_every_window() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_scene(dir.path());
    let out = pbaloc(&["baseline", "--scene", &scene, "--windows", "100", "--shift", "50", "--eps", "0"]);
    assert_eq!(code(&out), EXIT_OK);
    assert!(String::from_utf8(out.stdout).unwrap().contains("calls 15"));
}

#[test]
fn analyze_writes_curve() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mse.csv");
    let p = path.to_str().unwrap();
    let args = ["analyze", "--grid", "64", "--dims", "2", "--eps", "0.1", "--trials", "20", "--nmax", "30", "--seed", "1", "-o", p];
    assert_eq!(code(&pbaloc(&args)), EXIT_OK);
    let first = data_lines(&path);
    assert_eq!(first[0], "n,mse,bound,trials,epsilon,dims");
    assert_eq!(first.len(), 32);
    assert_eq!(code(&pbaloc(&args)), EXIT_OK);
    assert_eq!(first, data_lines(&path));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.pgm");
    assert_eq!(code(&pbaloc(&["localize", "--scene", missing.to_str().unwrap()])), EXIT_INVALID);
    assert_eq!(code(&pbaloc(&["frobnicate"])), EXIT_INVALID);
    assert_eq!(code(&pbaloc(&["analyze", "--eps", "0.7"])), EXIT_INVALID);
    assert_eq!(code(&pbaloc(&["--help"])), EXIT_OK);

    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let endpoint = format!("tcp:127.0.0.1:{port}");
    assert_eq!(code(&pbaloc(&["check-oracle", "--endpoint", &endpoint])), EXIT_ORACLE);

    let scene = gen_scene(dir.path());
    let out = pbaloc(&["localize", "--scene", &scene, "--max-iter", "2"]);
    assert_eq!(code(&out), EXIT_NOT_CONVERGED);
}

#[test]
fn config_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbaloc(&["--dump-config", "analyze", "--trials", "9"]);
    assert_eq!(code(&out), EXIT_OK);
    let cfg_path = dir.path().join("cfg.json");
    fs::write(&cfg_path, &out.stdout).unwrap();
    let again = pbaloc(&["--config", cfg_path.to_str().unwrap(), "--dump-config", "analyze"]);
    assert_eq!(code(&again), EXIT_OK);
    assert_eq!(out.stdout, again.stdout);
    assert!(String::from_utf8(out.stdout).unwrap().contains("\"trials\": 9"));
}
