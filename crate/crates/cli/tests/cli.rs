use std::os::unix::fs::PermissionsExt;
use std::path::Path;
use std::process::{Command, Output};

fn shiftcheck(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shiftcheck"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn have_solver() -> bool {
    let found = shiftcheck::solver::SolverConfig::from_env().resolve().is_some();
    if !found {
        eprintln!("skipping: no solver installed");
    }
    found
}

fn fake_solver(dir: &Path, answer: &str) -> String {
    let path = dir.join("fake-solver");
    std::fs::write(&path, format!("#!/bin/sh\ncat > /dev/null\necho {answer}\n")).unwrap();
    std::fs::set_permissions(&path, std::fs::Permissions::from_mode(0o755)).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_shows_the_catalog() {
    let o = shiftcheck(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 24);
    assert!(text.lines().any(|l| l.starts_with("rnmGap ")));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(code(&shiftcheck(&["test", "--bench", "rnm", "--bogus"])), 64);
    assert_eq!(code(&shiftcheck(&["test", "--bench", "noSuchBench"])), 64);
    assert_eq!(code(&shiftcheck(&["test", "--bench", "rnm", "--eps"])), 64);
    assert_eq!(code(&shiftcheck(&["test", "--bench", "rnm", "--timeout", "0"])), 64);
    assert_eq!(code(&shiftcheck(&["bound", "--delta", "2", "--c1", "0", "--c2", "1"])), 64);
    assert_eq!(code(&shiftcheck(&["--help"])), 0);
}

#[test]
fn missing_solver_exits_69() {
    let o = shiftcheck(&["test", "--bench", "ns", "--ntests", "1", "--solver", "/nonexistent/z3"]);
    assert_eq!(code(&o), 69);
}

#[test]
fn inconclusive_solver_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let solver = fake_solver(dir.path(), "unknown");
    let o = shiftcheck(&["test", "--bench", "ns", "--ntests", "2", "--ntraces", "20", "--solver", &solver]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["aggregate"]["unknowns"], 2);
    assert_eq!(report["pairs"][0]["bucket_verdicts"][0]["verdict"], "unknown");
}

#[test]
fn correct_benchmark_exits_0() {
    if !have_solver() {
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let o = shiftcheck(&[
        "test", "--bench", "rnm", "--ntests", "4", "--ntraces", "200", "--report", report.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["benchmark"], "rnm");
    assert_eq!(r["seeds"]["master"], 7);
    assert_eq!(r["aggregate"]["tests_run"], 4);
    assert_eq!(r["pairs"].as_array().unwrap().len(), 4);
}

#[test]
fn buggy_benchmark_exits_1() {
    if !have_solver() {
        return;
    }
    let o = shiftcheck(&["test", "--bench", "nsBuggy", "--ntests", "10", "--ntraces", "100"]);
    assert_eq!(code(&o), 1);
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("first rejection at pair"), "{stderr}");
    // the same pairs pass once the budget covers the halved width
    let o = shiftcheck(&["test", "--bench", "nsBuggy", "--ntests", "3", "--ntraces", "100", "--eps", "2"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn emit_smt_writes_formulas() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("smt");
    let o = shiftcheck(&[
        "emit-smt", "--bench", "rnm", "--ntraces", "50", "--dump-smt", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let files: Vec<_> = std::fs::read_dir(&out).unwrap().collect();
    assert!(!files.is_empty());
    let text = std::fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
    assert!(text.contains("(check-sat)"));
}

#[test]
fn bound_prints_sample_count() {
    let o = shiftcheck(&[
        "bound", "--delta", "1e-5", "--c1", "-1e308", "--c2", "1e308", "--omega", "2.220446049250313e-16",
        "--d", "10", "--theta", "0.6931471805599453",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let m: u64 = text.lines().next().unwrap().strip_prefix("m = ").unwrap().parse().unwrap();
    assert!(m > 100_000);
    let p: f64 = text.lines().nth(1).unwrap().strip_prefix("failure probability <= ").unwrap().parse().unwrap();
    assert!((p - 2f64.powi(-10)).abs() < 1e-15, "{text}");
}
