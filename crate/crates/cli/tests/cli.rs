use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn binsense(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_binsense"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn dmax_fano_size() {
    let dir = tempfile::tempdir().unwrap();
    let o = binsense(dir.path(), &["dmax", "-M", "7", "-N", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("practical d_max: 3"), "{out}");
    assert!(out.contains("theoretical bound: 3"), "{out}");
    assert!(stderr(&o).contains("master seed: 0"));
}

#[test]
fn construct_peg_reports_girth_and_rho() {
    let dir = tempfile::tempdir().unwrap();
    let o = binsense(dir.path(), &["construct", "peg", "-M", "200", "-N", "400", "-d", "7", "-o", "peg.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("peg.txt.json")).unwrap()).unwrap();
    assert_eq!(summary["girth"], "6");
    assert_eq!(summary["coherence"], "1/7");
    assert_eq!(summary["rho"]["exact"], "13/57");
    let measured = summary["correlated_fraction"].as_f64().unwrap();
    assert!((measured - 0.2281).abs() < 1e-3, "{measured}");
    let stdout_summary: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(stdout_summary, summary);

    let matrix = binsense::SensingMatrix::read(dir.path().join("peg.txt")).unwrap();
    assert_eq!((matrix.nrows(), matrix.ncols(), matrix.degree()), (200, 400, 7));
}

#[test]
fn construct_failure_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = binsense(
        dir.path(),
        &["construct", "peg", "-M", "20", "-N", "40", "-d", "8", "--retries", "1", "-o", "m.txt"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = binsense(dir.path(), &["bench", "--config", "missing.json", "-o", "out"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn bad_arguments_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(binsense(dir.path(), &["bogus"]).status.code(), Some(1));
    assert_eq!(binsense(dir.path(), &["bench", "-k", "x"]).status.code(), Some(1));
    assert_eq!(binsense(dir.path(), &["bench", "--trials", "0"]).status.code(), Some(1));
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["bench", "--matrix", "random", "-M", "60", "-N", "120", "-d", "3", "-k", "5,10,15", "--trials", "40", "--seed", "9"];
    let mut one = common.to_vec();
    one.extend(["--threads", "1", "-o", "one"]);
    let mut eight = common.to_vec();
    eight.extend(["--threads", "8", "-o", "eight"]);
    assert!(binsense(dir.path(), &one).status.success());
    assert!(binsense(dir.path(), &eight).status.success());
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("one.csv"), read("eight.csv"));
    assert_eq!(read("one.json"), read("eight.json"));
    let csv = String::from_utf8(read("one.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.starts_with("k,sigma,trials,successes,success_rate,stderr,mean_recovery_rate\n"));
}

#[test]
fn replay_reproduces_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = binsense(dir.path(), &["bench", "--matrix", "gaussian", "-M", "40", "-N", "80", "-k", "4:12", "--kmax", "0.9", "--trials", "30", "-o", "first"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("k_max:"));
    let o = binsense(dir.path(), &["bench", "--config", "first.json", "-o", "second"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let read = |name: &str| std::fs::read(dir.path().join(name)).unwrap();
    assert_eq!(read("first.json"), read("second.json"));
    assert_eq!(read("first.csv"), read("second.csv"));
}

#[test]
fn recover_and_analyze_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = binsense(dir.path(), &["construct", "random", "-M", "50", "-N", "100", "-d", "4", "--seed", "3", "-o", "r.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::write(dir.path().join("x.json"), r#"{"n": 100, "support": [3, 50], "values": [1.5, -2.0]}"#).unwrap();
    let o = binsense(dir.path(), &["recover", "r.txt", "--algo", "sp", "--signal", "x.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["k"], 2);
    assert_eq!(report["success"], true);

    let o = binsense(dir.path(), &["analyze", "r.txt", "-k", "2,3", "-s", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["empirical_ric"].as_array().unwrap().len(), 2);
    assert_eq!(report["offdiag_proportion"].as_array().unwrap().len(), 2);
}

#[test]
fn gaussian_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let o = binsense(dir.path(), &["construct", "gaussian", "-M", "30", "-N", "60", "--seed", "5", "-o", "g.txt"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = binsense(dir.path(), &["bench", "--input", "g.txt", "--algo", "omp", "-k", "3", "--trials", "20"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.lines().nth(1).unwrap().starts_with("3,0,20,"), "{csv}");
}
