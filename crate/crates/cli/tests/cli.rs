//! End-to-end runs of the command-line binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynsurv"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Simulates and fits an Ex1 dataset in `dir`; returns (data, model) paths.
fn fitted(dir: &Path, k: &str) -> (PathBuf, PathBuf) {
    ok(dir, &["--seed", "5", "simulate", "--preset", "ex1", "--k", k, "--n-train", "80", "--out", "d.csv"]);
    ok(dir, &["fit", "--data", "d.csv", "--out", "m.json"]);
    (dir.join("d.csv"), dir.join("m.json"))
}

/// Data rows of a CSV with provenance comments removed.
fn rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn exit_codes_follow_the_failure_kind() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("bad.toml"), "family = \"weibull\"\n").unwrap();
    let cfg = run(d, &["simulate", "--preset", "ex1", "--config", "bad.toml", "--out", "x.csv"]);
    assert_eq!(cfg.status.code(), Some(2));

    // every subject dies at once: no event information to fit
    fs::write(d.join("flat.csv"), "id,t1,d1,y,dtilde\n1,1,0,1,1\n2,1,0,1,1\n").unwrap();
    let est = run(d, &["fit", "--data", "flat.csv", "--out", "m.json"]);
    assert_eq!(est.status.code(), Some(3), "{}", String::from_utf8_lossy(&est.stderr));

    fitted(d, "3");
    fs::write(d.join("q.csv"), "id,t1,t2,t3\na,0.2,,\n").unwrap();
    let unknown = run(d, &["predict", "--model", "m.json", "--queries", "q.csv", "--out", "p.csv", "--method", "p9"]);
    assert_eq!(unknown.status.code(), Some(2));
    // a history reaching past the follow-up horizon
    fs::write(d.join("q.csv"), "id,t1,t2,t3\na,500,,\n").unwrap();
    let pred = run(d, &["predict", "--model", "m.json", "--queries", "q.csv", "--out", "p.csv"]);
    assert_eq!(pred.status.code(), Some(4), "{}", String::from_utf8_lossy(&pred.stderr));
}

#[test]
fn invalid_simulation_table_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(
        d.join("sim.toml"),
        "[simulation]\nfamily = \"clayton\"\ntau_alpha = 0.3\ntau_thetas = [-0.2]\nevent_rates = [1.0]\n\
         terminal_rate = 0.6\ncensor_upper = 20.0\nn_train = 10\nseed = 3\n",
    )
    .unwrap();
    let out = run(d, &["simulate", "--config", "sim.toml", "--out", "x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("simulation.tau_thetas"));
}

#[test]
fn simulated_files_have_the_expected_layout_and_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for name in ["a.csv", "b.csv"] {
        ok(d, &["--seed", "9", "simulate", "--preset", "ex1", "--n-train", "40", "--out", name, "--latent", &format!("l{name}")]);
    }
    let r = rows(&d.join("a.csv"));
    assert_eq!(r[0], ["id", "t1", "t2", "t3", "d1", "d2", "d3", "y", "dtilde"]);
    assert_eq!(r.len(), 41);
    assert!(r.iter().all(|row| row.len() == 9));
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read(d.join("la.csv")).unwrap(), fs::read(d.join("lb.csv")).unwrap());
}

#[test]
fn single_event_summary_has_no_alpha_row() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "5", "simulate", "--preset", "ex1", "--k", "1", "--n-train", "80", "--out", "d.csv"]);
    let summary = ok(d, &["fit", "--data", "d.csv", "--out", "m.json"]);
    assert!(summary.contains("theta1"));
    assert!(!summary.contains("alpha"), "{summary}");
}

#[test]
fn empty_history_gives_the_baseline_and_all_methods_fan_out() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fitted(d, "3");
    fs::write(d.join("q.csv"), "id,t1,t2,t3\na,,,\nb,0.3,,0.7\n").unwrap();
    ok(d, &["predict", "--model", "m.json", "--queries", "q.csv", "--out", "p.csv", "--method", "all"]);
    let r = rows(&d.join("p.csv"));
    let curve = |id: &str, m: &str| -> Vec<String> {
        r.iter().filter(|x| x[0] == id && x[1] == m).map(|x| x[3].clone()).collect()
    };
    assert_eq!(curve("a", "DP"), curve("a", "P0"));
    let mut methods: Vec<&str> = r[1..].iter().filter(|x| x[0] == "b").map(|x| x[1].as_str()).collect();
    methods.dedup();
    assert_eq!(methods, ["DP", "P0", "P1", "P2", "P3", "P1m", "P2m", "P3m"]);
}

#[test]
fn reloaded_model_reproduces_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fitted(d, "3");
    ok(d, &["fit", "--data", "d.csv", "--out", "m2.json"]);
    fs::write(d.join("q.csv"), "id,t1,t2,t3\nb,0.3,,0.7\n").unwrap();
    for (m, out) in [("m.json", "p1.csv"), ("m2.json", "p2.csv")] {
        ok(d, &["predict", "--model", m, "--queries", "q.csv", "--out", out, "--method", "all"]);
    }
    assert_eq!(rows(&d.join("p1.csv")), rows(&d.join("p2.csv")));
}

#[test]
fn evaluation_reports_relative_accuracy_against_dp() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fitted(d, "3");
    ok(d, &["evaluate", "--model", "m.json", "--data", "d.csv", "--out", "e.json"]);
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("e.json")).unwrap()).unwrap();
    assert!(doc["provenance"]["version"].is_string());
    let methods = doc["report"]["methods"].as_array().unwrap();
    let dp = methods.iter().find(|m| m["method"] == "DP").unwrap();
    assert_eq!(dp["relative"]["mspe"].as_f64(), Some(1.0));
    assert_eq!(methods.len(), 8);
}

#[test]
fn crossval_counts_every_split() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["--seed", "5", "simulate", "--preset", "ex1", "--k", "2", "--n-train", "60", "--out", "d.csv"]);
    let table = ok(d, &["--seed", "2", "crossval", "--data", "d.csv", "--folds", "3", "--repeats", "20", "--method", "dp,p0", "--out", "cv.json"]);
    assert!(table.starts_with("splits 60"), "{table}");
    let doc: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("cv.json")).unwrap()).unwrap();
    assert_eq!(doc["report"]["splits"].as_u64(), Some(60));
}
