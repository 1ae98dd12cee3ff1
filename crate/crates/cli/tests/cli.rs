use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_ergm-hope"));
    c.env_remove("HOPE_DATA_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Ten nodes in two groups, denser within groups.
fn write_grouped(dir: &Path) {
    let edges = "# nodes: 10\n0 1\n0 2\n1 2\n3 4\n1 3\n5 6\n6 7\n7 8\n5 8\n8 9\n4 9\n2 7\n";
    fs::write(dir.join("edges.txt"), edges).unwrap();
    let mut attrs = String::from("group\n");
    for v in 0..10 {
        attrs.push_str(if v < 5 { "1\n" } else { "2\n" });
    }
    fs::write(dir.join("attributes.csv"), attrs).unwrap();
}

#[test]
fn fit_edges_matches_logit_density() {
    let t = TempDir::new().unwrap();
    write_grouped(t.path());
    let out = t.path().join("fit");
    let o = run(&[
        "fit",
        t.path().to_str().unwrap(),
        "--model",
        "edges",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&out.join("fit.json"));
    let p: f64 = 12.0 / 45.0;
    let theta = v["fit"]["coefficients"][0]["estimate"].as_f64().unwrap();
    assert!((theta - (p / (1.0 - p)).ln()).abs() < 1e-8);
    let ll = 12.0 * p.ln() + 33.0 * (1.0 - p).ln();
    assert!((v["fit"]["aic"].as_f64().unwrap() - (-2.0 * ll + 2.0)).abs() < 1e-8);
    assert_eq!(v["seed"], 1);
    assert_eq!(v["config"]["models"][0], "edges");
    assert!(fs::read_to_string(out.join("fit.txt")).unwrap().contains("AIC"));
}

#[test]
fn fit_on_empty_graph_reports_boundary() {
    let t = TempDir::new().unwrap();
    let e = t.path().join("e.txt");
    fs::write(&e, "# nodes: 6\n").unwrap();
    let o = run(&["fit", "--edges", e.to_str().unwrap(), "--model", "edges"]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("boundary"));
}

#[test]
fn simulate_uniform_graphs() {
    let t = TempDir::new().unwrap();
    let e = t.path().join("e.txt");
    fs::write(&e, "# nodes: 4\n0 1\n").unwrap();
    let out = t.path().join("sim");
    let o = run(&[
        "simulate",
        "--edges",
        e.to_str().unwrap(),
        "--model",
        "edges",
        "--theta",
        "0",
        "--draws",
        "1000",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v = json(&out.join("simulate.json"));
    let mean = v["mean"][0].as_f64().unwrap();
    assert!((mean - 3.0).abs() < 0.15, "mean edges {mean}");
    assert_eq!(fs::read_dir(out.join("draws")).unwrap().count(), 1000);
    let stats = fs::read_to_string(out.join("stats.csv")).unwrap();
    assert_eq!(stats.lines().count(), 1001);
    let first = fs::read_to_string(out.join("draws/draw_00001.txt")).unwrap();
    assert!(first.contains("# config:"));
}

#[test]
fn simulate_with_empty_free_set_is_usage_error() {
    let t = TempDir::new().unwrap();
    let e = t.path().join("e.txt");
    fs::write(&e, "# nodes: 4\n0 1\n").unwrap();
    let o = run(&[
        "simulate",
        "--edges",
        e.to_str().unwrap(),
        "--model",
        "edges",
        "--theta",
        "0",
        "--free",
        "none",
    ]);
    assert_eq!(code(&o), 1);
}

#[test]
fn missing_dataset_is_reported() {
    let t = TempDir::new().unwrap();
    let dir = t.path().to_str().unwrap();
    for args in [
        vec!["verify-dataset", "lazega", "--data-dir", dir],
        vec!["hope", "teenage", "--check-fixtures", "--model", "m1", "--data-dir", dir],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 2);
        assert!(stderr(&o).contains("not installed"), "{}", stderr(&o));
    }
}

#[test]
fn verify_dataset_fails_on_wrong_graph() {
    let t = TempDir::new().unwrap();
    let d = t.path().join("lazega");
    fs::create_dir(&d).unwrap();
    let edges: String = (0..35).map(|v| format!("{v} {}\n", v + 1)).collect();
    fs::write(d.join("edges.txt"), format!("# nodes: 36\n{edges}")).unwrap();
    fs::write(d.join("attributes.csv"), format!("Seniority\n{}", "1\n".repeat(36))).unwrap();
    let o = run(&["verify-dataset", "lazega", "--data-dir", t.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    let table = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(table.contains("Number of edges"));
    assert!(table.contains("FAIL"));
    assert!(stderr(&o).contains("Number of edges"));
}

fn hope_args<'a>(dir: &'a str, out: &'a str, workers: &'a str) -> Vec<&'a str> {
    vec![
        "hope",
        dir,
        "--model",
        "edges",
        "--model",
        "edges + nodematch(\"group\")",
        "--strategy",
        "loo",
        "--strategy",
        "lmo",
        "--strategy",
        "node",
        "--folds",
        "5",
        "--draws",
        "40",
        "--seed",
        "9",
        "--workers",
        workers,
        "--out",
        out,
    ]
}

#[test]
fn hope_writes_tables_and_reproduces() {
    let t = TempDir::new().unwrap();
    write_grouped(t.path());
    let dir = t.path().to_str().unwrap();
    let a = t.path().join("a");
    let o = run(&hope_args(dir, a.to_str().unwrap(), "1"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let csv = fs::read_to_string(a.join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[0].starts_with("schema_version,model,aic,bic,type,"));
    let plot = fs::read_to_string(a.join("plot.csv")).unwrap();
    assert!(plot.starts_with("model,type,fold,metric,value"));
    let report = json(&a.join("report.json"));
    assert_eq!(report["reports"].as_array().unwrap().len(), 3);
    assert_eq!(report["config"]["seed"], 9);

    // more workers, same numbers
    let b = t.path().join("b");
    let o = run(&hope_args(dir, b.to_str().unwrap(), "3"));
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv, fs::read_to_string(b.join("metrics.csv")).unwrap());
    assert_eq!(plot, fs::read_to_string(b.join("plot.csv")).unwrap());

    // the emitted config alone reproduces the run
    let c = t.path().join("c");
    let o = run(&[
        "hope",
        "--config",
        a.join("run_config.json").to_str().unwrap(),
        "--out",
        c.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(csv, fs::read_to_string(c.join("metrics.csv")).unwrap());
}

#[test]
fn partition_prints_plans() {
    let o = run(&["partition", "--nodes", "6", "--strategy", "lmo", "--folds", "4", "--seed", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let folds = v["plans"][0]["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 4);
    let total: usize = folds.iter().map(|f| f.as_array().unwrap().len()).sum();
    assert_eq!(total, 15);
}

#[test]
fn bad_flags_are_usage_errors() {
    assert_eq!(code(&run(&["fit", "--bogus"])), 1);
    assert_eq!(code(&run(&["partition", "--nodes", "5", "--strategy", "kfold"])), 1);
    assert_eq!(code(&run(&["fit", "--edges", "x.txt", "--model", "edges", "--index-base", "2"])), 1);
    assert_eq!(code(&run(&["fit", "--edges", "/nonexistent/e.txt", "--model", "edges"])), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}
