use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ewishart::estimation::wishart_closed_form;
use ewishart::experiments::io::{parse_matrix, read_sample_set};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ewishart"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SMALL: &str = r#"
[problem]
p = 3
n = 6
K = 40
nu = 5.0

[experiment]
repetitions = 2
seed = 7

[fit]
tolerance = 1e-10
"#;

#[test]
fn fit_reproduces_wishart_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SMALL.replace("nu = 5.0", "nu = 5.0\ngenerator = \"wishart\"");
    fs::write(dir.path().join("c.toml"), cfg).unwrap();
    ok(&run(dir.path(), &["--config", "c.toml", "--out", "data", "sample"]));
    for alg in ["fp", "rcg"] {
        let out_dir = format!("fit_{alg}");
        ok(&run(
            dir.path(),
            &["--config", "c.toml", "--algorithm", alg, "--out", &out_dir, "fit", "--input", "data/samples.csv"],
        ));
        let file = read_sample_set(&dir.path().join("data/samples.csv")).unwrap();
        let expected = wishart_closed_form(&file.samples, file.n).unwrap();
        let got = parse_matrix(&fs::read_to_string(dir.path().join(&out_dir).join("estimate.csv")).unwrap()).unwrap();
        let gap = (&got - expected.as_matrix()).norm() / expected.as_matrix().norm();
        assert!(gap < 1e-9, "{alg}: relative gap {gap:e}");
        let report: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(&out_dir).join("report.json")).unwrap()).unwrap();
        assert_eq!(report["converged"], true);
        assert!(dir.path().join(&out_dir).join("config.toml").exists());
    }
}

#[test]
fn bench_convergence_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    ok(&run(dir.path(), &["--config", "c.toml", "--out", "bench", "bench-convergence"]));
    let bench = dir.path().join("bench");
    for rep in 0..2 {
        for alg in ["fp", "rcg"] {
            let trace = fs::read_to_string(bench.join(format!("traces/trace_n6_rep{rep}_{alg}.csv"))).unwrap();
            assert!(trace.starts_with("iteration,cost,error,time"));
            assert!(trace.lines().count() > 1);
        }
    }
    let records = fs::read_to_string(bench.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 1 + 4);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(bench.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["estimators"].as_array().unwrap().len(), 2);
}

#[test]
fn clustering_is_reproducible_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.toml"), SMALL).unwrap();
    ok(&run(dir.path(), &["--config", "c.toml", "--out", "data", "sample", "--classes", "2"]));
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        ok(&run(dir.path(), &["--config", "c.toml", "--seed", "3", "--out", name, "cluster", "--input", "data/samples.csv"]));
        outputs.push(fs::read(dir.path().join(name).join("labels.csv")).unwrap());
        let metrics: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(name).join("metrics.json")).unwrap()).unwrap();
        assert!(metrics.to_string().contains("accuracy"));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn malformed_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.toml"), "[problem]\np = \"ten\"\n").unwrap();
    let out = run(dir.path(), &["--config", "bad.toml", "check-model"]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(dir.path().join("unknown.toml"), "[problem]\nq = 3\n").unwrap();
    let out = run(dir.path(), &["--config", "unknown.toml", "check-model"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["--out", "o", "fit", "--input", "nowhere.csv"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere.csv"));
}
