//! End-to-end runs of the `langevin` binary: argument plumbing, file
//! placement, JSON-lines shape, and exit codes. Numeric depth lives in the
//! core crate's suites; these tests pin the interface contract.

use std::path::Path;
use std::process::{Command, Output};

fn langevin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langevin"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    let line = text.lines().next().expect("one report line");
    serde_json::from_str(line).expect("report line parses as JSON")
}

#[test]
fn tune_emits_a_self_describing_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let out = langevin(
        &[
            "tune", "--rule", "ula-convex", "--eps", "0.1", "--dim", "10", "--l", "1",
            "--w0-sq", "1", "--out", "reports",
        ],
        dir.path(),
    );
    let v = stdout_json(&out);
    assert_eq!(v["rule"], "ula-convex");
    assert_eq!(v["outputs"]["gamma_eps"], 0.005);
    assert_eq!(v["outputs"]["n_eps"], 2000.0);
    assert_eq!(v["inputs"]["epsilon"], 0.1);
    assert_eq!(v["inputs"]["constants"]["dim"], 10);
    assert_eq!(v["valid"], true);

    let logged = std::fs::read_to_string(dir.path().join("reports/reports.jsonl")).unwrap();
    assert_eq!(logged.lines().count(), 1);
    let relogged: serde_json::Value = serde_json::from_str(logged.lines().next().unwrap()).unwrap();
    assert_eq!(relogged, v);
}

#[test]
fn constants_file_seeds_the_flags_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "dim = 10\nl = 1.0\nw0_sq = 1.0\n").unwrap();

    let out = langevin(
        &["tune", "--rule", "ula-convex", "--eps", "0.1", "--constants", "c.toml"],
        dir.path(),
    );
    let v = stdout_json(&out);
    assert_eq!(v["outputs"]["gamma_eps"], 0.005);
    assert_eq!(v["outputs"]["n_eps"], 2000.0);

    // doubling d through the flag halves γ_ε and doubles n_ε
    let out = langevin(
        &["tune", "--rule", "ula-convex", "--eps", "0.1", "--constants", "c.toml", "--dim", "20"],
        dir.path(),
    );
    let v = stdout_json(&out);
    assert_eq!(v["outputs"]["gamma_eps"], 0.0025);
    assert_eq!(v["outputs"]["n_eps"], 4000.0);
}

#[test]
fn unknown_rule_is_a_clean_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = langevin(&["tune", "--rule", "ula-quadratic", "--eps", "0.1"], dir.path());
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown tuning rule"), "stderr: {err}");
}

#[test]
fn bound_reports_the_three_stationary_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = langevin(
        &[
            "bound", "--theorem", "step-bias", "--horizon", "1", "--gamma1", "0.1", "--dim",
            "1", "--l", "1", "--m", "1",
        ],
        dir.path(),
    );
    let v = stdout_json(&out);
    assert_eq!(v["outputs"]["kl_bound"], 0.1);
    assert_eq!(v["outputs"]["w2sq_bound"], 0.2);
    let tv = v["outputs"]["tv_bound"].as_f64().unwrap();
    assert!((tv - 0.2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn bound_consumes_a_measured_variance_series() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("ups.txt"), "1.5\n1.4\n\n1.3\n1.2\n1.1\n").unwrap();
    let out = langevin(
        &[
            "bound", "--theorem", "ssgld-averaged-kl", "--horizon", "5", "--gamma1", "0.05",
            "--dim", "2", "--m-lip", "2", "--w0-sq", "1", "--variance-series", "ups.txt",
        ],
        dir.path(),
    );
    let v = stdout_json(&out);
    assert!(v["outputs"]["bound"].as_f64().unwrap() > 0.0);
    assert_eq!(v["inputs"]["variance"]["series_len"], 5);

    // a horizon longer than the series is an error, not a silent truncation
    let out = langevin(
        &[
            "bound", "--theorem", "ssgld-averaged-kl", "--horizon", "9", "--gamma1", "0.05",
            "--dim", "2", "--m-lip", "2", "--w0-sq", "1", "--variance-series", "ups.txt",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("too short"));
}

#[test]
fn validate_writes_one_csv_per_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = langevin(&["validate", "--out", "v"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let dir_v = dir.path().join("v/validate");
    let mut cases: Vec<_> = std::fs::read_dir(&dir_v)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    cases.sort();
    assert_eq!(cases.len(), 9, "cases: {cases:?}");

    let text = std::fs::read_to_string(dir_v.join(&cases[0])).unwrap();
    assert!(text.starts_with("gamma,k,w2_exact,w2_bound,kl_exact,kl_bound,margin\n"));
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn sample_writes_estimates_and_thinned_trace() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        r#"
[target]
kind = "quadratic"
dim = 2
h = 1.0

[schedule]
kind = "constant"
gamma1 = 0.1

[run]
sampler = "ula"
iterations = 5000
burn_in = 500
seed = 42
thin = 1000
"#,
    )
    .unwrap();
    let out = langevin(&["sample", "--config", "run.toml", "--out", "s"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let estimates = std::fs::read_to_string(dir.path().join("s/estimates.csv")).unwrap();
    assert!(estimates.starts_with("functional,estimate,weight_total,effective_passes\n"));
    let mean_square: f64 = estimates
        .lines()
        .find(|l| l.starts_with("mean_square,"))
        .and_then(|l| l.split(',').nth(1))
        .unwrap()
        .parse()
        .unwrap();
    // stationary per-coordinate variance at γ = 0.1 is 2/1.9
    assert!((mean_square - 2.0 / 1.9).abs() < 0.2, "mean_square = {mean_square}");

    let trace = std::fs::read_to_string(dir.path().join("s/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next().unwrap(), "k,x_1,x_2");
    assert_eq!(lines.count(), 5, "iterates 1000, 2000, ..., 5000");
}

#[test]
fn benchmark_completes_and_its_tables_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bench.toml"),
        r#"
[dataset]
synthetic = { seed = 7, n = 30, d = 2 }

[experiment]
prior = "p12"
samplers = ["spgld"]
taus = [1.0]
batch_divisors = [1, 10]
replications = 2
iterations = 1000
burn_in = 50
seed = 1

[reference]
budget = 100000
seed = 9
"#,
    )
    .unwrap();

    let out = langevin(&["benchmark", "--config", "bench.toml", "--out", "b"], dir.path());
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    for file in ["cells.csv", "curves.csv", "aggregate.csv", "findings.json", "meta.json"] {
        assert!(dir.path().join("b").join(file).is_file(), "missing {file}");
    }
    let findings: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("b/findings.json")).unwrap())
            .unwrap();
    assert!(findings["findings"].is_array());

    // same config + seed, cached reference: byte-identical tables
    let cells = std::fs::read(dir.path().join("b/cells.csv")).unwrap();
    let aggregate = std::fs::read(dir.path().join("b/aggregate.csv")).unwrap();
    let out = langevin(&["benchmark", "--config", "bench.toml", "--out", "b"], dir.path());
    assert!(out.status.success());
    assert_eq!(cells, std::fs::read(dir.path().join("b/cells.csv")).unwrap());
    assert_eq!(aggregate, std::fs::read(dir.path().join("b/aggregate.csv")).unwrap());
}
