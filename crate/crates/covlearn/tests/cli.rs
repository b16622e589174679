use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("covlearn-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn covlearn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covlearn")).args(args).output().unwrap()
}

/// Writes `config` into `dir` and runs `verb` on it with output under `dir/<out>`.
fn run(dir: &Path, verb: &str, config: &str, out: &str) -> Output {
    let path = dir.join(format!("{out}.json"));
    std::fs::write(&path, config).unwrap();
    covlearn(&[verb, "--config", path.to_str().unwrap(), "--out", dir.join(out).to_str().unwrap()])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const PAC: &str = r#"{"seed": 7, "n": 8, "trials": 3, "eval_samples": 20000,
    "target": {"kind": "random", "max_terms": 6, "max_arity": 4},
    "learner": {"name": "pac", "epsilon": 0.3}}"#;

#[test]
fn generated_datasets_use_the_text_format_and_repeat() {
    let dir = scratch("generate");
    let config = r#"{"seed": 3, "n": 8, "dataset": {"kind": "sample", "size": 50},
        "target": {"kind": "random", "max_terms": 4, "max_arity": 3}}"#;
    let first = run(&dir, "generate", config, "a");
    assert!(first.status.success(), "{}", stderr(&first));
    run(&dir, "generate", config, "b");
    let text = std::fs::read_to_string(dir.join("a/dataset.txt")).unwrap();
    assert_eq!(text.lines().count(), 50);
    assert!(text.lines().all(|l| l.len() == 8 && l.bytes().all(|b| b == b'0' || b == b'1')));
    for file in ["dataset.txt", "target.json"] {
        assert_eq!(std::fs::read(dir.join("a").join(file)).unwrap(), std::fs::read(dir.join("b").join(file)).unwrap());
    }
}

#[test]
fn out_of_range_bias_is_a_schema_error_naming_the_field() {
    let dir = scratch("bias");
    let config = r#"{"n": 2, "distribution": {"kind": "product", "biases": [0.5, 1.5]},
        "target": {"kind": "random", "max_terms": 2, "max_arity": 2}, "learner": {"name": "pac", "epsilon": 0.3}}"#;
    let o = run(&dir, "learn", config, "r");
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bias"), "{}", stderr(&o));
}

#[test]
fn unknown_learner_lists_the_valid_names() {
    let dir = scratch("learner");
    let config = r#"{"n": 4, "target": {"kind": "random", "max_terms": 2, "max_arity": 2},
        "learner": {"name": "perceptron", "epsilon": 0.3}}"#;
    let o = run(&dir, "learn", config, "r");
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("perceptron") && err.contains("pmac") && err.contains("dnf-reduction"), "{err}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(covlearn(&["train"]).status.code(), Some(2));
}

#[test]
fn learn_reports_are_reproducible() {
    let dir = scratch("pac");
    let o = run(&dir, "learn", PAC, "a");
    assert!(o.status.success(), "{}", stderr(&o));
    run(&dir, "learn", PAC, "b");
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.join("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["trials"], 3);
    assert!(report["aggregate"]["success_fraction"].as_f64().unwrap() >= 2.0 / 3.0);
    assert_eq!(report["rows"].as_array().unwrap().len(), 3);
    for file in ["report.json", "report.csv", "hypothesis_0.json"] {
        assert_eq!(std::fs::read(dir.join("a").join(file)).unwrap(), std::fs::read(dir.join("b").join(file)).unwrap(), "{file}");
    }
    assert!(dir.join("a/timings.csv").exists());
}

#[test]
fn undersized_release_is_refused_with_the_gate() {
    let dir = scratch("gate");
    let config = r#"{"n": 8, "dataset": {"kind": "sample", "size": 1000},
        "release": {"variant": "all-marginals", "alpha_bar": 0.25, "epsilon": 1.0, "delta": 0.1}}"#;
    let o = run(&dir, "release", config, "r");
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("1000 rows") && err.contains("at least"), "{err}");
    assert!(!dir.join("r/report.json").exists());
}

#[test]
fn synthetic_datasets_feed_back_into_a_release() {
    let dir = scratch("synthetic");
    let synthetic = r#"{"seed": 11, "n": 4, "dataset": {"kind": "gate_multiple", "multiple": 2.0},
        "release": {"variant": "synthetic", "alpha_bar": 0.3, "epsilon": 1.0, "delta": 0.1}}"#;
    let o = run(&dir, "release", synthetic, "s");
    assert!(o.status.success(), "{}", stderr(&o));
    let emitted = dir.join("s/synthetic_0.txt");
    let text = std::fs::read_to_string(&emitted).unwrap();
    assert!(!text.is_empty() && text.lines().all(|l| l.len() == 4));
    let config = format!(
        r#"{{"n": 4, "dataset": {{"kind": "file", "path": {:?}}},
        "release": {{"variant": "k-way", "k": 1, "alpha_bar": 0.3, "epsilon": 50.0, "delta": 0.1}}}}"#,
        emitted.to_str().unwrap()
    );
    let o = run(&dir, "release", &config, "k");
    assert!(o.status.success(), "{}", stderr(&o));
    let report = std::fs::read_to_string(dir.join("k/report.json")).unwrap();
    assert!(report.contains("\"subject\": \"k-way(k=1)\""), "{report}");
}

#[test]
fn selftest_output_repeats() {
    let first = covlearn(&["selftest"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, covlearn(&["selftest"]).stdout);
    assert!(String::from_utf8_lossy(&first.stdout).contains("0 failed"));
}
