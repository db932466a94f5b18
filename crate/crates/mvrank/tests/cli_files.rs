//! End-to-end tests of the `mvrank` binary: artifact round trips, determinism
//! of the file outputs, and the exit-code contract (0 success, 1 bad
//! input/config, 2 I/O failure).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvrank"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary launches")
}

fn assert_code(out: &Output, want: i32, what: &str) {
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(
        out.status.code(),
        Some(want),
        "{what}: expected exit code {want}, got {:?}\nstderr: {stderr}",
        out.status.code()
    );
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_CONFIG: &str = r#"{
    "n": 40, "m": 20, "n_t": 30, "m_t": 8,
    "lambda_grid": [0.0, 1.0], "epochs": 2,
    "n_lowest_grid": [5, 8], "repetitions": 2, "seed": 3
}"#;

#[test]
fn generate_train_evaluate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();

    let gen = run(&["generate", "--config", &cfg, "--out", &out_s]);
    assert_code(&gen, 0, "generate");
    assert!(out.join("train.csv").is_file());
    assert!(out.join("test.csv").is_file());

    let train = run(&[
        "train",
        "--config",
        &cfg,
        "--data",
        out.join("train.csv").to_str().unwrap(),
        "--out",
        &out_s,
    ]);
    assert_code(&train, 0, "train");
    assert!(out.join("traces.csv").is_file());
    assert!(out.join("model_0.json").is_file());
    assert!(out.join("model_1.json").is_file());

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("selected.json")).unwrap()).unwrap();
    let selected_file = report["selected_file"].as_str().unwrap();
    assert!(out.join(selected_file).is_file());
    assert_eq!(report["models"].as_array().unwrap().len(), 2);

    let eval = run(&[
        "evaluate",
        "--config",
        &cfg,
        "--model",
        out.join(selected_file).to_str().unwrap(),
        "--test",
        out.join("test.csv").to_str().unwrap(),
        "--out",
        &out_s,
    ]);
    assert_code(&eval, 0, "evaluate");
    let accuracy = fs::read_to_string(out.join("accuracy.csv")).unwrap();
    assert!(accuracy.lines().next().unwrap().starts_with("n_lowest"));
    assert_eq!(accuracy.lines().count(), 3, "header plus one row per budget");
    assert!(out.join("ranked.csv").is_file());
}

#[test]
fn generated_files_are_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        assert_code(
            &run(&["generate", "--config", &cfg, "--out", out.to_str().unwrap()]),
            0,
            "generate",
        );
    }
    for file in ["train.csv", "test.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identically seeded runs");
    }

    // A different seed produces different data.
    let out_c = dir.path().join("c");
    assert_code(
        &run(&[
            "generate",
            "--config",
            &cfg,
            "--seed",
            "4",
            "--out",
            out_c.to_str().unwrap(),
        ]),
        0,
        "generate with seed override",
    );
    let a = fs::read(dir.path().join("a/train.csv")).unwrap();
    let c = fs::read(out_c.join("train.csv")).unwrap();
    assert_ne!(a, c, "seed override had no effect on train.csv");
}

#[test]
fn reproduce_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let rep = run(&["reproduce", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_code(&rep, 0, "reproduce");
    }
    for file in ["summary.csv", "repetitions.csv", "mv_curve.csv", "traces.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identically seeded runs");
    }
}

#[test]
fn help_and_usage_errors() {
    assert_code(&run(&["--help"]), 0, "--help");
    assert_code(&run(&["reproduce", "--no-such-flag"]), 1, "unknown flag");
    assert_code(&run(&[]), 1, "missing subcommand");
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = run(&["generate", "--config", "/nonexistent/config.json"]);
    assert_code(&out, 2, "missing config file");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("error:"), "stderr was: {stderr}");
}

#[test]
fn invalid_config_value_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"learning_rate": -0.5}"#);
    let out = run(&["generate", "--config", &cfg]);
    assert_code(&out, 1, "negative learning rate");
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("learning_rate"), "stderr was: {stderr}");

    let unknown = write_config(dir.path(), r#"{"learning_rat": 0.01}"#);
    let out = run(&["generate", "--config", &unknown]);
    assert_code(&out, 1, "misspelled config key");
}

#[test]
fn evaluate_rejects_unlabeled_test_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();
    assert_code(&run(&["generate", "--config", &cfg, "--out", &out_s]), 0, "generate");
    assert_code(
        &run(&[
            "train",
            "--config",
            &cfg,
            "--data",
            out.join("train.csv").to_str().unwrap(),
            "--out",
            &out_s,
        ]),
        0,
        "train",
    );

    let unlabeled = dir.path().join("unlabeled.csv");
    let mut body = String::from("x0,x1\n");
    for i in 0..10 {
        body.push_str(&format!("0.{i},0.{i}\n"));
    }
    fs::write(&unlabeled, body).unwrap();

    let eval = run(&[
        "evaluate",
        "--config",
        &cfg,
        "--model",
        out.join("model_0.json").to_str().unwrap(),
        "--test",
        unlabeled.to_str().unwrap(),
        "--out",
        &out_s,
    ]);
    assert_code(&eval, 1, "unlabeled test file");
    let stderr = String::from_utf8_lossy(&eval.stderr);
    assert!(stderr.contains("label"), "stderr was: {stderr}");
}

#[test]
fn malformed_csv_reports_the_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_CONFIG);
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();
    assert_code(&run(&["generate", "--config", &cfg, "--out", &out_s]), 0, "generate");

    let train_csv = out.join("train.csv");
    let mut lines: Vec<String> =
        fs::read_to_string(&train_csv).unwrap().lines().map(String::from).collect();
    lines[2] = "oops,0.1,1".into();
    fs::write(&train_csv, lines.join("\n")).unwrap();

    let train = run(&[
        "train",
        "--config",
        &cfg,
        "--data",
        train_csv.to_str().unwrap(),
        "--out",
        &out_s,
    ]);
    assert_code(&train, 1, "malformed train.csv");
    let stderr = String::from_utf8_lossy(&train.stderr);
    assert!(
        stderr.contains("line 3"),
        "expected the line number in the parse error, stderr was: {stderr}"
    );
}
