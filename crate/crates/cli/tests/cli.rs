//! Black-box tests of the `tle` binary: exit codes, determinism of the
//! generator, the uniform-attention report and the scriptable pipeline.

use std::path::Path;
use std::process::{Command, Output};

fn tle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tle"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn assert_code(output: &Output, expected: i32) {
    let code = output.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        expected,
        "stdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn gen(dir: &Path, extra: &[&str]) {
    let dir_s = dir.to_str().unwrap();
    let mut args = vec!["gen-synthetic", "--out", dir_s];
    args.extend_from_slice(extra);
    assert_code(&tle(&args), 0);
}

#[test]
fn train_without_corpus_is_a_usage_error() {
    let out = tle(&["train", "--out", "/tmp/nowhere"]);
    assert_code(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--corpus"), "{stderr}");
    assert!(stderr.to_lowercase().contains("usage"), "{stderr}");
}

#[test]
fn unknown_flags_are_rejected() {
    let out = tle(&["train", "--corpus", "x", "--out", "y", "--frobnicate"]);
    assert_code(&out, 1);
}

#[test]
fn missing_corpus_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = tle(&[
        "train",
        "--corpus",
        "/definitely/not/here.tsv",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_code(&out, 2);
}

#[test]
fn numerical_blowup_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), &["--users", "4", "--tweets-per-user", "10"]);
    let run = dir.path().join("run");
    let out = tle(&[
        "train",
        "--corpus",
        dir.path().join("corpus.tsv").to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--dim",
        "8",
        "--cw",
        "2",
        "--epochs",
        "1",
        "--lr",
        "1e200",
    ]);
    assert_code(&out, 3);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("non-finite"), "{stderr}");
}

#[test]
fn gen_synthetic_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        gen(dir.path(), &["--seed", "7"]);
    }
    let read = |dir: &tempfile::TempDir, name: &str| {
        std::fs::read_to_string(dir.path().join(name)).unwrap()
    };
    assert_eq!(read(&a, "corpus.tsv"), read(&b, "corpus.tsv"));
    assert_eq!(read(&a, "labels.tsv"), read(&b, "labels.tsv"));
    assert!(!read(&a, "corpus.tsv").is_empty());
}

#[test]
fn every_run_echoes_config_and_hash() {
    let dir = tempfile::tempdir().unwrap();
    let out = tle(&[
        "gen-synthetic",
        "--out",
        dir.path().to_str().unwrap(),
        "--users",
        "3",
        "--tweets-per-user",
        "6",
    ]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let first = stdout.lines().next().expect("echo line");
    let echo: serde_json::Value = serde_json::from_str(first).expect("valid JSON echo");
    assert_eq!(echo["command"], "gen-synthetic");
    assert!(echo["config_hash"].as_str().unwrap().len() == 16);
    assert_eq!(echo["config"]["users"], 3);
}

#[test]
fn uniform_attention_reports_quarter_means() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        &["--users", "6", "--tweets-per-user", "12", "--seed", "3"],
    );
    let run = dir.path().join("run");
    let out = tle(&[
        "train",
        "--corpus",
        dir.path().join("corpus.tsv").to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--dim",
        "8",
        "--cw",
        "2",
        "--ct",
        "2",
        "--epochs",
        "2",
        "--attention",
        "uniform",
    ]);
    assert_code(&out, 0);

    let report = tle(&["report-attention", "--run", run.to_str().unwrap()]);
    assert_code(&report, 0);
    let stdout = String::from_utf8_lossy(&report.stdout);
    let mut data_rows = 0;
    for line in stdout.lines().skip(2) {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 6, "row {line}");
        let full_mean: f64 = fields[4].parse().unwrap();
        assert_eq!(full_mean, 0.25, "full-context mean in {line}");
        data_rows += 1;
    }
    assert_eq!(data_rows, 2 * 2 * 2);
}

#[test]
fn pipeline_runs_end_to_end_on_the_default_spec() {
    let started = std::time::Instant::now();
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), &["--seed", "11"]);
    let corpus = dir.path().join("corpus.tsv");
    let labels = dir.path().join("labels.tsv");
    let run = dir.path().join("run");

    let train = tle(&[
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--dim",
        "32",
        "--cw",
        "3",
        "--ct",
        "2",
        "--epochs",
        "3",
        "--lr",
        "0.01",
        "--seed",
        "11",
        "--deterministic",
    ]);
    assert_code(&train, 0);
    for artifact in [
        "checkpoint.tle",
        "loss_curve.csv",
        "attention.csv",
        "attention_full_context.csv",
        "config.json",
    ] {
        assert!(run.join(artifact).exists(), "missing {artifact}");
    }

    let results_path = dir.path().join("results.json");
    let eval = tle(&[
        "eval",
        "--corpus",
        corpus.to_str().unwrap(),
        "--labels",
        labels.to_str().unwrap(),
        "--model",
        run.join("checkpoint.tle").to_str().unwrap(),
        "--out",
        results_path.to_str().unwrap(),
        "--seed",
        "11",
    ]);
    assert_code(&eval, 0);
    let results: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&results_path).unwrap()).unwrap();
    assert!(results["test_f1"].as_f64().unwrap() >= 0.0);
    assert!(PENALTIES.contains(&results["penalty"].as_f64().unwrap()));

    let report = tle(&["report-attention", "--run", run.to_str().unwrap()]);
    assert_code(&report, 0);

    let vectors = dir.path().join("tweets.vec");
    let export = tle(&[
        "export",
        "--model",
        run.join("checkpoint.tle").to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--which",
        "tweets",
        "--out",
        vectors.to_str().unwrap(),
    ]);
    assert_code(&export, 0);
    let text = std::fs::read_to_string(&vectors).unwrap();
    assert_eq!(text.lines().count(), 20 * 50 + 1);
    assert!(text.starts_with("1000 32\n"));

    assert!(
        started.elapsed().as_secs() < 300,
        "pipeline took {:?}",
        started.elapsed()
    );
}

const PENALTIES: [f64; 6] = [0.001, 0.01, 0.1, 1.0, 10.0, 100.0];

#[test]
fn pretrained_word_vectors_feed_initialization() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        &[
            "--users",
            "4",
            "--tweets-per-user",
            "8",
            "--words-per-topic",
            "5",
        ],
    );
    // Vectors for two of the generated tokens, wrong-dim words are absent.
    let vecs = dir.path().join("pretrained.vec");
    let mut lines = String::from("2 8\n");
    for word in ["t0w0", "t1w1"] {
        lines.push_str(word);
        lines.push_str(" 0.1 0.2 0.3 0.4 -0.1 -0.2 -0.3 -0.4\n");
    }
    std::fs::write(&vecs, lines).unwrap();

    let run = dir.path().join("run");
    let out = tle(&[
        "train",
        "--corpus",
        dir.path().join("corpus.tsv").to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--dim",
        "8",
        "--cw",
        "2",
        "--epochs",
        "1",
        "--pretrained-words",
        vecs.to_str().unwrap(),
    ]);
    assert_code(&out, 0);

    // Mismatched dimension aborts with a data error.
    let bad = tle(&[
        "train",
        "--corpus",
        dir.path().join("corpus.tsv").to_str().unwrap(),
        "--out",
        run.to_str().unwrap(),
        "--dim",
        "16",
        "--cw",
        "2",
        "--epochs",
        "1",
        "--pretrained-words",
        vecs.to_str().unwrap(),
    ]);
    assert_code(&bad, 2);
}

#[test]
fn help_pins_reference_defaults() {
    let out = tle(&["train", "--help"]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[default: 200]"), "{stdout}");
    assert!(stdout.contains("[default: 10]"), "{stdout}");
    assert!(
        stdout.contains("{1, 2, 4, 6, 8, 10, 12, 14, 16}"),
        "{stdout}"
    );
}
