//! End-to-end checks of the command-line interface against the built
//! binary: exit codes, file outputs, and determinism across reruns.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mpns::model::DecompModel;
use mpns::trainer::TrainHistory;

fn mpns_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpns"))
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn mpns");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr),
    );
    out
}

fn run_err(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn mpns");
    assert!(!out.status.success(), "command unexpectedly succeeded");
    out
}

fn gen_dataset(path: &Path, s: &str, n: &str, seed: &str) {
    run_ok(mpns_bin().args([
        "gen", "--s", s, "--n", n, "--seed", seed, "--out",
        path.to_str().unwrap(),
    ]));
}

#[test]
fn gen_writes_requested_samples_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ndjson");
    let b = dir.path().join("b.ndjson");
    gen_dataset(&a, "0.3", "50", "7");
    gen_dataset(&b, "0.3", "50", "7");
    let bytes_a = fs::read(&a).unwrap();
    assert_eq!(bytes_a.iter().filter(|&&c| c == b'\n').count(), 50);
    assert_eq!(bytes_a, fs::read(&b).unwrap(), "same config must give identical files");
}

#[test]
fn gen_rejects_out_of_range_mixing_degree() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_err(mpns_bin().args([
        "gen", "--s", "1.5", "--n", "10", "--seed", "1", "--out",
        dir.path().join("x.ndjson").to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn train_produces_loadable_model_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.ndjson");
    gen_dataset(&data, "0.1", "128", "3");
    let model_path = dir.path().join("model.json");
    let history_path = dir.path().join("history.json");
    let out = run_ok(mpns_bin().args([
        "train",
        "--mode", "mpns",
        "--data", data.to_str().unwrap(),
        "--seed", "5",
        "--epochs", "1",
        "--batch-size", "32",
        "--out-model", model_path.to_str().unwrap(),
        "--out-history", history_path.to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stdout).contains("accuracy"));
    DecompModel::load(&model_path).expect("checkpoint loads");
    let history = TrainHistory::load(&history_path).expect("history loads");
    assert!(!history.records.is_empty());
}

#[test]
fn train_rejects_unknown_mode() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("train.ndjson");
    gen_dataset(&data, "0.1", "64", "3");
    let out = run_err(mpns_bin().args([
        "train",
        "--mode", "bogus",
        "--data", data.to_str().unwrap(),
        "--seed", "5",
        "--out-model", dir.path().join("m.json").to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

fn tiny_experiment_config() -> &'static str {
    r#"{
        "s_values": [0.0, 0.5],
        "seeds": [1],
        "n_train": 96,
        "n_test": 48,
        "train": {
            "epochs": 1, "batch_size": 32, "learning_rate": 0.001,
            "seed": 0, "mode": "mpns", "log_every": 50, "shuffle": true,
            "loss": {
                "theta": 0.01, "lambda_r": 1.0, "lambda_cr": 1.0,
                "lambda_constr": 1.0, "mode": "mpns"
            }
        }
    }"#
}

#[test]
fn experiment_writes_results_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, tiny_experiment_config()).unwrap();
    let out_dir = dir.path().join("run");
    run_ok(mpns_bin().args([
        "experiment",
        "--config", config.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
    ]));
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    assert!(csv.starts_with("mode,s,seed,modality,variable,dcor,accuracy"));
    // 3 modes x 2 s x 1 seed x 8 variable rows, plus the header.
    assert_eq!(csv.trim().lines().count(), 1 + 48);
    assert!(out_dir.join("summary.txt").exists());
    assert!(out_dir.join("cells").join("net_s0.00_seed1.json").exists());

    let resumed = run_ok(mpns_bin().args([
        "experiment",
        "--config", config.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
        "--resume",
    ]));
    let progress = String::from_utf8_lossy(&resumed.stderr);
    assert!(progress.contains("reused"), "resume should reuse cells: {progress}");
}

#[test]
fn experiment_rejects_invalid_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, r#"{"s_values": []}"#).unwrap();
    let out = run_err(mpns_bin().args([
        "experiment",
        "--config", config.to_str().unwrap(),
        "--out", dir.path().join("run").to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn report_renders_text_and_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    fs::write(&config, tiny_experiment_config()).unwrap();
    let out_dir = dir.path().join("run");
    run_ok(mpns_bin().args([
        "experiment",
        "--config", config.to_str().unwrap(),
        "--out", out_dir.to_str().unwrap(),
    ]));
    let table = out_dir.join("results.csv");
    let txt = dir.path().join("report.txt");
    let md = dir.path().join("report.md");
    run_ok(mpns_bin().args([
        "report", "--table", table.to_str().unwrap(), "--out", txt.to_str().unwrap(),
    ]));
    run_ok(mpns_bin().args([
        "report", "--table", table.to_str().unwrap(), "--out", md.to_str().unwrap(),
    ]));
    let text = fs::read_to_string(&txt).unwrap();
    assert!(text.contains("mode: net"));
    let markdown = fs::read_to_string(&md).unwrap();
    assert!(markdown.contains("## mode: net"));
    assert!(markdown.contains("| s |"));
}

#[test]
fn report_fails_on_missing_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_err(mpns_bin().args([
        "report",
        "--table", dir.path().join("nope.csv").to_str().unwrap(),
        "--out", dir.path().join("r.txt").to_str().unwrap(),
    ]));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn unknown_subcommand_exits_with_usage_error() {
    let out = run_err(mpns_bin().arg("frobnicate"));
    assert_eq!(out.status.code(), Some(2), "clap usage errors exit with 2");
}
