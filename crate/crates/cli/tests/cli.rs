use std::fs;
use std::path::Path;
use std::process::Command;

use propeval_cli::cli_dispatch;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_propeval"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = bin().args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn dataset(dir: &Path) -> String {
    let p = dir.join("g24.jsonl");
    fs::write(
        &p,
        "{\"id\":\"a\",\"numbers\":[4,9,10,13]}\n{\"id\":\"b\",\"numbers\":[1,2,3,4]}\n{\"id\":\"c\",\"numbers\":[3,3,8,8]}\n",
    )
    .unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_version_and_usage_errors() {
    assert_eq!(cli_dispatch(["propeval", "--help"]), 0);
    assert_eq!(cli_dispatch(["propeval", "--version"]), 0);
    assert_eq!(cli_dispatch(["propeval", "nope"]), 2);
    assert_eq!(cli_dispatch(["propeval", "cost", "--bogus"]), 2);
    assert_eq!(cli_dispatch(["propeval", "gen24", "--max-value", "0"]), 2);
}

#[test]
fn cost_preset_table() {
    let (code, out, _) = run(&["cost", "--preset", "paper-appendix-a", "--format", "csv"]);
    assert_eq!(code, 0);
    assert!(out.starts_with("metric,dlm,llm_kv_cache,llm_no_cache\n"));
    assert!(out.contains("D,E,H,N,V,4096 4096 32 32 126464"));
    assert!(out.contains("regime,"));
    let (code, _, err) = run(&["cost", "--model-dim", "64"]);
    assert_eq!(code, 2, "{err}");
    let (code, out, _) = run(&[
        "cost", "--model-dim", "64", "--embed-dim", "64", "--heads", "4", "--blocks", "2", "--vocab", "100",
        "--len-in", "8", "--len-out", "8", "--beta", "0.5", "--samples", "4",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("dlm_parallel_latency_order"));
}

#[test]
fn gen24_small_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let (code, _, err) = run(&["gen24", "--max-value", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), "");
    assert!(err.contains("0 canonical solutions"), "{err}");

    let (code, stdout, _) = run(&["gen24", "--max-value", "4"]);
    assert_eq!(code, 0);
    assert!(stdout.lines().count() > 0);
    assert!(stdout.lines().all(|l| l.contains("\"canonical_key\"")));
}

#[test]
fn bound_tools() {
    let (code, out, _) = run(&["bound", "fano", "--entropy", "1", "--alphabet", "2"]);
    assert_eq!(code, 0);
    assert!(out.contains("E_min = 0.5000000000"), "{out}");
    assert_eq!(run(&["bound", "fano", "--entropy", "1.5", "--alphabet", "2"]).0, 2);
    let (_, out, _) = run(&["bound", "gap", "--dims", "2,2", "--probs", "0.5,0,0,0.5"]);
    assert_eq!(out.trim(), "1.000000000000");
    let (_, out, _) = run(&["bound", "entropy", "--probs", "0.25,0.25,0.25,0.25"]);
    assert_eq!(out.trim(), "2.000000000000");
    let (code, out, _) = run(&["bound", "sweep", "--max-positions", "2", "--samples", "10"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 3);
}

#[test]
fn run_report_and_missing_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let outdir = dir.path().join("out");
    let (code, _, err) = run(&["run", "--task", "game24", "--dataset", "/definitely/missing.jsonl"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(run(&["run"]).0, 2);

    let (code, out, err) = run(&[
        "run", "--task", "game24", "--dataset", &data, "--out", outdir.to_str().unwrap(), "-m", "5", "--seed", "3",
    ]);
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("accuracy,1.000000"), "{out}");
    let transcripts = outdir.join("transcripts.jsonl");
    let (code, out, _) = run(&["report", "--transcripts", transcripts.to_str().unwrap(), "--task", "game24", "--dataset", &data]);
    assert_eq!(code, 0);
    assert!(out.contains("solved 3"), "{out}");
    assert!(out.contains("accuracy 1.000000"));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        format!(
            "task = \"game24\"\ndataset = \"{data}\"\noutput_dir = \"{}\"\n[engine]\nproposals_per_step = 2\n[proposer]\nbackend = \"mock\"\np_correct = 0.5\n",
            dir.path().join("o").display()
        ),
    )
    .unwrap();
    let (code, out, err) = run(&["scaling", "--config", cfg.to_str().unwrap(), "--m-min", "1", "--m-max", "3"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 4);
    assert!(dir.path().join("o/manifest.json").is_file());
    assert_eq!(run(&["run", "--config", "/no/such.toml"]).0, 2);
}

#[test]
fn verify_answers_cli() {
    let dir = tempfile::tempdir().unwrap();
    let data = dataset(dir.path());
    let answers = dir.path().join("a.jsonl");
    fs::write(&answers, "{\"id\":\"a\",\"answer\":\"13-9=4 (4,10,4); 10-4=6 (4,6); 4*6=24 (24)\"}\n").unwrap();
    let (code, out, _) = run(&["verify", "--task", "game24", "--instances", &data, "--answers", answers.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().count(), 4);
    assert!(out.ends_with("accuracy 1/3 = 0.333333\n"), "{out}");
}
