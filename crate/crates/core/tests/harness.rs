use std::fs;
use std::io::Cursor;
use std::path::Path;

use propeval_core::engine::{run_task, EngineConfig, MockProposer, OracleEvaluator, LatencyModel};
use propeval_core::harness::{
    load_tasks, read_transcripts, run_experiment, run_scaling, verify_answers, write_transcripts,
    HarnessConfig, HarnessError, RunManifest,
};
use propeval_core::tasks::{LoadMode, TaskKind};

const QUADS: &[[i64; 4]] = &[
    [4, 9, 10, 13],
    [1, 1, 4, 6],
    [1, 2, 3, 4],
    [2, 3, 4, 5],
    [3, 3, 8, 8],
    [1, 5, 5, 5],
    [6, 6, 6, 6],
    [2, 2, 2, 3],
    [1, 3, 4, 6],
    [5, 5, 5, 1],
];

fn write_game24(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("g24.jsonl");
    let body: String = QUADS
        .iter()
        .enumerate()
        .map(|(i, q)| format!("{{\"id\":\"q{i}\",\"numbers\":[{},{},{},{}]}}\n", q[0], q[1], q[2], q[3]))
        .collect();
    fs::write(&path, body).unwrap();
    path
}

fn config(dir: &Path) -> HarnessConfig {
    let mut cfg = HarnessConfig::new(TaskKind::Game24);
    cfg.dataset = Some(write_game24(dir));
    cfg.output_dir = dir.join("out");
    cfg.workers = 2;
    cfg
}

fn sample_runs() -> Vec<propeval_core::engine::ReasoningRun> {
    let dir = tempfile::tempdir().unwrap();
    let tasks = load_tasks(&config(dir.path())).unwrap();
    let p = MockProposer::new(0.6);
    let e = OracleEvaluator { latency: LatencyModel::fixed(0.2) };
    tasks
        .iter()
        .map(|t| run_task(t.as_ref(), &p, &e, &EngineConfig::default().with_seed(11)))
        .collect()
}

#[test]
fn transcripts_round_trip() {
    let runs = sample_runs();
    assert_eq!(runs.len(), 10);
    let mut buf = Vec::new();
    write_transcripts(&runs, &mut buf).unwrap();
    let back = read_transcripts(Cursor::new(&buf), Path::new("mem")).unwrap();
    assert_eq!(back, runs);
    let mut again = Vec::new();
    write_transcripts(&back, &mut again).unwrap();
    assert_eq!(again, buf);
}

#[test]
fn truncated_transcript_names_line() {
    let runs = sample_runs();
    let mut buf = Vec::new();
    write_transcripts(&runs[..3], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let cut = &text[..text.len() - 40];
    match read_transcripts(Cursor::new(cut), Path::new("t.jsonl")) {
        Err(HarnessError::Schema { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn empty_and_future_transcripts() {
    let mut buf = Vec::new();
    write_transcripts(&[], &mut buf).unwrap();
    assert!(buf.is_empty());
    assert!(read_transcripts(Cursor::new(&buf), Path::new("e")).unwrap().is_empty());

    let runs = sample_runs();
    let mut buf = Vec::new();
    write_transcripts(&runs[..1], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap().replace("\"schema_version\":1", "\"schema_version\":9");
    let err = read_transcripts(Cursor::new(text), Path::new("f")).unwrap_err();
    assert!(err.to_string().contains("newer"), "{err}");
}

#[test]
fn experiment_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path());
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.runs.len(), 10);
    for p in [&out.manifest, &out.transcripts, &out.summary_csv, &out.verdicts] {
        assert!(p.is_file(), "{}", p.display());
    }
    let m = RunManifest::read(&out.manifest).unwrap();
    assert!(m.finished_at_unix.is_some());
    assert_eq!(m.datasets.len(), 1);
    assert!(m.stale_datasets().unwrap().is_empty());
    assert_eq!(fs::read_to_string(&out.verdicts).unwrap().lines().count(), 10);

    // Same config, same bytes.
    let first = fs::read(&out.transcripts).unwrap();
    run_experiment(&cfg).unwrap();
    assert_eq!(fs::read(&out.transcripts).unwrap(), first);
}

#[test]
fn missing_dataset_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.dataset = Some(dir.path().join("nope.jsonl"));
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 2);
    cfg.dataset = None;
    assert_eq!(run_experiment(&cfg).unwrap_err().exit_code(), 2);
}

#[test]
fn sampling_is_seeded_and_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.sample = Some(4);
    let ids = |c: &HarnessConfig| load_tasks(c).unwrap().iter().map(|t| t.id().to_string()).collect::<Vec<_>>();
    let a = ids(&cfg);
    assert_eq!(a.len(), 4);
    assert_eq!(a, ids(&cfg));
    let mut sorted = a.clone();
    sorted.sort_by_key(|s| s[1..].parse::<usize>().unwrap());
    assert_eq!(a, sorted);
}

#[test]
fn scaling_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path());
    cfg.scaling.m_max = 3;
    let out = run_scaling(&cfg).unwrap();
    assert_eq!(out.points.len(), 3);
    assert_eq!(fs::read_to_string(&out.csv).unwrap().lines().count(), 4);
}

#[test]
fn verify_offline_answers() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write_game24(dir.path());
    let answers = dir.path().join("answers.jsonl");
    fs::write(
        &answers,
        concat!(
            "{\"id\":\"q0\",\"answer\":\"13-9=4 (4,10,4)\\n10-4=6 (4,6)\\n4*6=24 (24)\"}\n",
            "{\"id\":\"q1\",\"steps\":[\"1+1=2 (4,6,2)\",\"4*6=24 (2,24)\",\"24/2=12 (12)\"]}\n",
            "{\"id\":\"q2\",\"answer\":\"1*2=2 (3,4,2); 3*4=12 (2,12); 2*12=24 (24)\"}\n",
        ),
    )
    .unwrap();
    let out = verify_answers(TaskKind::Game24, &inst, &answers, LoadMode::Strict).unwrap();
    let flags: Vec<bool> = out.verdicts.iter().map(|v| v.correct).collect();
    assert_eq!(&flags[..3], &[true, false, true]);
    assert_eq!(out.correct, 2);
    assert_eq!(out.verdicts[5].error.as_deref(), Some("no answer"));
    assert!((out.accuracy.unwrap() - 0.2).abs() < 1e-12);

    fs::write(&answers, "{\"id\":\"q0\"}\nnot json\n").unwrap();
    match verify_answers(TaskKind::Game24, &inst, &answers, LoadMode::Strict) {
        Err(HarnessError::Schema { line: 2, .. }) => {}
        other => panic!("{other:?}"),
    }
}
