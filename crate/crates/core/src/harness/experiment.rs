use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{persist_transcripts, HarnessConfig, HarnessError, RunManifest};
use crate::engine::{mix, run_task, ReasoningRun};
use crate::game24::verify_solution_text;
use crate::metrics::{
    index_tasks, reverify, scaling_csv, scaling_experiment, summarize, summary_csv, RunSummary,
    ScalingError, ScalingPoint,
};
use crate::tasks::{
    load_instances, mcq_verify, trip_parse, trip_verify, Instance, LoadMode, TaskError, TaskKind,
    TaskSpec,
};

fn load_mode(cfg: &HarnessConfig) -> LoadMode {
    if cfg.lenient {
        LoadMode::Lenient
    } else {
        LoadMode::Strict
    }
}

fn task_error(path: &Path, e: TaskError) -> HarnessError {
    match e {
        TaskError::Schema(s) => HarnessError::Schema {
            path: path.to_path_buf(),
            line: s.line,
            reason: s.reason,
        },
        other => HarnessError::Domain(other.to_string()),
    }
}

fn existing_dataset(cfg: &HarnessConfig) -> Result<&Path, HarnessError> {
    let path = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| HarnessError::Usage("a dataset path is required (--dataset or `dataset` in the config)".into()))?;
    if !path.is_file() {
        return Err(HarnessError::Usage(format!("dataset {} not found", path.display())));
    }
    Ok(path)
}

/// Instances from the configured dataset, optionally a seeded random subset
/// kept in file order.
pub fn load_tasks(cfg: &HarnessConfig) -> Result<Vec<Arc<dyn TaskSpec>>, HarnessError> {
    let path = existing_dataset(cfg)?;
    let loaded = load_instances(path, cfg.task, load_mode(cfg)).map_err(|e| task_error(path, e))?;
    let mut instances = loaded.instances;
    if let Some(n) = cfg.sample {
        if n < instances.len() {
            let mut idx: Vec<usize> = (0..instances.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(cfg.engine.seed, 0x5A4D_504C)));
            let mut keep = idx[..n].to_vec();
            keep.sort_unstable();
            let mut all: Vec<Option<Instance>> = instances.into_iter().map(Some).collect();
            instances = keep.into_iter().map(|k| all[k].take().expect("distinct")).collect();
        }
    }
    Ok(instances.into_iter().map(Instance::into_task).collect())
}

fn prepare_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))
}

fn pool(workers: usize) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| HarnessError::Domain(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TaskVerdict<'a> {
    task_id: &'a str,
    outcome: String,
    verified: bool,
    steps: usize,
    wall_time: f64,
}

#[derive(Debug)]
pub struct RunOutput {
    pub runs: Vec<ReasoningRun>,
    pub summary: RunSummary,
    pub manifest: PathBuf,
    pub transcripts: PathBuf,
    pub summary_csv: PathBuf,
    pub verdicts: PathBuf,
}

/// Run every task and write manifest, transcripts, summary and verdicts
/// into the output directory.
pub fn run_experiment(cfg: &HarnessConfig) -> Result<RunOutput, HarnessError> {
    cfg.validate()?;
    let tasks = load_tasks(cfg)?;
    if tasks.is_empty() {
        return Err(HarnessError::Domain("dataset has no instances".into()));
    }
    let proposer = cfg.proposer_backend();
    let evaluator = cfg.evaluator_backend();
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let manifest_path = dir.join("manifest.json");
    let mut manifest = RunManifest::begin("run", cfg, proposer.identity(), evaluator.identity())?;
    manifest.write(&manifest_path)?;

    let runs: Vec<ReasoningRun> = pool(cfg.workers)?.install(|| {
        tasks
            .par_iter()
            .map(|t| run_task(t.as_ref(), proposer.as_ref(), evaluator.as_ref(), &cfg.engine))
            .collect()
    });

    let transcripts = dir.join("transcripts.jsonl");
    persist_transcripts(&runs, &transcripts)?;

    let index = index_tasks(&tasks);
    let summary = summarize(&runs, &index).map_err(|e| HarnessError::Domain(e.to_string()))?;
    let summary_path = dir.join("summary.csv");
    fs::write(&summary_path, summary_csv(&summary)).map_err(|e| HarnessError::io(&summary_path, e))?;

    let verdicts = dir.join("verdicts.jsonl");
    let mut out = String::new();
    for (r, t) in runs.iter().zip(&tasks) {
        let v = TaskVerdict {
            task_id: &r.task_id,
            outcome: r.outcome.to_string(),
            verified: reverify(t.as_ref(), r),
            steps: r.steps.len(),
            wall_time: r.total_wall_time,
        };
        out.push_str(&serde_json::to_string(&v).expect("verdict serializes"));
        out.push('\n');
    }
    fs::write(&verdicts, out).map_err(|e| HarnessError::io(&verdicts, e))?;

    manifest.finish(vec![transcripts.clone(), summary_path.clone(), verdicts.clone()]);
    manifest.write(&manifest_path)?;
    Ok(RunOutput {
        runs,
        summary,
        manifest: manifest_path,
        transcripts,
        summary_csv: summary_path,
        verdicts,
    })
}

#[derive(Debug)]
pub struct ScalingOutput {
    pub points: Vec<ScalingPoint>,
    pub manifest: PathBuf,
    pub csv: PathBuf,
}

pub fn run_scaling(cfg: &HarnessConfig) -> Result<ScalingOutput, HarnessError> {
    cfg.validate()?;
    let tasks = load_tasks(cfg)?;
    let proposer = cfg.proposer_backend();
    let evaluator = cfg.evaluator_backend();
    let dir = &cfg.output_dir;
    prepare_dir(dir)?;
    let manifest_path = dir.join("manifest.json");
    let mut manifest = RunManifest::begin("scaling", cfg, proposer.identity(), evaluator.identity())?;
    manifest.write(&manifest_path)?;

    let points = scaling_experiment(
        &tasks,
        proposer.as_ref(),
        evaluator.as_ref(),
        cfg.scaling.m_min..=cfg.scaling.m_max,
        &cfg.engine,
        cfg.workers,
    )
    .map_err(|e| match e {
        ScalingError::Engine(e) => HarnessError::Usage(e.to_string()),
        other => HarnessError::Domain(other.to_string()),
    })?;
    let csv = dir.join("scaling.csv");
    fs::write(&csv, scaling_csv(&points)).map_err(|e| HarnessError::io(&csv, e))?;
    manifest.finish(vec![csv.clone()]);
    manifest.write(&manifest_path)?;
    Ok(ScalingOutput {
        points,
        manifest: manifest_path,
        csv,
    })
}

#[derive(Debug, Deserialize)]
struct AnswerLine {
    id: String,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    steps: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerVerdict {
    pub id: String,
    pub correct: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOutput {
    pub verdicts: Vec<AnswerVerdict>,
    pub correct: usize,
    pub accuracy: Option<f64>,
}

fn check_answer(inst: &Instance, a: &AnswerLine) -> Result<bool, String> {
    let text = a.answer.clone().unwrap_or_default();
    match inst {
        Instance::Game24(g) => {
            let steps: Vec<String> = match &a.steps {
                Some(s) => s.clone(),
                None => text
                    .split(['\n', ';'])
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(String::from)
                    .collect(),
            };
            let refs: Vec<&str> = steps.iter().map(String::as_str).collect();
            let v = verify_solution_text::<i64>(&g.numbers, &refs);
            Ok(v.is_empty())
        }
        Instance::Mcq(m) => mcq_verify(m, &text).map_err(|e| e.to_string()),
        Instance::Trip(t) => {
            let it = trip_parse(&text).map_err(|e| e.to_string())?;
            Ok(trip_verify(t, &it).is_empty())
        }
    }
}

/// Check offline answers against instances. Unanswered or unparseable
/// instances count as incorrect and carry an error message.
pub fn verify_answers(
    kind: TaskKind,
    instances: &Path,
    answers: &Path,
    mode: LoadMode,
) -> Result<VerifyOutput, HarnessError> {
    for p in [instances, answers] {
        if !p.is_file() {
            return Err(HarnessError::Usage(format!("{} not found", p.display())));
        }
    }
    let loaded = load_instances(instances, kind, mode).map_err(|e| task_error(instances, e))?;
    let text = fs::read_to_string(answers).map_err(|e| HarnessError::io(answers, e))?;
    let mut by_id: HashMap<String, AnswerLine> = HashMap::new();
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let a: AnswerLine = serde_json::from_str(line).map_err(|e| HarnessError::Schema {
            path: answers.to_path_buf(),
            line: k + 1,
            reason: e.to_string(),
        })?;
        by_id.insert(a.id.clone(), a);
    }
    let verdicts: Vec<AnswerVerdict> = loaded
        .instances
        .iter()
        .map(|inst| {
            let (correct, error) = match by_id.get(inst.id()) {
                None => (false, Some("no answer".to_string())),
                Some(a) => match check_answer(inst, a) {
                    Ok(c) => (c, None),
                    Err(e) => (false, Some(e)),
                },
            };
            AnswerVerdict {
                id: inst.id().to_string(),
                correct,
                error,
            }
        })
        .collect();
    let correct = verdicts.iter().filter(|v| v.correct).count();
    let accuracy = (!verdicts.is_empty()).then(|| correct as f64 / verdicts.len() as f64);
    Ok(VerifyOutput {
        verdicts,
        correct,
        accuracy,
    })
}

/// JSON lines for a verify result followed by nothing else; the caller
/// prints the aggregate.
pub fn write_verdicts<W: Write>(out: &VerifyOutput, mut w: W) -> std::io::Result<()> {
    for v in &out.verdicts {
        writeln!(w, "{}", serde_json::to_string(v).map_err(std::io::Error::other)?)?;
    }
    Ok(())
}
