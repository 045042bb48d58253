//! Accuracy, throughput, step time, pass@k and the proposal-scaling runner.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    proposal_verdicts, run_task, EngineConfig, EngineError, EvaluatorBackend, Outcome,
    ProposerBackend, ReasoningRun, RunErrorKind,
};
use crate::tasks::{StepCheck, TaskSpec, TaskState};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no {0} to aggregate")]
    Empty(&'static str),
    #[error("total wall time is zero")]
    ZeroWallTime,
    #[error("batch {index} has {n} proposals; pass@{k} needs at least {k}")]
    BatchTooSmall { index: usize, n: usize, k: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type TaskIndex = HashMap<String, Arc<dyn TaskSpec>>;

pub fn index_tasks(tasks: &[Arc<dyn TaskSpec>]) -> TaskIndex {
    tasks.iter().map(|t| (t.id().to_string(), t.clone())).collect()
}

/// Re-check a transcript's final state with the task verifier, without
/// trusting the engine's outcome.
pub fn reverify(task: &dyn TaskSpec, run: &ReasoningRun) -> bool {
    let state = TaskState {
        history: run.final_history.clone(),
        view: run.final_state.clone(),
    };
    task.is_terminal(&state) && task.accepts(&state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub accuracy: f64,
    pub solved: usize,
    pub total: usize,
    /// Runs the engine marked solved but the verifier rejects.
    pub mismatches: Vec<String>,
}

/// Fraction of runs that are both marked solved and accepted by `verify`.
pub fn accuracy(
    runs: &[ReasoningRun],
    verify: impl Fn(&ReasoningRun) -> bool,
) -> Result<AccuracyReport, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty("runs"));
    }
    let mut solved = 0;
    let mut mismatches = Vec::new();
    for r in runs {
        let ok = verify(r);
        match (r.outcome == Outcome::Solved, ok) {
            (true, true) => solved += 1,
            (true, false) => {
                tracing::warn!(task = %r.task_id, "engine reports solved but verifier rejects");
                mismatches.push(r.task_id.clone());
            }
            _ => {}
        }
    }
    Ok(AccuracyReport {
        accuracy: solved as f64 / runs.len() as f64,
        solved,
        total: runs.len(),
        mismatches,
    })
}

/// Accuracy with each run re-verified against its task in `index`; runs
/// whose task is unknown count as unsolved.
pub fn accuracy_indexed(runs: &[ReasoningRun], index: &TaskIndex) -> Result<AccuracyReport, MetricsError> {
    accuracy(runs, |r| {
        index
            .get(&r.task_id)
            .is_some_and(|t| reverify(t.as_ref(), r))
    })
}

/// Runs per minute at batch size one.
pub fn throughput(runs: &[ReasoningRun]) -> Result<f64, MetricsError> {
    if runs.is_empty() {
        return Err(MetricsError::Empty("runs"));
    }
    let total: f64 = runs.iter().map(|r| r.total_wall_time).sum();
    if total <= 0.0 {
        return Err(MetricsError::ZeroWallTime);
    }
    Ok(runs.len() as f64 / (total / 60.0))
}

pub fn avg_step_time(runs: &[ReasoningRun]) -> Result<f64, MetricsError> {
    let times: Vec<f64> = runs
        .iter()
        .flat_map(|r| r.steps.iter().map(|s| s.step_time))
        .collect();
    if times.is_empty() {
        return Err(MetricsError::Empty("steps"));
    }
    Ok(times.iter().sum::<f64>() / times.len() as f64)
}

/// Unbiased pass@k for one batch of `n` samples with `c` correct:
/// `1 − C(n−c, k) / C(n, k)`, evaluated as a running product.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> f64 {
    assert!(c <= n && k <= n && k > 0);
    if n - c < k {
        return 1.0;
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    1.0 - miss
}

/// Mean pass@k over batches of per-proposal correctness, with its standard
/// error across batches.
pub fn pass_at_k_batches(batches: &[Vec<bool>], k: usize) -> Result<(f64, f64), MetricsError> {
    if batches.is_empty() {
        return Err(MetricsError::Empty("batches"));
    }
    let mut vals = Vec::with_capacity(batches.len());
    for (index, b) in batches.iter().enumerate() {
        if b.len() < k {
            return Err(MetricsError::BatchTooSmall { index, n: b.len(), k });
        }
        vals.push(pass_at_k(b.len(), b.iter().filter(|&&x| x).count(), k));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = if vals.len() > 1 {
        vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok((mean, (var / n).sqrt()))
}

pub fn pass_at_5(batches: &[Vec<bool>]) -> Result<f64, MetricsError> {
    pass_at_k_batches(batches, 5).map(|(m, _)| m)
}

/// Per-step correctness batches from transcripts. A proposal is correct when
/// it verifies and keeps the task solvable.
pub fn proposal_batches(runs: &[ReasoningRun], index: &TaskIndex) -> Vec<Vec<bool>> {
    runs.iter()
        .filter_map(|r| index.get(&r.task_id).map(|t| (r, t)))
        .flat_map(|(r, t)| {
            r.steps.iter().map(move |s| {
                proposal_verdicts(t.as_ref(), s)
                    .into_iter()
                    .map(|v| v == StepCheck::OnPath)
                    .collect()
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub num_tasks: usize,
    pub accuracy: f64,
    pub throughput: f64,
    pub avg_step_time: f64,
    /// Absent when no step had at least five proposals.
    pub pass_at_5: Option<f64>,
    pub wall_time_total: f64,
    pub mismatches: usize,
    pub fallbacks: usize,
}

pub fn summarize(runs: &[ReasoningRun], index: &TaskIndex) -> Result<RunSummary, MetricsError> {
    let acc = accuracy_indexed(runs, index)?;
    let batches: Vec<Vec<bool>> = proposal_batches(runs, index)
        .into_iter()
        .filter(|b| b.len() >= 5)
        .collect();
    Ok(RunSummary {
        num_tasks: runs.len(),
        accuracy: acc.accuracy,
        throughput: throughput(runs)?,
        avg_step_time: avg_step_time(runs)?,
        pass_at_5: if batches.is_empty() {
            None
        } else {
            Some(pass_at_5(&batches)?)
        },
        wall_time_total: runs.iter().map(|r| r.total_wall_time).sum(),
        mismatches: acc.mismatches.len(),
        fallbacks: runs
            .iter()
            .flat_map(|r| &r.steps)
            .filter(|s| s.fallback)
            .count(),
    })
}

/// `metric,value` rows.
pub fn summary_csv(s: &RunSummary) -> String {
    let mut out = String::from("metric,value\n");
    let rows: [(&str, String); 8] = [
        ("num_tasks", s.num_tasks.to_string()),
        ("accuracy", format!("{:.6}", s.accuracy)),
        ("throughput_per_min", format!("{:.6}", s.throughput)),
        ("avg_step_time_s", format!("{:.6}", s.avg_step_time)),
        ("pass_at_5", s.pass_at_5.map_or(String::new(), |p| format!("{p:.6}"))),
        ("wall_time_total_s", format!("{:.6}", s.wall_time_total)),
        ("mismatches", s.mismatches.to_string()),
        ("fallbacks", s.fallbacks.to_string()),
    ];
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub proposals: usize,
    pub accuracy: f64,
    pub num_tasks: usize,
    pub solved: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Normal-approximation 95% interval for a proportion, clamped to [0, 1].
pub fn wald_interval(successes: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let p = successes as f64 / n as f64;
    let half = 1.96 * (p * (1.0 - p) / n as f64).sqrt();
    ((p - half).max(0.0), (p + half).min(1.0))
}

/// Accuracy for each M over the same task sample and seeds.
///
/// Runs execute on a pool of `workers` threads; per-run seeds depend only on
/// the config seed and task id, so results do not depend on scheduling.
/// Backend failures abort the experiment; other failed runs count as
/// unsolved.
pub fn scaling_experiment(
    tasks: &[Arc<dyn TaskSpec>],
    proposer: &dyn ProposerBackend,
    evaluator: &dyn EvaluatorBackend,
    m_range: RangeInclusive<usize>,
    cfg: &EngineConfig,
    workers: usize,
) -> Result<Vec<ScalingPoint>, ScalingError> {
    if tasks.is_empty() {
        return Err(MetricsError::Empty("tasks").into());
    }
    if *m_range.start() == 0 {
        return Err(EngineError::Config("M must be >= 1".into()).into());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| MetricsError::Pool(e.to_string()))?;
    let mut points = Vec::new();
    for m in m_range {
        let mcfg = cfg.clone().with_proposals(m);
        mcfg.validate()?;
        let runs: Vec<ReasoningRun> = pool.install(|| {
            tasks
                .par_iter()
                .map(|t| run_task(t.as_ref(), proposer, evaluator, &mcfg))
                .collect()
        });
        if let Some(err) = runs
            .iter()
            .filter_map(|r| r.error.as_ref())
            .find(|e| e.kind == RunErrorKind::Backend)
        {
            return Err(ScalingError::Backend(err.message.clone()));
        }
        let solved = runs
            .iter()
            .zip(tasks)
            .filter(|(r, t)| r.outcome == Outcome::Solved && reverify(t.as_ref(), r))
            .count();
        let (ci_low, ci_high) = wald_interval(solved, tasks.len());
        points.push(ScalingPoint {
            proposals: m,
            accuracy: solved as f64 / tasks.len() as f64,
            num_tasks: tasks.len(),
            solved,
            ci_low,
            ci_high,
        });
    }
    Ok(points)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("backend failure: {0}")]
    Backend(String),
}

/// `M,accuracy,n,ci_low,ci_high` rows.
pub fn scaling_csv(points: &[ScalingPoint]) -> String {
    let mut out = String::from("M,accuracy,n,ci_low,ci_high\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{:.6},{},{:.6},{:.6}",
            p.proposals, p.accuracy, p.num_tasks, p.ci_low, p.ci_high
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_at_k_values() {
        assert!((pass_at_k(10, 5, 5) - (1.0 - 1.0 / 252.0)).abs() < 1e-12);
        assert_eq!(pass_at_k(5, 0, 5), 0.0);
        assert_eq!(pass_at_k(5, 5, 5), 1.0);
        assert_eq!(pass_at_k(5, 1, 5), 1.0);
        assert!((pass_at_k(6, 1, 5) - 5.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn batch_rules() {
        assert!(pass_at_5(&[vec![true; 4]]).is_err());
        assert!(pass_at_5(&[]).is_err());
        let (m, _) = pass_at_k_batches(&[vec![true; 5], vec![false; 5]], 5).unwrap();
        assert_eq!(m, 0.5);
    }

    #[test]
    fn wald() {
        assert_eq!(wald_interval(0, 10), (0.0, 0.0));
        let (lo, hi) = wald_interval(50, 100);
        assert!((lo - (0.5 - 0.098)).abs() < 1e-9 && (hi - 0.598).abs() < 1e-9);
    }
}
