//! The propose-evaluate loop.
//!
//! Each step asks a proposer backend for M candidate thoughts, shows all of
//! them to an evaluator backend in one numbered prompt, parses the chosen
//! serial, and applies that thought to the task state. With a beam width
//! above one the top selections become parallel branches.

mod mock;
mod remote;

use std::fmt;
use std::sync::OnceLock;
use std::time::Instant;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tasks::{StepCheck, TaskError, TaskKind, TaskSpec, TaskState};

pub use mock::{
    mock_propose, oracle_evaluate, LatencyModel, MockBatch, MockEvaluator, MockProposer,
    OracleEvaluator,
};
pub use remote::{ApiKey, RemoteBackend, RemoteConfig, RetryPolicy, API_KEY_ENV};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// M: proposals requested per step.
    pub proposals_per_step: usize,
    /// B: selections kept per step.
    pub beam_width: usize,
    pub max_steps: usize,
    /// T override; the task default is used when absent.
    pub denoise_steps: Option<u32>,
    pub temperature: f64,
    pub eval_temperature: f64,
    pub max_tokens: u32,
    /// Drop proposals that fail the task verifier before evaluation.
    pub pre_filter: bool,
    /// Extra evaluator calls after an unparseable selection.
    pub retry_limit: u32,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            proposals_per_step: 5,
            beam_width: 1,
            max_steps: 3,
            denoise_steps: None,
            temperature: 0.7,
            eval_temperature: 0.0,
            max_tokens: 256,
            pre_filter: false,
            retry_limit: 2,
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: &str| Err(EngineError::Config(m.to_string()));
        if self.proposals_per_step == 0 {
            return bad("proposals_per_step must be >= 1");
        }
        if self.beam_width == 0 {
            return bad("beam_width must be >= 1");
        }
        if self.max_steps == 0 {
            return bad("max_steps must be >= 1");
        }
        if self.denoise_steps == Some(0) {
            return bad("denoise_steps must be >= 1");
        }
        if !(self.temperature >= 0.0 && self.eval_temperature >= 0.0) {
            return bad("temperatures must be >= 0");
        }
        Ok(())
    }

    pub fn with_proposals(mut self, m: usize) -> Self {
        self.proposals_per_step = m;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub denoise_steps: u32,
    pub temperature: f64,
    pub max_tokens: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub max_parallel_samples: usize,
    pub supports_step_hint: bool,
}

pub struct ProposeRequest<'a> {
    pub task: &'a dyn TaskSpec,
    pub state: &'a TaskState,
    pub prompt: &'a str,
    pub n: usize,
    pub decode: DecodeParams,
    pub seed: u64,
}

pub struct EvaluateRequest<'a> {
    pub task: &'a dyn TaskSpec,
    pub state: &'a TaskState,
    pub prompt: &'a str,
    pub proposals: &'a [String],
    pub temperature: f64,
    pub max_tokens: u32,
    pub seed: u64,
}

/// Backend output plus the latency it reports. Mocks report synthetic
/// latency so transcripts are reproducible; remote calls leave it empty and
/// the engine measures wall time.
#[derive(Debug, Clone, PartialEq)]
pub struct BackendReply<T> {
    pub value: T,
    pub latency_s: Option<f64>,
    pub note: Option<String>,
}

impl<T> BackendReply<T> {
    pub fn new(value: T) -> Self {
        Self {
            value,
            latency_s: None,
            note: None,
        }
    }
}

pub trait ProposerBackend: Send + Sync {
    fn identity(&self) -> String;
    fn capabilities(&self) -> Capabilities;
    /// Exactly `req.n` texts, in label order.
    fn propose(&self, req: &ProposeRequest<'_>) -> Result<BackendReply<Vec<String>>, BackendError>;
}

pub trait EvaluatorBackend: Send + Sync {
    fn identity(&self) -> String;
    /// Free text that should end with a bracketed serial.
    fn evaluate(&self, req: &EvaluateRequest<'_>) -> Result<BackendReply<String>, BackendError>;
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackendError {
    #[error("request timed out: {0}")]
    Timeout(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport: {0}")]
    Transport(String),
    #[error("malformed response: {0}")]
    Protocol(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no serial in [1, {m}] found in evaluator output")]
pub struct SelectionParseError {
    pub m: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("invalid engine config: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("proposer returned {got} texts, expected {expected}")]
    ProposalCount { expected: usize, got: usize },
    #[error("no usable selection: {0}")]
    NoSelection(String),
    #[error(transparent)]
    Task(#[from] TaskError),
}

const EVAL_LEAD: &str = "Here are some candidate solutions for the next step.Their serial numbers are in [].";
const EVAL_TAIL: &str = "Please choose the best one and tell me the serial number you have chosen.OUTPUT FORMAT:'Reasons:....  [serial  number]'.";

/// Evaluator prompt: the task preamble, the numbered candidates
/// `[1]p1, [2]p2, ...`, then the output-format instruction.
pub fn build_eval_prompt(preamble: &str, proposals: &[String]) -> String {
    let list = proposals
        .iter()
        .enumerate()
        .map(|(k, p)| format!("[{}]{}", k + 1, p))
        .collect::<Vec<_>>()
        .join(", ");
    format!("{preamble}\n{EVAL_LEAD}{list}\n{EVAL_TAIL}")
}

fn serial_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[\s*(\d+)\s*\]").expect("regex"))
}

/// The last bracketed integer in `[1, m]`, 1-based.
pub fn parse_selection(text: &str, m: usize) -> Result<usize, SelectionParseError> {
    serial_re()
        .captures_iter(text)
        .filter_map(|c| c[1].parse::<usize>().ok())
        .filter(|&k| (1..=m).contains(&k))
        .last()
        .ok_or(SelectionParseError { m })
}

/// Outcome of one evaluator round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// 1-based serial.
    pub index: usize,
    pub rationale: String,
    pub attempts: u32,
    pub fallback: bool,
    pub latency_s: f64,
}

/// Ask the evaluator for a serial, retrying unparseable output up to
/// `retry_limit` times, then fall back to the lowest-index proposal the task
/// verifier accepts.
pub fn evaluate_select(
    evaluator: &dyn EvaluatorBackend,
    task: &dyn TaskSpec,
    state: &TaskState,
    proposals: &[String],
    cfg: &EngineConfig,
    seed: u64,
) -> Result<Selection, EngineError> {
    if proposals.is_empty() {
        return Err(EngineError::NoSelection("no proposals".into()));
    }
    let prompt = build_eval_prompt(&task.evaluator_preamble(state), proposals);
    let mut latency = 0.0;
    let mut last_text = String::new();
    for attempt in 0..=cfg.retry_limit {
        let started = Instant::now();
        let reply = evaluator.evaluate(&EvaluateRequest {
            task,
            state,
            prompt: &prompt,
            proposals,
            temperature: cfg.eval_temperature,
            max_tokens: cfg.max_tokens,
            seed: mix(seed, attempt as u64),
        })?;
        latency += reply.latency_s.unwrap_or_else(|| started.elapsed().as_secs_f64());
        match parse_selection(&reply.value, proposals.len()) {
            Ok(index) => {
                return Ok(Selection {
                    index,
                    rationale: reply.value,
                    attempts: attempt + 1,
                    fallback: false,
                    latency_s: latency,
                })
            }
            Err(e) => {
                tracing::debug!(task = task.id(), attempt, error = %e, "unparseable selection");
                last_text = reply.value;
            }
        }
    }
    let fallback = proposals
        .iter()
        .position(|p| task.check_step(state, p).is_valid())
        .ok_or_else(|| {
            EngineError::NoSelection(format!(
                "evaluator output unparseable and no proposal verifies; last output: {last_text:?}"
            ))
        })?;
    Ok(Selection {
        index: fallback + 1,
        rationale: last_text,
        attempts: cfg.retry_limit + 1,
        fallback: true,
        latency_s: latency,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Solved,
    Failed,
    Exhausted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Solved => "solved",
            Outcome::Failed => "failed",
            Outcome::Exhausted => "exhausted",
        })
    }
}

/// One propose-evaluate round on one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based depth.
    pub step: usize,
    pub branch: usize,
    pub state_before: String,
    pub proposals: Vec<String>,
    pub eval_prompt: String,
    pub evaluator_output: String,
    /// 1-based serials into `proposals`, best first.
    pub selected: Vec<usize>,
    pub fallback: bool,
    pub eval_attempts: u32,
    pub note: Option<String>,
    pub t_start: f64,
    pub t_end: f64,
    pub step_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunErrorKind {
    Config,
    Backend,
    Selection,
    Task,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunError {
    pub kind: RunErrorKind,
    pub message: String,
}

impl From<&EngineError> for RunError {
    fn from(e: &EngineError) -> Self {
        let kind = match e {
            EngineError::Config(_) => RunErrorKind::Config,
            EngineError::Backend(_) | EngineError::ProposalCount { .. } => RunErrorKind::Backend,
            EngineError::NoSelection(_) => RunErrorKind::Selection,
            EngineError::Task(_) => RunErrorKind::Task,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

/// Full transcript of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningRun {
    pub task_id: String,
    pub task_kind: TaskKind,
    pub proposer: String,
    pub evaluator: String,
    pub proposals_per_step: usize,
    pub beam_width: usize,
    pub denoise_steps: u32,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
    /// Applied thoughts of the solving branch (or the first branch).
    pub final_history: Vec<String>,
    pub final_state: String,
    pub error: Option<RunError>,
    pub total_wall_time: f64,
}

impl ReasoningRun {
    pub fn step_count(&self) -> usize {
        self.steps.len()
    }
}

/// Stable 64-bit mixing of seeds and counters (splitmix64 finalizer).
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a, used to fold a task id into seeds independently of run order.
pub fn hash_str(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Seed for the proposals of one (task, step, branch).
pub fn step_seed(seed: u64, task_id: &str, step: usize, branch: usize) -> u64 {
    mix(mix(mix(seed, hash_str(task_id)), step as u64), branch as u64)
}

struct Branch {
    state: TaskState,
}

/// Run the loop on one task until a terminal state or `max_steps`.
///
/// Branches advance in lockstep. Each selected proposal becomes a child
/// branch; at most `beam_width` branches survive each step, taken in
/// (parent, selection rank) order. The run is solved when any branch reaches
/// a terminal state the task accepts.
pub fn run_task(
    task: &dyn TaskSpec,
    proposer: &dyn ProposerBackend,
    evaluator: &dyn EvaluatorBackend,
    cfg: &EngineConfig,
) -> ReasoningRun {
    let denoise = cfg.denoise_steps.unwrap_or_else(|| task.denoise_steps());
    let mut run = ReasoningRun {
        task_id: task.id().to_string(),
        task_kind: task.kind(),
        proposer: proposer.identity(),
        evaluator: evaluator.identity(),
        proposals_per_step: cfg.proposals_per_step,
        beam_width: cfg.beam_width,
        denoise_steps: denoise,
        seed: cfg.seed,
        steps: Vec::new(),
        outcome: Outcome::Exhausted,
        final_history: Vec::new(),
        final_state: task.initial_state().view,
        error: None,
        total_wall_time: 0.0,
    };
    if let Err(e) = cfg.validate() {
        run.outcome = Outcome::Failed;
        run.error = Some(RunError::from(&e));
        return run;
    }
    let mut clock = 0.0;
    let mut branches = vec![Branch {
        state: task.initial_state(),
    }];
    for depth in 1..=cfg.max_steps {
        let mut children = Vec::new();
        for (b, branch) in branches.iter().enumerate() {
            match expand(task, proposer, evaluator, cfg, denoise, depth, b, &branch.state, clock) {
                Ok((record, next)) => {
                    clock = record.t_end;
                    run.steps.push(record);
                    children.extend(next.into_iter().map(|state| Branch { state }));
                }
                Err(StepFailure { error: e, record }) => {
                    if let Some(r) = record {
                        clock = r.t_end;
                        run.steps.push(r);
                    }
                    tracing::warn!(task = task.id(), step = depth, error = %e, "run aborted");
                    run.outcome = Outcome::Failed;
                    run.error = Some(RunError::from(&e));
                    run.final_history = branch.state.history.clone();
                    run.final_state = branch.state.view.clone();
                    run.total_wall_time = clock;
                    return run;
                }
            }
        }
        children.truncate(cfg.beam_width);
        branches = children;
        run.total_wall_time = clock;

        if let Some(win) = branches
            .iter()
            .find(|b| task.is_terminal(&b.state) && task.accepts(&b.state))
        {
            run.outcome = Outcome::Solved;
            run.final_history = win.state.history.clone();
            run.final_state = win.state.view.clone();
            return run;
        }
        let first = &branches[0];
        run.final_history = first.state.history.clone();
        run.final_state = first.state.view.clone();
        branches.retain(|b| !task.is_terminal(&b.state));
        if branches.is_empty() {
            run.outcome = Outcome::Failed;
            return run;
        }
    }
    run.outcome = Outcome::Exhausted;
    run
}

/// A step that could not finish. The record is kept when proposals were
/// drawn but no selection could be made, so transcripts show what the
/// evaluator saw.
struct StepFailure {
    error: EngineError,
    record: Option<StepRecord>,
}

impl From<EngineError> for StepFailure {
    fn from(error: EngineError) -> Self {
        Self { error, record: None }
    }
}

#[allow(clippy::too_many_arguments)]
fn expand(
    task: &dyn TaskSpec,
    proposer: &dyn ProposerBackend,
    evaluator: &dyn EvaluatorBackend,
    cfg: &EngineConfig,
    denoise: u32,
    depth: usize,
    branch: usize,
    state: &TaskState,
    clock: f64,
) -> Result<(StepRecord, Vec<TaskState>), StepFailure> {
    let seed = step_seed(cfg.seed, task.id(), depth, branch);
    let m = cfg.proposals_per_step;
    let prompt = task.proposer_prompt(state);
    let started = Instant::now();
    let reply = proposer.propose(&ProposeRequest {
        task,
        state,
        prompt: &prompt,
        n: m,
        decode: DecodeParams {
            denoise_steps: denoise,
            temperature: cfg.temperature,
            max_tokens: cfg.max_tokens,
        },
        seed,
    })
    .map_err(EngineError::from)?;
    let propose_time = reply.latency_s.unwrap_or_else(|| started.elapsed().as_secs_f64());
    let proposals = reply.value;
    if proposals.len() != m {
        return Err(EngineError::ProposalCount {
            expected: m,
            got: proposals.len(),
        }
        .into());
    }

    // Serials shown to the evaluator map back to positions in `proposals`.
    let shown: Vec<usize> = if cfg.pre_filter {
        let keep: Vec<usize> = (0..m)
            .filter(|&k| task.check_step(state, &proposals[k]).is_valid())
            .collect();
        if keep.is_empty() {
            (0..m).collect()
        } else {
            keep
        }
    } else {
        (0..m).collect()
    };

    let mut selected = Vec::new();
    let mut first: Option<(String, Selection)> = None;
    let mut eval_time = 0.0;
    let mut remaining = shown.clone();
    while selected.len() < cfg.beam_width && !remaining.is_empty() {
        let texts: Vec<String> = remaining.iter().map(|&k| proposals[k].clone()).collect();
        let round_seed = mix(seed, 0xE7A1 + selected.len() as u64);
        let sel = match evaluate_select(evaluator, task, state, &texts, cfg, round_seed) {
            Ok(s) => s,
            Err(error) if selected.is_empty() => {
                let eval_prompt = build_eval_prompt(&task.evaluator_preamble(state), &texts);
                let step_time = propose_time;
                return Err(StepFailure {
                    record: Some(StepRecord {
                        step: depth,
                        branch,
                        state_before: state.view.clone(),
                        proposals,
                        eval_prompt,
                        evaluator_output: String::new(),
                        selected: Vec::new(),
                        fallback: false,
                        eval_attempts: cfg.retry_limit + 1,
                        note: Some(error.to_string()),
                        t_start: clock,
                        t_end: clock + step_time,
                        step_time,
                    }),
                    error,
                });
            }
            Err(_) => break,
        };
        eval_time += sel.latency_s;
        let pick = remaining.remove(sel.index - 1);
        selected.push(pick + 1);
        if first.is_none() {
            first = Some((build_eval_prompt(&task.evaluator_preamble(state), &texts), sel));
        }
    }
    let (eval_prompt, sel) = first.expect("at least one selection");

    let mut next = Vec::with_capacity(selected.len());
    for &k in &selected {
        next.push(task.apply(state, &proposals[k - 1]).map_err(EngineError::from)?);
    }
    let step_time = propose_time + eval_time;
    Ok((
        StepRecord {
            step: depth,
            branch,
            state_before: state.view.clone(),
            proposals,
            eval_prompt,
            evaluator_output: sel.rationale,
            selected,
            fallback: sel.fallback,
            eval_attempts: sel.attempts,
            note: reply.note,
            t_start: clock,
            t_end: clock + step_time,
            step_time,
        },
        next,
    ))
}

/// Verdicts for each proposal of a step, as the task verifier sees them.
pub fn proposal_verdicts(task: &dyn TaskSpec, record: &StepRecord) -> Vec<StepCheck> {
    let state = TaskState {
        history: Vec::new(),
        view: record.state_before.clone(),
    };
    record
        .proposals
        .iter()
        .map(|p| task.check_step(&state, p))
        .collect()
}
