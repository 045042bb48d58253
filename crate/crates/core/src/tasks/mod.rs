//! Task definitions: the hooks the engine drives, plus verifiers and loaders
//! for multiple-choice and trip-planning benchmarks.

mod loader;
mod mcq;
mod spec;
mod trip;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loader::{load_instances, LoadMode, Loaded};
pub use mcq::{extract_label, mcq_verify, mcq_verify_strict, Label, McqInstance};
pub use spec::{Game24Instance, Game24Task, McqTask, StepCheck, TaskSpec, TaskState, TripTask};
pub use trip::{trip_parse, trip_verify, Itinerary, Segment, TripInstance, TripParseError, TripViolation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Game24,
    Mcq,
    Trip,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Game24, TaskKind::Mcq, TaskKind::Trip];

    pub fn default_denoise_steps(self) -> u32 {
        match self {
            TaskKind::Game24 => 8,
            TaskKind::Mcq | TaskKind::Trip => 64,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TaskKind::Game24 => "game24",
            TaskKind::Mcq => "mcq",
            TaskKind::Trip => "trip",
        })
    }
}

impl FromStr for TaskKind {
    type Err = TaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "game24" | "24" => Ok(TaskKind::Game24),
            "mcq" | "gpqa" | "arc" | "arc-c" => Ok(TaskKind::Mcq),
            "trip" => Ok(TaskKind::Trip),
            other => Err(TaskError::UnknownKind(other.to_string())),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerificationError {
    #[error("no answer label in {0:?}")]
    Unparseable(String),
}

/// A record that does not match its schema. `line` is 1-based, 0 when the
/// error is not tied to a line.
#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[error("line {line}: {reason}")]
pub struct SchemaError {
    pub line: usize,
    pub reason: String,
}

impl SchemaError {
    pub fn new(reason: impl Into<String>) -> Self {
        Self {
            line: 0,
            reason: reason.into(),
        }
    }

    pub fn at(mut self, line: usize) -> Self {
        self.line = line;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TaskError {
    #[error("unknown task kind {0:?}")]
    UnknownKind(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("unparseable proposal: {0}")]
    Parse(String),
    #[error("task {kind} is missing hook {hook}")]
    MissingHook { kind: TaskKind, hook: &'static str },
}

/// A loaded instance of any kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Instance {
    Game24(Game24Instance),
    Mcq(McqInstance),
    Trip(TripInstance),
}

impl Instance {
    pub fn id(&self) -> &str {
        match self {
            Instance::Game24(i) => &i.id,
            Instance::Mcq(i) => &i.id,
            Instance::Trip(i) => &i.id,
        }
    }

    pub fn into_task(self) -> Arc<dyn TaskSpec> {
        match self {
            Instance::Game24(i) => Arc::new(Game24Task::new(i.id, i.numbers)),
            Instance::Mcq(i) => Arc::new(McqTask::new(i)),
            Instance::Trip(i) => Arc::new(TripTask::new(i)),
        }
    }
}

fn sample_task(kind: TaskKind) -> Arc<dyn TaskSpec> {
    match kind {
        TaskKind::Game24 => Arc::new(Game24Task::new(
            "sample",
            crate::game24::Quad::new([4, 6, 1, 1], 30).expect("valid quad"),
        )),
        TaskKind::Mcq => Arc::new(McqTask::new(McqInstance {
            id: "sample".into(),
            question: "Which number is even?".into(),
            choices: vec!["1".into(), "2".into(), "3".into(), "5".into()],
            answer: Label::B,
        })),
        TaskKind::Trip => Arc::new(TripTask::new(TripInstance {
            id: "sample".into(),
            cities: vec!["A".into(), "B".into()],
            required_days: [("A".to_string(), 2), ("B".to_string(), 2)].into(),
            direct_flights: vec![("A".into(), "B".into())],
            total_days: 3,
        })),
    }
}

/// Exercise every hook of every kind on a sample instance: prompts and
/// grammar non-empty, T ≥ 1, a ground-truth proposal that is on path and
/// leads to an accepted terminal state.
pub fn check_registry() -> Result<(), TaskError> {
    for kind in TaskKind::ALL {
        let task = sample_task(kind);
        let miss = |hook| TaskError::MissingHook { kind, hook };
        if task.denoise_steps() == 0 {
            return Err(miss("denoise_steps"));
        }
        if task.grammar().is_empty() {
            return Err(miss("grammar"));
        }
        let mut state = task.initial_state();
        while !task.is_terminal(&state) {
            if task.proposer_prompt(&state).is_empty() {
                return Err(miss("proposer_prompt"));
            }
            if task.evaluator_preamble(&state).is_empty() {
                return Err(miss("evaluator_preamble"));
            }
            let next = task.ground_truth(&state).into_iter().next().ok_or(miss("ground_truth"))?;
            if task.check_step(&state, &next) != StepCheck::OnPath {
                return Err(miss("check_step"));
            }
            state = task.apply(&state, &next)?;
        }
        if !task.accepts(&state) {
            return Err(miss("accepts"));
        }
    }
    Ok(())
}
