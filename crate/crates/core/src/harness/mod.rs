//! Configuration, run manifests, transcript persistence and the experiment
//! drivers behind the command-line tool.

mod experiment;
mod manifest;
mod transcript;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    EngineConfig, EvaluatorBackend, LatencyModel, MockEvaluator, MockProposer, OracleEvaluator,
    ProposerBackend, RemoteBackend, RemoteConfig,
};
use crate::tasks::TaskKind;

pub use experiment::{
    load_tasks, run_experiment, run_scaling, verify_answers, AnswerVerdict, RunOutput,
    ScalingOutput, VerifyOutput, write_verdicts,
};
pub use manifest::{digest_file, DatasetDigest, RunManifest};
pub use transcript::{
    load_transcripts, persist_transcripts, read_transcripts, write_transcripts,
    TRANSCRIPT_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad invocation or configuration; exit status 2.
    #[error("{0}")]
    Usage(String),
    /// The request was well formed but could not be carried out; exit 1.
    #[error("{0}")]
    Domain(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: line {line}: {reason}")]
    Schema {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn default_p_correct() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProposerSpec {
    Mock {
        #[serde(default = "default_p_correct")]
        p_correct: f64,
        #[serde(default)]
        latency: LatencyModel,
    },
    Remote(RemoteConfig),
}

impl Default for ProposerSpec {
    fn default() -> Self {
        ProposerSpec::Mock {
            p_correct: 1.0,
            latency: LatencyModel::default(),
        }
    }
}

fn default_eval_latency() -> LatencyModel {
    LatencyModel::fixed(0.2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvaluatorSpec {
    Oracle {
        #[serde(default = "default_eval_latency")]
        latency: LatencyModel,
    },
    Mock {
        p_oracle: f64,
        #[serde(default = "default_eval_latency")]
        latency: LatencyModel,
    },
    Remote(RemoteConfig),
}

impl Default for EvaluatorSpec {
    fn default() -> Self {
        EvaluatorSpec::Oracle {
            latency: default_eval_latency(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSpec {
    pub m_min: usize,
    pub m_max: usize,
}

impl Default for ScalingSpec {
    fn default() -> Self {
        Self { m_min: 1, m_max: 10 }
    }
}

/// Everything an experiment needs. Read from TOML; command-line flags
/// override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub task: TaskKind,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Run a seeded random subset of this many instances.
    #[serde(default)]
    pub sample: Option<usize>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    /// Skip malformed dataset records instead of failing.
    #[serde(default)]
    pub lenient: bool,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub proposer: ProposerSpec,
    #[serde(default)]
    pub evaluator: EvaluatorSpec,
    #[serde(default)]
    pub scaling: ScalingSpec,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    4
}

impl HarnessConfig {
    pub fn new(task: TaskKind) -> Self {
        Self {
            task,
            dataset: None,
            output_dir: default_output_dir(),
            sample: None,
            workers: default_workers(),
            lenient: false,
            engine: EngineConfig::default(),
            proposer: ProposerSpec::default(),
            evaluator: EvaluatorSpec::default(),
            scaling: ScalingSpec::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => {
                HarnessError::Usage(format!("config file {} not found", path.display()))
            }
            _ => HarnessError::io(path, e),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let usage = |m: String| Err(HarnessError::Usage(m));
        self.engine
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))?;
        if self.workers == 0 {
            return usage("workers must be >= 1".into());
        }
        if self.sample == Some(0) {
            return usage("sample must be >= 1".into());
        }
        if let ProposerSpec::Mock { p_correct, .. } = self.proposer {
            if !(0.0..=1.0).contains(&p_correct) {
                return usage(format!("proposer.p_correct {p_correct} outside [0, 1]"));
            }
        }
        if let EvaluatorSpec::Mock { p_oracle, .. } = self.evaluator {
            if !(0.0..=1.0).contains(&p_oracle) {
                return usage(format!("evaluator.p_oracle {p_oracle} outside [0, 1]"));
            }
        }
        if self.scaling.m_min == 0 || self.scaling.m_min > self.scaling.m_max {
            return usage("scaling needs 1 <= m_min <= m_max".into());
        }
        Ok(())
    }

    pub fn proposer_backend(&self) -> Box<dyn ProposerBackend> {
        match &self.proposer {
            ProposerSpec::Mock { p_correct, latency } => Box::new(MockProposer {
                p_correct: *p_correct,
                latency: *latency,
            }),
            ProposerSpec::Remote(r) => Box::new(RemoteBackend::new(r.clone())),
        }
    }

    pub fn evaluator_backend(&self) -> Box<dyn EvaluatorBackend> {
        match &self.evaluator {
            EvaluatorSpec::Oracle { latency } => Box::new(OracleEvaluator { latency: *latency }),
            EvaluatorSpec::Mock { p_oracle, latency } => Box::new(MockEvaluator {
                p_oracle: *p_oracle,
                latency: *latency,
            }),
            EvaluatorSpec::Remote(r) => Box::new(RemoteBackend::new(r.clone())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_defaults() {
        let cfg = HarnessConfig::from_toml_str(
            r#"
task = "game24"
dataset = "data/g24.jsonl"

[engine]
proposals_per_step = 8
seed = 3

[proposer]
backend = "mock"
p_correct = 0.4

[evaluator]
backend = "oracle"
"#,
        )
        .unwrap();
        assert_eq!(cfg.engine.proposals_per_step, 8);
        assert_eq!(cfg.engine.beam_width, 1);
        assert!(matches!(cfg.proposer, ProposerSpec::Mock { p_correct, .. } if p_correct == 0.4));
        let again = HarnessConfig::from_toml_str(&cfg.to_toml()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn remote_backend_section() {
        let cfg = HarnessConfig::from_toml_str(
            r#"
task = "mcq"
[proposer]
backend = "remote"
base_url = "http://localhost:9000"
model = "dlm"
denoise_param = "steps"
"#,
        )
        .unwrap();
        match cfg.proposer {
            ProposerSpec::Remote(r) => assert_eq!(r.denoise_param.as_deref(), Some("steps")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(HarnessConfig::from_toml_str("task = \"game24\"\nbogus = 1").is_err());
        assert!(HarnessConfig::from_toml_str("task = \"game24\"\n[engine]\nproposals_per_step = 0").is_err());
        assert!(HarnessConfig::from_toml_str(
            "task = \"game24\"\n[proposer]\nbackend = \"mock\"\np_correct = 2.0"
        )
        .is_err());
        assert!(HarnessConfig::from_toml_str(
            "task = \"game24\"\n[proposer]\nbackend = \"mock\"\nfoo = 1"
        )
        .is_err());
        let e = HarnessConfig::from_toml_str("task = \"chess\"").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
