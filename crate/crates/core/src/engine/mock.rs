use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    mix, BackendError, BackendReply, Capabilities, EngineError, EvaluateRequest, EvaluatorBackend,
    ProposeRequest, ProposerBackend,
};
use crate::tasks::{TaskSpec, TaskState};

/// Synthetic latency reported by mock backends, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatencyModel {
    pub base_s: f64,
    pub per_sample_s: f64,
    pub per_denoise_step_s: f64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            base_s: 0.05,
            per_sample_s: 0.01,
            per_denoise_step_s: 0.005,
        }
    }
}

impl LatencyModel {
    pub fn fixed(seconds: f64) -> Self {
        Self {
            base_s: seconds,
            per_sample_s: 0.0,
            per_denoise_step_s: 0.0,
        }
    }

    pub fn latency(&self, samples: usize, denoise_steps: u32) -> f64 {
        self.base_s + self.per_sample_s * samples as f64 + self.per_denoise_step_s * denoise_steps as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockBatch {
    pub texts: Vec<String>,
    /// Whether each slot drew a ground-truth thought.
    pub drawn_correct: Vec<bool>,
    /// The state had no ground-truth thought, so every slot is corrupted.
    pub unsolvable: bool,
}

/// M proposals where each slot independently is a ground-truth thought with
/// probability `p_correct`, else a corrupted one.
///
/// Slot `k` uses its own stream derived from `(seed, k)`, so the first M
/// proposals of a batch of M+1 equal the batch of M.
pub fn mock_propose(
    task: &dyn TaskSpec,
    state: &TaskState,
    m: usize,
    p_correct: f64,
    seed: u64,
) -> Result<MockBatch, EngineError> {
    if m == 0 {
        return Err(EngineError::Config("M must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&p_correct) {
        return Err(EngineError::Config(format!("p_correct {p_correct} outside [0, 1]")));
    }
    let truth = task.ground_truth(state);
    let mut texts = Vec::with_capacity(m);
    let mut drawn = Vec::with_capacity(m);
    for slot in 0..m {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, slot as u64));
        let correct = !truth.is_empty() && rng.random_bool(p_correct);
        if correct {
            texts.push(truth[rng.random_range(0..truth.len())].clone());
        } else {
            texts.push(task.corrupt(state, &mut rng));
        }
        drawn.push(correct);
    }
    Ok(MockBatch {
        texts,
        drawn_correct: drawn,
        unsolvable: truth.is_empty() && p_correct > 0.0,
    })
}

/// Proposer that simulates a model of fixed per-sample quality.
#[derive(Debug, Clone, PartialEq)]
pub struct MockProposer {
    pub p_correct: f64,
    pub latency: LatencyModel,
}

impl MockProposer {
    pub fn new(p_correct: f64) -> Self {
        Self {
            p_correct,
            latency: LatencyModel::default(),
        }
    }
}

impl ProposerBackend for MockProposer {
    fn identity(&self) -> String {
        format!("mock-proposer(p={})", self.p_correct)
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities {
            max_parallel_samples: usize::MAX,
            supports_step_hint: false,
        }
    }

    fn propose(&self, req: &ProposeRequest<'_>) -> Result<BackendReply<Vec<String>>, BackendError> {
        let batch = mock_propose(req.task, req.state, req.n, self.p_correct, req.seed)
            .map_err(|e| BackendError::Other(e.to_string()))?;
        Ok(BackendReply {
            value: batch.texts,
            latency_s: Some(self.latency.latency(req.n, req.decode.denoise_steps)),
            note: batch
                .unsolvable
                .then(|| "state has no correct thought; all proposals corrupted".to_string()),
        })
    }
}

/// Lowest index among the best verdict class (on path, then merely valid);
/// `None` when nothing verifies. 1-based.
pub fn oracle_evaluate(task: &dyn TaskSpec, state: &TaskState, proposals: &[String]) -> Option<usize> {
    let ranks: Vec<u8> = proposals.iter().map(|p| task.check_step(state, p).rank()).collect();
    let best = *ranks.iter().max()?;
    if best == 0 {
        return None;
    }
    ranks.iter().position(|&r| r == best).map(|k| k + 1)
}

fn oracle_text(task: &dyn TaskSpec, state: &TaskState, proposals: &[String]) -> String {
    match oracle_evaluate(task, state, proposals) {
        Some(k) => format!("Reasons: candidate {k} is correct and keeps the task solvable.  [{k}]"),
        None => "Reasons: no candidate passes verification.".to_string(),
    }
}

/// Evaluator backed by the task verifier.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleEvaluator {
    pub latency: LatencyModel,
}

impl Default for OracleEvaluator {
    fn default() -> Self {
        Self {
            latency: LatencyModel::fixed(0.2),
        }
    }
}

impl EvaluatorBackend for OracleEvaluator {
    fn identity(&self) -> String {
        "oracle-evaluator".into()
    }

    fn evaluate(&self, req: &EvaluateRequest<'_>) -> Result<BackendReply<String>, BackendError> {
        Ok(BackendReply {
            value: oracle_text(req.task, req.state, req.proposals),
            latency_s: Some(self.latency.latency(req.proposals.len(), 0)),
            note: None,
        })
    }
}

/// Evaluator that follows the oracle with probability `p_oracle` and
/// otherwise names a uniformly random serial. Deterministic per seed.
#[derive(Debug, Clone, PartialEq)]
pub struct MockEvaluator {
    pub p_oracle: f64,
    pub latency: LatencyModel,
}

impl MockEvaluator {
    pub fn new(p_oracle: f64) -> Self {
        Self {
            p_oracle,
            latency: LatencyModel::fixed(0.2),
        }
    }
}

impl EvaluatorBackend for MockEvaluator {
    fn identity(&self) -> String {
        format!("mock-evaluator(p={})", self.p_oracle)
    }

    fn evaluate(&self, req: &EvaluateRequest<'_>) -> Result<BackendReply<String>, BackendError> {
        let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
        let value = if rng.random_bool(self.p_oracle.clamp(0.0, 1.0)) {
            oracle_text(req.task, req.state, req.proposals)
        } else {
            let k = rng.random_range(1..=req.proposals.len());
            format!("Reasons: candidate {k} looks plausible.  [{k}]")
        };
        Ok(BackendReply {
            value,
            latency_s: Some(self.latency.latency(req.proposals.len(), 0)),
            note: None,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game24::Quad;
    use crate::tasks::Game24Task;

    fn task() -> Game24Task {
        Game24Task::new("t", Quad::new([1, 14, 16, 25], 30).unwrap())
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let t = task();
        let s = t.initial_state();
        let a = mock_propose(&t, &s, 5, 0.5, 9).unwrap();
        let b = mock_propose(&t, &s, 5, 0.5, 9).unwrap();
        assert_eq!(a, b);
        let c = mock_propose(&t, &s, 6, 0.5, 9).unwrap();
        assert_eq!(&c.texts[..5], &a.texts[..]);
    }

    #[test]
    fn extremes() {
        let t = task();
        let s = t.initial_state();
        let all = mock_propose(&t, &s, 20, 1.0, 3).unwrap();
        assert!(all.texts.iter().all(|p| t.check_step(&s, p).rank() == 2));
        let none = mock_propose(&t, &s, 20, 0.0, 3).unwrap();
        assert!(none.texts.iter().all(|p| !t.check_step(&s, p).is_valid()));
        assert!(mock_propose(&t, &s, 0, 0.5, 3).is_err());
        assert!(mock_propose(&t, &s, 3, 1.5, 3).is_err());
    }

    #[test]
    fn unsolvable_state_flagged() {
        let t = Game24Task::new("u", Quad::new([1, 1, 1, 1], 30).unwrap());
        let s = t.initial_state();
        let b = mock_propose(&t, &s, 4, 1.0, 0).unwrap();
        assert!(b.unsolvable);
        assert!(b.texts.iter().all(|p| !t.check_step(&s, p).is_valid()));
    }

    #[test]
    fn oracle_ties_and_junk() {
        let t = task();
        let s = t.initial_state();
        let props: Vec<String> = ["hello", "14+1=15 (16,25,15)", "16-1=15 (14,25,15)"]
            .iter()
            .map(|x| x.to_string())
            .collect();
        assert_eq!(oracle_evaluate(&t, &s, &props), Some(2));
        assert_eq!(oracle_evaluate(&t, &s, &props[..1]), None);
    }
}
