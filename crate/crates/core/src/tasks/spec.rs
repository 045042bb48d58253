use std::fmt;
use std::sync::{Arc, OnceLock};

use num_rational::Ratio;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::mcq::{extract_label, Label, McqInstance};
use super::trip::{trip_parse, trip_verify, Itinerary, TripInstance};
use super::{TaskError, TaskKind};
use crate::game24::{
    evaluator_criteria, parse_numbers, parse_step, render_list, step_prompt, verify_solution_text,
    verify_step, Quad, Solver, StepThought,
};

/// Where a task stands: the proposals applied so far and the task's
/// rendering of the current state (remaining numbers, or the answer).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskState {
    pub history: Vec<String>,
    pub view: String,
}

/// Verdict on one proposal against a state. Ranked Invalid < Valid < OnPath.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum StepCheck {
    Invalid { reasons: Vec<String> },
    /// Legal, but leaves a dead end or a wrong answer.
    Valid,
    /// Legal and still able to reach an accepted answer.
    OnPath,
}

impl StepCheck {
    pub fn rank(&self) -> u8 {
        match self {
            StepCheck::Invalid { .. } => 0,
            StepCheck::Valid => 1,
            StepCheck::OnPath => 2,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.rank() > 0
    }

    fn invalid(reason: impl fmt::Display) -> Self {
        StepCheck::Invalid {
            reasons: vec![reason.to_string()],
        }
    }
}

/// Hooks the engine needs from a task.
pub trait TaskSpec: Send + Sync + fmt::Debug {
    fn kind(&self) -> TaskKind;
    fn id(&self) -> &str;
    fn denoise_steps(&self) -> u32 {
        self.kind().default_denoise_steps()
    }
    /// One-line description of what a proposal looks like.
    fn grammar(&self) -> &'static str;
    fn initial_state(&self) -> TaskState;
    fn proposer_prompt(&self, state: &TaskState) -> String;
    /// Text placed before the numbered candidates in the evaluator prompt.
    fn evaluator_preamble(&self, state: &TaskState) -> String;
    fn check_step(&self, state: &TaskState, proposal: &str) -> StepCheck;
    /// Advance by a proposal. Only unparseable proposals are rejected; a
    /// parseable but wrong one is applied as claimed and fails at the end.
    fn apply(&self, state: &TaskState, proposal: &str) -> Result<TaskState, TaskError>;
    fn is_terminal(&self, state: &TaskState) -> bool;
    /// Final verdict from the task verifier.
    fn accepts(&self, state: &TaskState) -> bool;
    /// Proposals that keep the task solvable, in a fixed order.
    fn ground_truth(&self, state: &TaskState) -> Vec<String>;
    /// A well-formed but incorrect proposal.
    fn corrupt(&self, state: &TaskState, rng: &mut dyn RngCore) -> String;
}

fn shared_solver() -> &'static Solver {
    static SOLVER: OnceLock<Solver> = OnceLock::new();
    SOLVER.get_or_init(Solver::default)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Game24Instance {
    pub id: String,
    #[serde(alias = "quad")]
    pub numbers: Quad,
}

#[derive(Debug, Clone)]
pub struct Game24Task {
    pub instance: Game24Instance,
}

impl Game24Task {
    pub fn new(id: impl Into<String>, quad: Quad) -> Self {
        Self {
            instance: Game24Instance {
                id: id.into(),
                numbers: quad,
            },
        }
    }

    fn numbers(state: &TaskState) -> Vec<Ratio<i64>> {
        parse_numbers(&state.view).unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy)]
enum Corruption {
    WrongResult,
    MissingOperand,
    WrongRemaining,
}

impl TaskSpec for Game24Task {
    fn kind(&self) -> TaskKind {
        TaskKind::Game24
    }

    fn id(&self) -> &str {
        &self.instance.id
    }

    fn grammar(&self) -> &'static str {
        "a∘b=c (r1,r2,...)"
    }

    fn initial_state(&self) -> TaskState {
        TaskState {
            history: Vec::new(),
            view: render_list(&self.instance.numbers.to_state::<i64>()),
        }
    }

    fn proposer_prompt(&self, state: &TaskState) -> String {
        step_prompt(&self.instance.numbers, &state.history)
    }

    fn evaluator_preamble(&self, state: &TaskState) -> String {
        evaluator_criteria(&Self::numbers(state))
    }

    fn check_step(&self, state: &TaskState, proposal: &str) -> StepCheck {
        let step = match parse_step::<i64>(proposal) {
            Ok(s) => s,
            Err(e) => return StepCheck::invalid(e),
        };
        let violations = verify_step(&Self::numbers(state), &step);
        if !violations.is_empty() {
            return StepCheck::Invalid {
                reasons: violations.iter().map(|v| format!("{v:?}")).collect(),
            };
        }
        if shared_solver().is_solvable(&step.claimed_remaining) {
            StepCheck::OnPath
        } else {
            StepCheck::Valid
        }
    }

    fn apply(&self, state: &TaskState, proposal: &str) -> Result<TaskState, TaskError> {
        let step = parse_step::<i64>(proposal).map_err(|e| TaskError::Parse(e.to_string()))?;
        let mut history = state.history.clone();
        history.push(proposal.trim().to_string());
        Ok(TaskState {
            history,
            view: render_list(&step.claimed_remaining),
        })
    }

    fn is_terminal(&self, state: &TaskState) -> bool {
        Self::numbers(state).len() <= 1 || state.history.len() >= 3
    }

    fn accepts(&self, state: &TaskState) -> bool {
        let steps: Vec<&str> = state.history.iter().map(String::as_str).collect();
        verify_solution_text::<i64>(&self.instance.numbers, &steps).is_empty()
    }

    fn ground_truth(&self, state: &TaskState) -> Vec<String> {
        shared_solver()
            .ground_truth_next_thoughts(&Self::numbers(state))
            .into_iter()
            .map(|s| s.raw_text)
            .collect()
    }

    fn corrupt(&self, state: &TaskState, rng: &mut dyn RngCore) -> String {
        let numbers = Self::numbers(state);
        let legal = shared_solver().all_next_steps(&numbers);
        if legal.is_empty() {
            return "1+1=3 (3)".to_string();
        }
        let kinds = [
            Corruption::WrongResult,
            Corruption::MissingOperand,
            Corruption::WrongRemaining,
        ];
        loop {
            let base = &legal[rng.random_range(0..legal.len())];
            let kind = kinds[rng.random_range(0..kinds.len())];
            let bump = Ratio::from(rng.random_range(1..=3i64));
            let bad = match kind {
                Corruption::WrongResult => {
                    let c = &base.claimed_result + &bump;
                    let mut rem = base.claimed_remaining.clone();
                    *rem.last_mut().expect("result appended") = c.clone();
                    StepThought::new(base.lhs_a, base.op, base.lhs_b, c, rem)
                }
                Corruption::MissingOperand => {
                    let top = numbers.iter().max().copied().unwrap_or_default();
                    let a = top.trunc() + bump;
                    StepThought::new(
                        a,
                        base.op,
                        base.lhs_b,
                        base.claimed_result,
                        base.claimed_remaining.clone(),
                    )
                }
                Corruption::WrongRemaining => {
                    let mut rem = base.claimed_remaining.clone();
                    if rem.len() > 1 && rng.random_bool(0.5) {
                        rem.remove(0);
                    } else {
                        rem[0] = rem[0] + bump;
                    }
                    StepThought::new(base.lhs_a, base.op, base.lhs_b, base.claimed_result, rem)
                }
            };
            if !verify_step(&numbers, &bad).is_empty() {
                return bad.raw_text;
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct McqTask {
    pub instance: McqInstance,
}

impl McqTask {
    pub fn new(instance: McqInstance) -> Self {
        Self { instance }
    }

    fn render_question(&self) -> String {
        let mut s = self.instance.question.trim().to_string();
        for (label, choice) in Label::ALL.iter().zip(&self.instance.choices) {
            s.push_str(&format!("\n({label}) {choice}"));
        }
        s
    }
}

impl TaskSpec for McqTask {
    fn kind(&self) -> TaskKind {
        TaskKind::Mcq
    }

    fn id(&self) -> &str {
        &self.instance.id
    }

    fn grammar(&self) -> &'static str {
        "The answer is (X)"
    }

    fn initial_state(&self) -> TaskState {
        TaskState {
            history: Vec::new(),
            view: String::new(),
        }
    }

    fn proposer_prompt(&self, _state: &TaskState) -> String {
        format!(
            "{}\nChoose the single correct option. Give a short reason and finish with: The answer is (X)",
            self.render_question()
        )
    }

    fn evaluator_preamble(&self, _state: &TaskState) -> String {
        format!(
            "{}\nYou must consider whether the reasoning in each candidate is sound and whether the option it selects is correct.",
            self.render_question()
        )
    }

    fn check_step(&self, _state: &TaskState, proposal: &str) -> StepCheck {
        match extract_label(proposal, false) {
            Err(e) => StepCheck::invalid(e),
            Ok(l) if l == self.instance.answer => StepCheck::OnPath,
            Ok(_) => StepCheck::Valid,
        }
    }

    fn apply(&self, state: &TaskState, proposal: &str) -> Result<TaskState, TaskError> {
        let label = extract_label(proposal, false).map_err(|e| TaskError::Parse(e.to_string()))?;
        let mut history = state.history.clone();
        history.push(proposal.to_string());
        Ok(TaskState {
            history,
            view: label.to_string(),
        })
    }

    fn is_terminal(&self, state: &TaskState) -> bool {
        !state.history.is_empty()
    }

    fn accepts(&self, state: &TaskState) -> bool {
        state.view.parse::<Label>().ok() == Some(self.instance.answer)
    }

    fn ground_truth(&self, _state: &TaskState) -> Vec<String> {
        vec![format!("The answer is ({})", self.instance.answer)]
    }

    fn corrupt(&self, _state: &TaskState, rng: &mut dyn RngCore) -> String {
        let wrong: Vec<Label> = Label::ALL
            .into_iter()
            .filter(|&l| l != self.instance.answer)
            .collect();
        format!("The answer is ({})", wrong[rng.random_range(0..wrong.len())])
    }
}

#[derive(Debug, Clone)]
pub struct TripTask {
    pub instance: TripInstance,
    solutions: Arc<Vec<Itinerary>>,
}

impl TripTask {
    pub fn new(instance: TripInstance) -> Self {
        let solutions = Arc::new(instance.solutions());
        Self { instance, solutions }
    }

    fn describe(&self) -> String {
        let i = &self.instance;
        let stays: Vec<String> = i
            .cities
            .iter()
            .map(|c| format!("{c} for {} days", i.required_days[c]))
            .collect();
        let flights: Vec<String> = i
            .direct_flights
            .iter()
            .map(|(a, b)| format!("{a} and {b}"))
            .collect();
        format!(
            "Plan a {}-day trip visiting each city exactly once: {}. A flight day counts toward both cities. Direct flights exist only between: {}.",
            i.total_days,
            stays.join(", "),
            if flights.is_empty() { "none".to_string() } else { flights.join("; ") }
        )
    }
}

impl TaskSpec for TripTask {
    fn kind(&self) -> TaskKind {
        TaskKind::Trip
    }

    fn id(&self) -> &str {
        &self.instance.id
    }

    fn grammar(&self) -> &'static str {
        "Day A-B: City (one line per stay)"
    }

    fn initial_state(&self) -> TaskState {
        TaskState {
            history: Vec::new(),
            view: String::new(),
        }
    }

    fn proposer_prompt(&self, _state: &TaskState) -> String {
        format!(
            "{}\nOutput one line per stay in the format: Day A-B: City",
            self.describe()
        )
    }

    fn evaluator_preamble(&self, _state: &TaskState) -> String {
        format!(
            "{}\nYou must consider whether each plan visits every city once, uses only direct flights, shares the flight day between consecutive cities, and matches every stay length and the total.",
            self.describe()
        )
    }

    fn check_step(&self, _state: &TaskState, proposal: &str) -> StepCheck {
        match trip_parse(proposal) {
            Err(e) => StepCheck::invalid(e),
            Ok(it) if trip_verify(&self.instance, &it).is_empty() => StepCheck::OnPath,
            Ok(_) => StepCheck::Valid,
        }
    }

    fn apply(&self, state: &TaskState, proposal: &str) -> Result<TaskState, TaskError> {
        let it = trip_parse(proposal).map_err(|e| TaskError::Parse(e.to_string()))?;
        let mut history = state.history.clone();
        history.push(proposal.to_string());
        Ok(TaskState {
            history,
            view: it.to_string(),
        })
    }

    fn is_terminal(&self, state: &TaskState) -> bool {
        !state.history.is_empty()
    }

    fn accepts(&self, state: &TaskState) -> bool {
        trip_parse(&state.view)
            .map(|it| trip_verify(&self.instance, &it).is_empty())
            .unwrap_or(false)
    }

    fn ground_truth(&self, _state: &TaskState) -> Vec<String> {
        self.solutions.iter().map(|s| s.to_string()).collect()
    }

    fn corrupt(&self, _state: &TaskState, rng: &mut dyn RngCore) -> String {
        let base = self.solutions.first().cloned().unwrap_or_else(|| Itinerary {
            segments: self
                .instance
                .cities
                .iter()
                .enumerate()
                .map(|(k, c)| super::trip::Segment {
                    city: c.clone(),
                    day_start: k as u32 + 1,
                    day_end: k as u32 + 1,
                })
                .collect(),
        });
        loop {
            let mut it = base.clone();
            let n = it.segments.len();
            match rng.random_range(0..3) {
                0 => it.segments[0].day_end += 1,
                1 if n > 1 => {
                    it.segments.pop();
                }
                _ => {
                    let k = rng.random_range(0..n);
                    it.segments[k].day_start += 1;
                    it.segments[k].day_end += 1;
                }
            }
            if !trip_verify(&self.instance, &it).is_empty() {
                return it.to_string();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn case_study() -> Game24Task {
        Game24Task::new("cs", Quad::new([1, 14, 16, 25], 30).unwrap())
    }

    #[test]
    fn game24_hooks() {
        let t = case_study();
        let s0 = t.initial_state();
        assert_eq!(s0.view, "1,14,16,25");
        assert_eq!(t.check_step(&s0, "14+1=15 (16,25,15)"), StepCheck::OnPath);
        assert!(!t.check_step(&s0, "16*6=15 (14,25,15)").is_valid());
        assert!(!t.check_step(&s0, "hello").is_valid());
        let s1 = t.apply(&s0, "14+1=15 (16,25,15)").unwrap();
        assert_eq!(s1.view, "16,25,15");
        let s2 = t.apply(&s1, "25-16=9 (15,9)").unwrap();
        let s3 = t.apply(&s2, "15+9=24 (24)").unwrap();
        assert!(t.is_terminal(&s3));
        assert!(t.accepts(&s3));
        assert!(t.proposer_prompt(&s2).contains("25-16=9 (15,9)"));
    }

    #[test]
    fn game24_corruptions_are_invalid() {
        let t = case_study();
        let s0 = t.initial_state();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let bad = t.corrupt(&s0, &mut rng);
            assert!(!t.check_step(&s0, &bad).is_valid(), "{bad}");
        }
    }

    #[test]
    fn mcq_hooks() {
        let t = McqTask::new(McqInstance {
            id: "m".into(),
            question: "2+2?".into(),
            choices: vec!["3".into(), "4".into(), "5".into(), "22".into()],
            answer: Label::B,
        });
        let s = t.initial_state();
        assert!(t.proposer_prompt(&s).contains("(B) 4"));
        let gt = &t.ground_truth(&s)[0];
        assert_eq!(t.check_step(&s, gt), StepCheck::OnPath);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(t.check_step(&s, &t.corrupt(&s, &mut rng)), StepCheck::Valid);
        let done = t.apply(&s, gt).unwrap();
        assert!(t.is_terminal(&done) && t.accepts(&done));
    }
}
