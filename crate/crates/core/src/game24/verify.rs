use num_rational::Ratio;
use serde::Serialize;

use super::{int_rat, parse_step, same_multiset, Quad, StepThought, TARGET};
use crate::scalar::RatInt;

/// Reasons a step is not a legal move from a state. Rationals are rendered.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepViolation {
    OperandMissing { operand: String },
    ArithmeticWrong { expected: String, claimed: String },
    RemainingMismatch { expected: String, claimed: String },
    DivByZero,
}

/// Every violation of `step` against `state`; empty means valid.
///
/// Remaining numbers are checked against `state − {a, b} + {claimed result}`
/// as multisets, and only when both operands are present (otherwise the
/// expected remainder is undefined).
pub fn verify_step<I: RatInt>(state: &[Ratio<I>], step: &StepThought<I>) -> Vec<StepViolation> {
    let mut violations = Vec::new();
    let mut pool: Vec<Ratio<I>> = state.to_vec();
    let mut operands_present = true;
    for operand in [&step.lhs_a, &step.lhs_b] {
        match pool.iter().position(|v| v == operand) {
            Some(k) => {
                pool.swap_remove(k);
            }
            None => {
                operands_present = false;
                violations.push(StepViolation::OperandMissing {
                    operand: super::render_rat(operand),
                });
            }
        }
    }
    match step.op.apply(&step.lhs_a, &step.lhs_b) {
        None => violations.push(StepViolation::DivByZero),
        Some(actual) if actual != step.claimed_result => {
            violations.push(StepViolation::ArithmeticWrong {
                expected: super::render_rat(&actual),
                claimed: super::render_rat(&step.claimed_result),
            })
        }
        Some(_) => {}
    }
    if operands_present {
        pool.push(step.claimed_result.clone());
        if !same_multiset(&pool, &step.claimed_remaining) {
            pool.sort();
            let mut claimed = step.claimed_remaining.clone();
            claimed.sort();
            violations.push(StepViolation::RemainingMismatch {
                expected: super::render_list(&pool),
                claimed: super::render_list(&claimed),
            });
        }
    }
    violations
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SolutionViolation {
    WrongStepCount { steps: usize },
    Unparseable { step: usize, reason: String },
    InvalidStep { step: usize, violations: Vec<StepViolation> },
    NotTarget { final_state: String },
}

/// Accept iff three steps chain validly from the quad down to exactly {24}.
///
/// Each step is checked against the state the previous step claimed, so an
/// error anywhere shows up at the step that introduced it.
pub fn verify_solution<I: RatInt>(quad: &Quad, steps: &[StepThought<I>]) -> Vec<SolutionViolation> {
    if steps.len() != 3 {
        return vec![SolutionViolation::WrongStepCount { steps: steps.len() }];
    }
    let mut violations = Vec::new();
    let mut state = quad.to_state::<I>();
    for (k, step) in steps.iter().enumerate() {
        let v = verify_step(&state, step);
        if !v.is_empty() {
            violations.push(SolutionViolation::InvalidStep {
                step: k + 1,
                violations: v,
            });
        }
        state = step.claimed_remaining.clone();
    }
    let target: Ratio<I> = int_rat(TARGET);
    if !(state.len() == 1 && state[0] == target) {
        violations.push(SolutionViolation::NotTarget {
            final_state: super::render_list(&state),
        });
    }
    violations
}

/// [`verify_solution`] over raw step texts.
pub fn verify_solution_text<I: RatInt>(quad: &Quad, steps: &[&str]) -> Vec<SolutionViolation> {
    let mut parsed = Vec::with_capacity(steps.len());
    for (k, text) in steps.iter().enumerate() {
        match parse_step::<I>(text) {
            Ok(s) => parsed.push(s),
            Err(e) => {
                return vec![SolutionViolation::Unparseable {
                    step: k + 1,
                    reason: e.to_string(),
                }]
            }
        }
    }
    verify_solution(quad, &parsed)
}
