//! Game of 24: exact-rational steps, verification, exhaustive search and
//! dataset construction.
//!
//! A step thought has the shape `a∘b=c (r1,r2,...)`: one binary operation on
//! two numbers of the current state, its result, and the numbers that remain
//! afterwards (the untouched state in order, then the result). No floating
//! point is used anywhere in this module.

mod dataset;
mod parse;
mod search;
mod verify;

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::RatInt;

pub use dataset::{
    all_quads, generate_dataset, make_training_examples, multiset_count, step_prompt, DatasetEntry,
    DatasetReport,
    TrainingExample,
};
pub use parse::{parse_numbers, parse_rat, parse_step, ParseError};
pub use search::{
    canonical_solutions, ground_truth_next_thoughts, is_solvable, solve, Expr, SearchRules,
    SolutionRecord, Solver,
};
pub use verify::{
    verify_solution, verify_solution_text, verify_step, SolutionViolation, StepViolation,
};

/// Default upper bound on the four starting numbers.
pub const DEFAULT_MAX_VALUE: u32 = 30;
pub const TARGET: i64 = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Game24Error {
    #[error("value {value} outside [1, {max_value}]")]
    OutOfRange { value: u32, max_value: u32 },
    #[error("max_value {0} outside [1, 100]")]
    MaxValue(u32),
    #[error("quad {0} has no solution")]
    UnsolvableQuad(Quad),
    #[error("dataset sink: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
}

impl Op {
    pub const ALL: [Op; 4] = [Op::Add, Op::Sub, Op::Mul, Op::Div];

    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Sub => '-',
            Op::Mul => '*',
            Op::Div => '/',
        }
    }

    pub fn is_commutative(self) -> bool {
        matches!(self, Op::Add | Op::Mul)
    }

    /// `a ∘ b`, or `None` on division by zero.
    pub fn apply<I: RatInt>(self, a: &Ratio<I>, b: &Ratio<I>) -> Option<Ratio<I>> {
        Some(match self {
            Op::Add => a + b,
            Op::Sub => a - b,
            Op::Mul => a * b,
            Op::Div => {
                if num_traits::Zero::is_zero(b) {
                    return None;
                }
                a / b
            }
        })
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// `p` when the denominator is one, else `p/q`.
pub fn render_rat<I: RatInt>(r: &Ratio<I>) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Operands on the left of `=` are parenthesized when negative or fractional
/// so that `/` and `-` stay unambiguous.
pub fn render_operand<I: RatInt>(r: &Ratio<I>) -> String {
    let plain = render_rat(r);
    if r.is_integer() && !num_traits::Signed::is_negative(r.numer()) {
        plain
    } else {
        format!("({plain})")
    }
}

pub fn render_list<I: RatInt>(values: &[Ratio<I>]) -> String {
    values.iter().map(render_rat).collect::<Vec<_>>().join(",")
}

pub fn int_rat<I: RatInt>(v: i64) -> Ratio<I> {
    Ratio::from_integer(I::from_i64(v).expect("small integer fits"))
}

/// One proposed step, `a∘b=c (remaining)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StepThought<I: RatInt = i64> {
    pub lhs_a: Ratio<I>,
    pub op: Op,
    pub lhs_b: Ratio<I>,
    pub claimed_result: Ratio<I>,
    pub claimed_remaining: Vec<Ratio<I>>,
    pub raw_text: String,
}

impl<I: RatInt> StepThought<I> {
    /// Build a step and fill `raw_text` with its canonical rendering.
    pub fn new(
        lhs_a: Ratio<I>,
        op: Op,
        lhs_b: Ratio<I>,
        claimed_result: Ratio<I>,
        claimed_remaining: Vec<Ratio<I>>,
    ) -> Self {
        let mut step = Self {
            lhs_a,
            op,
            lhs_b,
            claimed_result,
            claimed_remaining,
            raw_text: String::new(),
        };
        step.raw_text = step.render();
        step
    }

    /// Canonical text form.
    pub fn render(&self) -> String {
        format!(
            "{}{}{}={} ({})",
            render_operand(&self.lhs_a),
            self.op,
            render_operand(&self.lhs_b),
            render_rat(&self.claimed_result),
            render_list(&self.claimed_remaining)
        )
    }

    /// Apply a correct step `state[i] ∘ state[j]` to an ordered state.
    pub fn from_state(state: &[Ratio<I>], i: usize, j: usize, op: Op) -> Option<Self> {
        let (a, b) = (&state[i], &state[j]);
        let c = op.apply(a, b)?;
        let mut remaining: Vec<Ratio<I>> = state
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != i && *k != j)
            .map(|(_, v)| v.clone())
            .collect();
        remaining.push(c.clone());
        Some(Self::new(a.clone(), op, b.clone(), c, remaining))
    }
}

impl<I: RatInt> fmt::Display for StepThought<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Four starting integers, stored sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<u32>", into = "Vec<u32>")]
pub struct Quad([u32; 4]);

impl Quad {
    pub fn new(values: [u32; 4], max_value: u32) -> Result<Self, Game24Error> {
        if let Some(&value) = values.iter().find(|&&v| v == 0 || v > max_value) {
            return Err(Game24Error::OutOfRange { value, max_value });
        }
        let mut v = values;
        v.sort_unstable();
        Ok(Self(v))
    }

    pub fn values(&self) -> [u32; 4] {
        self.0
    }

    pub fn to_state<I: RatInt>(&self) -> Vec<Ratio<I>> {
        self.0.iter().map(|&v| int_rat(v as i64)).collect()
    }
}

impl TryFrom<Vec<u32>> for Quad {
    type Error = String;

    fn try_from(v: Vec<u32>) -> Result<Self, Self::Error> {
        let arr: [u32; 4] = v
            .try_into()
            .map_err(|v: Vec<u32>| format!("a quad has 4 numbers, got {}", v.len()))?;
        Quad::new(arr, 100).map_err(|e| e.to_string())
    }
}

impl From<Quad> for Vec<u32> {
    fn from(q: Quad) -> Self {
        q.0.to_vec()
    }
}

impl fmt::Display for Quad {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "{a},{b},{c},{d}")
    }
}

/// Multiset equality of two lists of rationals.
pub fn same_multiset<I: RatInt>(a: &[Ratio<I>], b: &[Ratio<I>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort();
    y.sort();
    x == y
}

/// Proposer prompt for a set of numbers.
pub fn proposer_prompt<I: RatInt>(numbers: &[Ratio<I>]) -> String {
    format!(
        "Here is a task for you: use these numbers <<{}>>  to obtain 24 through the basic operation of (+- */). Each number can only be used once and must be used.\nPlease output the next possible operation directly for only one line, in the format of: Equation (remaining numbers)",
        render_list(numbers)
    )
}

/// Evaluator criteria block; the current numbers fill the `remaining<<>>` slot.
pub fn evaluator_criteria<I: RatInt>(numbers: &[Ratio<I>]) -> String {
    format!(
        "You must consider whether the expression calculation in the next thought proposal<<>>is correct,\nwhether the number on the left side of the equation is in the remaining<<{}>>, \nwhether the number on the right side of the equation is in the left<<>>, and \nwhether the number in the left<<>>is only '24' left or more likely to achieve 24 through basic arithmetic operations (+- */).",
        render_list(numbers)
    )
}
