//! Propose-evaluate reasoning: cost models, information bounds, the Game of
//! 24, task verifiers, the proposer/evaluator engine, metrics and the
//! experiment harness.

pub mod cost_model;
pub mod engine;
pub mod game24;
pub mod harness;
pub mod info_bound;
pub mod metrics;
pub mod scalar;
pub mod tasks;

/// Exact FLOP and memory counts.
pub type Flops = u128;
/// Exact Game-of-24 rational.
pub type Rat = num_rational::Ratio<i64>;
/// Information quantities in bits.
pub type Bits = f64;
