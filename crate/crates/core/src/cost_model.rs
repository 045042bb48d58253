//! Analytic inference-cost calculators for parallel-denoising (DLM) and
//! autoregressive (LLM) transformers.
//!
//! Every FLOP and memory count is computed in exact integer arithmetic over a
//! caller-chosen [`Count`] type; overflow of a fixed-width type is reported as
//! [`CostError::Overflow`] rather than wrapping. Ratios are exact rationals.

use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{Count, Real};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("invalid transformer shape: {0}")]
    InvalidShape(String),
    #[error("invalid sequence profile: {0}")]
    InvalidSequence(String),
    #[error("invalid denoise schedule: {0}")]
    InvalidSchedule(String),
    #[error("arithmetic overflow in the chosen count type")]
    Overflow,
}

pub type Result<T> = std::result::Result<T, CostError>;

/// Transformer dimensions shared by both model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerShape {
    /// D
    pub model_dim: u64,
    /// E
    pub embed_dim: u64,
    /// H
    pub num_heads: u64,
    /// N
    pub num_blocks: u64,
    /// V
    pub vocab_size: u64,
}

impl TransformerShape {
    /// The 8B-class reference configuration: D = E = 4096, H = 32, N = 32,
    /// V = 126,464. Pair it with a 4096-token sequence.
    pub const REFERENCE: TransformerShape = TransformerShape {
        model_dim: 4096,
        embed_dim: 4096,
        num_heads: 32,
        num_blocks: 32,
        vocab_size: 126_464,
    };

    /// Sequence length used alongside [`Self::REFERENCE`].
    pub const REFERENCE_LEN: u64 = 4096;

    pub fn new(
        model_dim: u64,
        embed_dim: u64,
        num_heads: u64,
        num_blocks: u64,
        vocab_size: u64,
    ) -> Result<Self> {
        let shape = Self {
            model_dim,
            embed_dim,
            num_heads,
            num_blocks,
            vocab_size,
        };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("model_dim", self.model_dim),
            ("embed_dim", self.embed_dim),
            ("num_heads", self.num_heads),
            ("num_blocks", self.num_blocks),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| *v == 0) {
            return Err(CostError::InvalidShape(format!("{name} must be >= 1")));
        }
        if self.model_dim % self.num_heads != 0 {
            return Err(CostError::InvalidShape(format!(
                "model_dim {} is not divisible by num_heads {}",
                self.model_dim, self.num_heads
            )));
        }
        Ok(())
    }

    /// Per-head dimension D / H.
    pub fn head_dim(&self) -> u64 {
        self.model_dim / self.num_heads
    }
}

/// Prompt and generation lengths in tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceProfile {
    pub len_in: u64,
    pub len_out: u64,
}

impl SequenceProfile {
    pub fn new(len_in: u64, len_out: u64) -> Result<Self> {
        let seq = Self { len_in, len_out };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.len_out == 0 {
            return Err(CostError::InvalidSequence("len_out must be >= 1".into()));
        }
        self.len_in
            .checked_add(self.len_out)
            .ok_or(CostError::Overflow)?;
        Ok(())
    }

    /// Full length L = L_in + L_out.
    pub fn total(&self) -> u64 {
        self.len_in + self.len_out
    }
}

/// Denoising steps T, parallel samples K and parallel efficiency β.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseSchedule {
    pub steps: u64,
    pub parallel_samples: u64,
    pub parallel_efficiency: f64,
}

impl DenoiseSchedule {
    pub fn new(steps: u64, parallel_samples: u64, parallel_efficiency: f64) -> Result<Self> {
        let s = Self {
            steps,
            parallel_samples,
            parallel_efficiency,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(CostError::InvalidSchedule("steps must be >= 1".into()));
        }
        if self.parallel_samples == 0 {
            return Err(CostError::InvalidSchedule(
                "parallel_samples must be >= 1".into(),
            ));
        }
        let beta = self.parallel_efficiency;
        if !(0.0..=1.0).contains(&beta) {
            return Err(CostError::InvalidSchedule(format!(
                "parallel_efficiency {beta} outside [0, 1]"
            )));
        }
        Ok(())
    }
}

/// Leading-order growth of a FLOP total in one sequence variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Asymptotic {
    pub variable: SeqVar,
    pub power: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeqVar {
    /// Full length L (DLM).
    L,
    /// Generated length L_out (LLM).
    LOut,
}

impl fmt::Display for Asymptotic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let var = match self.variable {
            SeqVar::L => "L",
            SeqVar::LOut => "L_out",
        };
        write!(f, "O({var}^{})", self.power)
    }
}

/// FLOP breakdown of one forward computation.
///
/// `f_sa`, `f_mlp` and `f_block` describe one transformer block at the length
/// the block is evaluated at; `f_blocks` is all block work and `f_others` the
/// embedding and output projection work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopsReport<C> {
    pub f_sa: C,
    pub f_mlp: C,
    pub f_block: C,
    pub f_blocks: C,
    pub f_others: C,
    pub f_total: C,
    pub asymptotic: Asymptotic,
}

/// Memory terms (parameter counts) that differ between the two model kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemoryTerms<C> {
    pub kv_cache: C,
    pub act_mhsa: C,
    pub act_ffn: C,
    pub total: C,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Dlm,
    Llm,
}

/// Which dominant-activation regime a (shape, sequence) pair falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    /// 4D ≥ L·H: FFN activations dominate on both sides.
    FfnDominated = 1,
    /// L·H > 4D ≥ L_in·H: DLM attention dominates, LLM FFN dominates.
    MixedDominance = 2,
    /// L_in·H > 4D: attention dominates on both sides.
    AttentionDominated = 3,
}

impl Regime {
    pub fn number(self) -> u8 {
        self as u8
    }
}

/// Memory-constrained parallel-sample ratio K_DLM / K_LLM.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchRatio<C: Count> {
    pub regime: Regime,
    pub ratio: Ratio<C>,
    /// Strict lower bound on `ratio` in this regime: N/2 in regime 1,
    /// 2·D·N/(H·L) in regimes 2 and 3 (16 and 2D/L at N = H = 32).
    pub lower_bound: Ratio<C>,
}

impl<C: Count> BatchRatio<C> {
    pub fn ratio_f64(&self) -> f64 {
        ratio_to_f64(&self.ratio)
    }

    pub fn lower_bound_f64(&self) -> f64 {
        ratio_to_f64(&self.lower_bound)
    }
}

pub fn ratio_to_f64<C: Count>(r: &Ratio<C>) -> f64 {
    let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
    let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
    n / d
}

/// Latency scale factors (not seconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatencyOrders<F> {
    /// K^β · L² · T
    pub flops_order: F,
    /// K^β · L · T, the ideal-parallel wall-clock order.
    pub parallel_latency_order: F,
}

/// Coefficient m in the output-projection term 2·L·(D + m·E)·V.
pub const DEFAULT_OTHERS_VOCAB_MULTIPLIER: u64 = 2;

/// Cost calculator. The only tunable is the output-projection multiplier,
/// which is printed inconsistently (2 vs 4) in the derivations it follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CostModel {
    pub others_vocab_multiplier: u64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            others_vocab_multiplier: DEFAULT_OTHERS_VOCAB_MULTIPLIER,
        }
    }
}

fn lift<C: Count>(v: u64) -> Result<C> {
    C::from_u64(v).ok_or(CostError::Overflow)
}

/// Checked product of machine integers in `C`.
fn prod<C: Count>(factors: &[u64]) -> Result<C> {
    factors.iter().try_fold(C::one(), |acc, &f| {
        acc.checked_mul(&lift::<C>(f)?).ok_or(CostError::Overflow)
    })
}

fn mul<C: Count>(a: &C, b: &C) -> Result<C> {
    a.checked_mul(b).ok_or(CostError::Overflow)
}

fn add<C: Count>(a: &C, b: &C) -> Result<C> {
    a.checked_add(b).ok_or(CostError::Overflow)
}

fn sum<C: Count>(terms: &[C]) -> Result<C> {
    terms.iter().try_fold(C::zero(), |acc, t| add(&acc, t))
}

impl CostModel {
    /// One DLM denoising step over a length-`len` sequence.
    pub fn dlm_step_flops<C: Count>(
        &self,
        shape: &TransformerShape,
        len: u64,
    ) -> Result<FlopsReport<C>> {
        shape.validate()?;
        if len == 0 {
            return Err(CostError::InvalidSequence("L must be >= 1".into()));
        }
        let (d, e, n, v) = (
            shape.model_dim,
            shape.embed_dim,
            shape.num_blocks,
            shape.vocab_size,
        );
        let dh = shape.head_dim();
        let f_sa = add(&prod(&[8, len, d, d])?, &prod(&[4, len, len, dh])?)?;
        let f_mlp = prod(&[16, len, d, d])?;
        let f_block = add(&f_sa, &f_mlp)?;
        let f_blocks = mul(&lift(n)?, &f_block)?;
        let inner = e
            .checked_mul(self.others_vocab_multiplier)
            .and_then(|x| x.checked_add(d))
            .ok_or(CostError::Overflow)?;
        let f_others = add(&prod(&[2, len, d, e])?, &prod(&[2, len, inner, v])?)?;
        let f_total = add(&f_blocks, &f_others)?;
        Ok(FlopsReport {
            f_sa,
            f_mlp,
            f_block,
            f_blocks,
            f_others,
            f_total,
            asymptotic: Asymptotic {
                variable: SeqVar::L,
                power: 2,
            },
        })
    }

    /// K · T · F_step.
    pub fn dlm_total_flops<C: Count>(
        &self,
        shape: &TransformerShape,
        len: u64,
        schedule: &DenoiseSchedule,
    ) -> Result<C> {
        schedule.validate()?;
        let step = self.dlm_step_flops::<C>(shape, len)?;
        let scale = prod::<C>(&[schedule.parallel_samples, schedule.steps])?;
        mul(&scale, &step.f_total)
    }

    /// Autoregressive generation of `len_out` tokens after a `len_in` prompt.
    ///
    /// Without a KV cache every decode step re-runs all blocks at the final
    /// length L_in + L_out. With a cache the prompt is prefilled once and each
    /// decode step runs the blocks on one token against L cached positions.
    pub fn llm_total_flops<C: Count>(
        &self,
        shape: &TransformerShape,
        seq: &SequenceProfile,
        kv_cache: bool,
    ) -> Result<FlopsReport<C>> {
        shape.validate()?;
        seq.validate()?;
        let (d, n, v) = (shape.model_dim, shape.num_blocks, shape.vocab_size);
        let dh = shape.head_dim();
        let (lin, lout) = (seq.len_in, seq.len_out);
        let l = seq.total();

        let f_others = add(&prod(&[2, lin, d])?, &prod(&[2, lout, d, v])?)?;

        let (f_sa, f_mlp, f_blocks, power) = if kv_cache {
            let f_sa = add(&prod(&[8, d, d])?, &prod(&[4, l, dh])?)?;
            let f_mlp = prod(&[16, d, d])?;
            let per_token = add(&f_sa, &f_mlp)?;
            let decode = mul(&prod(&[lout, n])?, &per_token)?;
            let prefill = add(
                &prod(&[24, n, lin, d, d])?,
                &prod(&[4, n, lin, lin, dh])?,
            )?;
            (f_sa, f_mlp, add(&decode, &prefill)?, 2)
        } else {
            let f_sa = add(&prod(&[8, l, d, d])?, &prod(&[4, l, l, dh])?)?;
            let f_mlp = prod(&[16, l, d, d])?;
            let block = add(&f_sa, &f_mlp)?;
            let blocks = mul(&prod(&[lout, n])?, &block)?;
            (f_sa, f_mlp, blocks, 3)
        };
        let f_block = add(&f_sa, &f_mlp)?;
        let f_total = add(&f_blocks, &f_others)?;
        Ok(FlopsReport {
            f_sa,
            f_mlp,
            f_block,
            f_blocks,
            f_others,
            f_total,
            asymptotic: Asymptotic {
                variable: SeqVar::LOut,
                power,
            },
        })
    }
}

pub fn dlm_step_flops<C: Count>(shape: &TransformerShape, len: u64) -> Result<FlopsReport<C>> {
    CostModel::default().dlm_step_flops(shape, len)
}

pub fn dlm_total_flops<C: Count>(
    shape: &TransformerShape,
    len: u64,
    schedule: &DenoiseSchedule,
) -> Result<C> {
    CostModel::default().dlm_total_flops(shape, len, schedule)
}

pub fn llm_total_flops<C: Count>(
    shape: &TransformerShape,
    seq: &SequenceProfile,
    kv_cache: bool,
) -> Result<FlopsReport<C>> {
    CostModel::default().llm_total_flops(shape, seq, kv_cache)
}

/// FLOP and ideal-parallel latency orders of a DLM generating K samples of
/// length `len` in T steps.
pub fn dlm_latency_orders<F: Real>(len: u64, schedule: &DenoiseSchedule) -> Result<LatencyOrders<F>> {
    schedule.validate()?;
    if len == 0 {
        return Err(CostError::InvalidSequence("L must be >= 1".into()));
    }
    let lift = |v: u64| F::from_u64(v).ok_or(CostError::Overflow);
    let beta = F::from_f64(schedule.parallel_efficiency).ok_or(CostError::Overflow)?;
    let k_beta = lift(schedule.parallel_samples)?.powf(beta);
    let l = lift(len)?;
    let t = lift(schedule.steps)?;
    let parallel_latency_order = k_beta * l * t;
    Ok(LatencyOrders {
        flops_order: parallel_latency_order * l,
        parallel_latency_order,
    })
}

/// Activation and KV-cache memory for K parallel samples.
///
/// LLM: cache 2·N·K·D·L, attention K·L_in²·H, FFN 4·K·L_in·D.
/// DLM: no cache, attention K·L²·H, FFN 4·K·L·D, with L = L_in + L_out.
pub fn memory_terms<C: Count>(
    shape: &TransformerShape,
    seq: &SequenceProfile,
    samples: u64,
    kind: ModelKind,
) -> Result<MemoryTerms<C>> {
    shape.validate()?;
    seq.validate()?;
    if samples == 0 {
        return Err(CostError::InvalidSchedule("K must be >= 1".into()));
    }
    let (d, h, n) = (shape.model_dim, shape.num_heads, shape.num_blocks);
    let (lin, l) = (seq.len_in, seq.total());
    let (kv_cache, act_mhsa, act_ffn): (C, C, C) = match kind {
        ModelKind::Llm => (
            prod(&[2, n, samples, d, l])?,
            prod(&[samples, lin, lin, h])?,
            prod(&[4, samples, lin, d])?,
        ),
        ModelKind::Dlm => (
            C::zero(),
            prod(&[samples, l, l, h])?,
            prod(&[4, samples, l, d])?,
        ),
    };
    let total = sum(&[kv_cache.clone(), act_mhsa.clone(), act_ffn.clone()])?;
    Ok(MemoryTerms {
        kv_cache,
        act_mhsa,
        act_ffn,
        total,
    })
}

/// Select the dominant-activation regime; equalities go to the lower regime.
pub fn regime_of(shape: &TransformerShape, seq: &SequenceProfile) -> Result<Regime> {
    let four_d = 4u128 * shape.model_dim as u128;
    let lh = seq.total() as u128 * shape.num_heads as u128;
    let lin_h = seq.len_in as u128 * shape.num_heads as u128;
    Ok(if four_d >= lh {
        Regime::FfnDominated
    } else if four_d >= lin_h {
        Regime::MixedDominance
    } else {
        Regime::AttentionDominated
    })
}

/// How many more parallel samples a DLM fits than an LLM in the same memory.
pub fn batch_capacity_ratio<C: Count>(
    shape: &TransformerShape,
    seq: &SequenceProfile,
) -> Result<BatchRatio<C>> {
    shape.validate()?;
    seq.validate()?;
    if seq.len_in == 0 {
        return Err(CostError::InvalidSequence(
            "len_in must be >= 1 for the batch ratio".into(),
        ));
    }
    let (d, h, n) = (shape.model_dim, shape.num_heads, shape.num_blocks);
    let (lin, l) = (seq.len_in, seq.total());
    let regime = regime_of(shape, seq)?;
    // Shared LLM cache term 2·D·N·L appears in regimes 2 and 3.
    let (num, den) = match regime {
        Regime::FfnDominated => (
            add(&prod::<C>(&[2, lin])?, &prod(&[n, l])?)?,
            prod::<C>(&[2, l])?,
        ),
        Regime::MixedDominance => (
            add(&prod::<C>(&[4, lin, d])?, &prod(&[2, d, n, l])?)?,
            prod::<C>(&[h, l, l])?,
        ),
        Regime::AttentionDominated => (
            add(&prod::<C>(&[lin, lin, h])?, &prod(&[2, d, n, l])?)?,
            prod::<C>(&[h, l, l])?,
        ),
    };
    let lower_bound = match regime {
        Regime::FfnDominated => Ratio::new(lift(n)?, lift(2)?),
        _ => Ratio::new(prod(&[2, d, n])?, prod(&[h, l])?),
    };
    Ok(BatchRatio {
        regime,
        ratio: Ratio::new(num, den),
        lower_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;

    fn tiny() -> TransformerShape {
        TransformerShape::new(2, 2, 1, 1, 1).unwrap()
    }

    #[test]
    fn tiny_step_breakdown() {
        let r = dlm_step_flops::<u64>(&tiny(), 1).unwrap();
        assert_eq!(r.f_sa, 40);
        assert_eq!(r.f_mlp, 64);
        assert_eq!(r.f_block, 104);
        assert_eq!(r.f_blocks, 104);
        assert_eq!(r.f_others, 20);
        assert_eq!(r.f_total, 124);
    }

    #[test]
    fn reference_shape_attention_term() {
        let r = dlm_step_flops::<u128>(&TransformerShape::REFERENCE, 4096).unwrap();
        let l: u128 = 4096;
        let d: u128 = 4096;
        assert_eq!(r.f_sa, 8 * l * d * d + 4 * l * l * d / 32);
    }

    #[test]
    fn doubling_blocks_doubles_block_work_only() {
        let base = TransformerShape::new(64, 48, 4, 3, 100).unwrap();
        let doubled = TransformerShape {
            num_blocks: 6,
            ..base
        };
        let a = dlm_step_flops::<u64>(&base, 17).unwrap();
        let b = dlm_step_flops::<u64>(&doubled, 17).unwrap();
        assert_eq!(b.f_blocks, 2 * a.f_blocks);
        assert_eq!(b.f_others, a.f_others);
    }

    #[test]
    fn total_is_k_times_t_times_step() {
        let one = DenoiseSchedule::new(1, 1, 0.5).unwrap();
        let eight = DenoiseSchedule::new(8, 1, 0.5).unwrap();
        let eight_five = DenoiseSchedule::new(8, 5, 0.5).unwrap();
        assert_eq!(dlm_total_flops::<u64>(&tiny(), 1, &one).unwrap(), 124);
        assert_eq!(dlm_total_flops::<u64>(&tiny(), 1, &eight).unwrap(), 992);
        assert_eq!(dlm_total_flops::<u64>(&tiny(), 1, &eight_five).unwrap(), 5 * 992);
    }

    #[test]
    fn zero_length_and_bad_shapes_rejected() {
        assert!(matches!(
            dlm_step_flops::<u64>(&tiny(), 0),
            Err(CostError::InvalidSequence(_))
        ));
        assert!(TransformerShape::new(10, 4, 3, 1, 1).is_err());
        assert!(TransformerShape::new(0, 4, 1, 1, 1).is_err());
        assert!(SequenceProfile::new(3, 0).is_err());
    }

    #[test]
    fn overflow_is_reported_not_wrapped() {
        let big = TransformerShape::new(1 << 20, 1 << 20, 1, 1 << 10, 1 << 20).unwrap();
        assert_eq!(
            dlm_step_flops::<u64>(&big, 1 << 16),
            Err(CostError::Overflow)
        );
        assert!(dlm_step_flops::<BigUint>(&big, 1 << 16).is_ok());
    }

    #[test]
    fn latency_orders() {
        let s = DenoiseSchedule::new(8, 1, 0.7).unwrap();
        let o = dlm_latency_orders::<f64>(64, &s).unwrap();
        assert_eq!(o.flops_order, 64.0 * 64.0 * 8.0);
        assert_eq!(o.parallel_latency_order, 64.0 * 8.0);

        let perfect = DenoiseSchedule::new(8, 16, 0.0).unwrap();
        let p = dlm_latency_orders::<f64>(64, &perfect).unwrap();
        assert_eq!(p, o);

        let half = DenoiseSchedule::new(8, 16, 0.5).unwrap();
        let h = dlm_latency_orders::<f32>(64, &half).unwrap();
        assert_eq!(h.parallel_latency_order, 2048.0);

        assert!(DenoiseSchedule::new(8, 16, 1.5).is_err());
        let bad = DenoiseSchedule {
            steps: 8,
            parallel_samples: 16,
            parallel_efficiency: -0.1,
        };
        assert!(dlm_latency_orders::<f64>(64, &bad).is_err());
    }

    #[test]
    fn llm_tiny_kv_cache_terms() {
        // (2DV + 24ND²)L_out + (2 + 24ND)·D·L_in + 4N(D/H)(L_in² + L_out² + L_in·L_out)
        let seq = SequenceProfile::new(1, 1).unwrap();
        let r = llm_total_flops::<u64>(&tiny(), &seq, true).unwrap();
        let expected = (2 * 2 + 24 * 4) + (2 + 24 * 2) * 2 + 4 * 2 * 3;
        assert_eq!(r.f_total, expected);
        assert_eq!(r.asymptotic.to_string(), "O(L_out^2)");
        let full = llm_total_flops::<u64>(&tiny(), &seq, false).unwrap();
        assert_eq!(full.asymptotic.to_string(), "O(L_out^3)");
    }

    #[test]
    fn memory_plug_in() {
        let shape = TransformerShape::new(1, 1, 1, 1, 1).unwrap();
        let seq = SequenceProfile::new(1, 1).unwrap();
        let m = memory_terms::<u64>(&shape, &seq, 1, ModelKind::Llm).unwrap();
        assert_eq!((m.kv_cache, m.act_mhsa, m.act_ffn, m.total), (4, 1, 4, 9));
        let d1 = memory_terms::<u64>(&shape, &seq, 1, ModelKind::Dlm).unwrap();
        let d2 = memory_terms::<u64>(&shape, &seq, 2, ModelKind::Dlm).unwrap();
        assert_eq!(d1.kv_cache, 0);
        assert_eq!(d2.total, 2 * d1.total);
    }

    #[test]
    fn batch_ratio_worked_cases() {
        let shape = TransformerShape::REFERENCE;
        let r1 = batch_capacity_ratio::<u64>(&shape, &SequenceProfile::new(16, 16).unwrap()).unwrap();
        assert_eq!(r1.regime, Regime::FfnDominated);
        assert_eq!(r1.ratio, Ratio::new(1056, 64));
        assert_eq!(r1.ratio_f64(), 16.5);
        assert_eq!(r1.lower_bound_f64(), 16.0);

        let r3 =
            batch_capacity_ratio::<u64>(&shape, &SequenceProfile::new(1024, 1024).unwrap()).unwrap();
        assert_eq!(r3.regime, Regime::AttentionDominated);
        assert_eq!(r3.ratio, Ratio::new(570_425_344, 134_217_728));
        assert_eq!(r3.ratio_f64(), 4.25);
        assert_eq!(r3.lower_bound_f64(), 4.0);
    }

    #[test]
    fn regime_ties_go_low() {
        // 4D = L·H exactly: 4·32 = 4·32
        let shape = TransformerShape::new(32, 32, 4, 32, 10).unwrap();
        let seq = SequenceProfile::new(16, 16).unwrap();
        assert_eq!(regime_of(&shape, &seq).unwrap(), Regime::FfnDominated);
        // 4D = L_in·H exactly with L·H > 4D
        let seq = SequenceProfile::new(32, 1).unwrap();
        assert_eq!(regime_of(&shape, &seq).unwrap(), Regime::MixedDominance);
        let seq = SequenceProfile::new(33, 1).unwrap();
        assert_eq!(regime_of(&shape, &seq).unwrap(), Regime::AttentionDominated);
    }
}
