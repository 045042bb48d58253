//! Entropy, independence-gap accounting and the Fano minimum-error solver.
//!
//! All quantities are in bits unless a base is passed explicitly.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::scalar::{real, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InfoError {
    #[error("pmf is not normalized: mass sums to {0}")]
    Unnormalized(f64),
    #[error("pmf has a negative or non-finite weight at index {0}")]
    InvalidWeight(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("negative information gap {value} at step {index}")]
    NegativeGap { index: usize, value: f64 },
    #[error("conditional entropy {entropy} bits exceeds log2({alphabet}) = {capacity} bits")]
    InfeasibleEntropy {
        entropy: f64,
        alphabet: u64,
        capacity: f64,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, InfoError>;

/// Normalization slack for pmfs.
pub const PMF_TOLERANCE: f64 = 1e-12;
/// Default bisection tolerance for [`fano_min_error`].
pub const FANO_TOLERANCE: f64 = 1e-12;
pub const FANO_MAX_ITERATIONS: usize = 200;

/// Joint distribution over `dims.len()` positions, position i taking
/// `dims[i]` symbols. Probabilities are stored row-major with the last
/// position varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePmf<F> {
    dims: Vec<usize>,
    probs: Vec<F>,
}

impl<F: Real> DiscretePmf<F> {
    pub fn new(dims: Vec<usize>, probs: Vec<F>) -> Result<Self> {
        if dims.is_empty() || dims.iter().any(|&d| d == 0) {
            return Err(InfoError::Dimension(
                "need at least one position and every vocabulary >= 1".into(),
            ));
        }
        let size = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| InfoError::Dimension("outcome space too large".into()))?;
        if size != probs.len() {
            return Err(InfoError::Dimension(format!(
                "{} weights for an outcome space of size {size}",
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|p| !p.is_finite() || *p < F::zero()) {
            return Err(InfoError::InvalidWeight(i));
        }
        let mass: F = probs.iter().copied().sum();
        let mass_f = mass.to_f64().unwrap_or(f64::NAN);
        if (mass_f - 1.0).abs() > PMF_TOLERANCE.max(F::epsilon().to_f64().unwrap() * 16.0) {
            return Err(InfoError::Unnormalized(mass_f));
        }
        Ok(Self { dims, probs })
    }

    /// A single-position distribution.
    pub fn univariate(probs: Vec<F>) -> Result<Self> {
        Self::new(vec![probs.len()], probs)
    }

    /// Normalize arbitrary non-negative weights into a pmf.
    pub fn from_weights(dims: Vec<usize>, weights: Vec<F>) -> Result<Self> {
        if let Some(i) = weights
            .iter()
            .position(|p| !p.is_finite() || *p < F::zero())
        {
            return Err(InfoError::InvalidWeight(i));
        }
        let mass: F = weights.iter().copied().sum();
        if mass <= F::zero() {
            return Err(InfoError::Unnormalized(0.0));
        }
        Self::new(dims, weights.into_iter().map(|w| w / mass).collect())
    }

    /// Product of independent per-position marginals.
    pub fn product(marginals: &[Vec<F>]) -> Result<Self> {
        let dims: Vec<usize> = marginals.iter().map(Vec::len).collect();
        let mut probs = vec![F::one()];
        for m in marginals {
            probs = probs
                .iter()
                .flat_map(|&p| m.iter().map(move |&q| p * q))
                .collect();
        }
        Self::new(dims, probs)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn probs(&self) -> &[F] {
        &self.probs
    }

    pub fn positions(&self) -> usize {
        self.dims.len()
    }

    /// Marginal distribution of position `pos`.
    pub fn marginal(&self, pos: usize) -> Result<Vec<F>> {
        if pos >= self.dims.len() {
            return Err(InfoError::Dimension(format!(
                "position {pos} out of range for {} positions",
                self.dims.len()
            )));
        }
        let stride: usize = self.dims[pos + 1..].iter().product();
        let width = self.dims[pos];
        let mut out = vec![F::zero(); width];
        for (flat, &p) in self.probs.iter().enumerate() {
            out[(flat / stride) % width] = out[(flat / stride) % width] + p;
        }
        Ok(out)
    }
}

fn plogp<F: Real>(p: F) -> F {
    if p > F::zero() {
        -p * p.log2()
    } else {
        F::zero()
    }
}

/// Shannon entropy of raw weights in bits, 0·log 0 = 0.
pub fn entropy_of<F: Real>(probs: &[F]) -> F {
    probs.iter().map(|&p| plogp(p)).sum()
}

/// Shannon entropy in bits.
pub fn entropy<F: Real>(pmf: &DiscretePmf<F>) -> F {
    entropy_of(&pmf.probs)
}

/// Shannon entropy in an arbitrary logarithm base.
pub fn entropy_base<F: Real>(pmf: &DiscretePmf<F>, base: F) -> Result<F> {
    if !(base > F::zero()) || base == F::one() {
        return Err(InfoError::InvalidArgument(format!(
            "logarithm base {base} must be positive and != 1"
        )));
    }
    Ok(entropy(pmf) / base.log2())
}

/// Binary entropy H_b(p) in bits.
pub fn binary_entropy<F: Real>(p: F) -> F {
    plogp(p) + plogp(F::one() - p)
}

/// Total correlation Σᵢ H(xᵢ) − H(x₁..x_L): the entropy overcounted when a
/// joint distribution is treated as a product of its marginals.
pub fn independence_gap<F: Real>(joint: &DiscretePmf<F>) -> Result<F> {
    let mut marginal_sum = F::zero();
    for pos in 0..joint.positions() {
        marginal_sum = marginal_sum + entropy_of(&joint.marginal(pos)?);
    }
    Ok(marginal_sum - entropy(joint))
}

/// Per-step information gaps and their accumulated total.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossLedger<F> {
    pub per_step_gaps: Vec<F>,
    pub total: F,
}

/// Accumulate per-step gaps; entries must be ≥ 0 (1e-9 slack for roundoff).
pub fn total_loss<F: Real>(gaps: &[F]) -> Result<LossLedger<F>> {
    let slack: F = real(-1e-9);
    if let Some((index, g)) = gaps.iter().enumerate().find(|(_, g)| **g < slack || !g.is_finite()) {
        return Err(InfoError::NegativeGap {
            index,
            value: g.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(LossLedger {
        per_step_gaps: gaps.to_vec(),
        total: gaps.iter().copied().sum(),
    })
}

/// Conditional entropy C and alphabet size |X| for Fano's inequality.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FanoInput<F> {
    pub cond_entropy: F,
    pub alphabet_size: u64,
}

/// H_b(e) + e·log₂(|X| − 1), the Fano right-hand side.
pub fn fano_rhs<F: Real>(e: F, alphabet: u64) -> F {
    let extra = F::from_u64(alphabet - 1).unwrap().log2();
    binary_entropy(e) + e * extra
}

/// Smallest error probability E with H_b(E) + E·log₂(|X|−1) ≥ C.
///
/// The right-hand side is strictly increasing on [0, (|X|−1)/|X|] and reaches
/// log₂|X| at the top, so bisection on that interval finds the unique
/// crossing. The returned value satisfies the inequality and lies within
/// `tol` above the exact crossing.
pub fn fano_min_error<F: Real>(input: FanoInput<F>, tol: F) -> Result<F> {
    let FanoInput {
        cond_entropy: c,
        alphabet_size,
    } = input;
    if alphabet_size < 2 {
        return Err(InfoError::InvalidArgument(format!(
            "alphabet size {alphabet_size} must be >= 2"
        )));
    }
    if !(tol > F::zero()) {
        return Err(InfoError::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let capacity = F::from_u64(alphabet_size).unwrap().log2();
    let slack = F::epsilon() * real(64.0) * capacity.max(F::one());
    if !c.is_finite() || c < F::zero() || c > capacity + slack {
        if c < F::zero() {
            return Err(InfoError::InvalidArgument(format!(
                "conditional entropy {c} must be >= 0"
            )));
        }
        return Err(InfoError::InfeasibleEntropy {
            entropy: c.to_f64().unwrap_or(f64::NAN),
            alphabet: alphabet_size,
            capacity: capacity.to_f64().unwrap(),
        });
    }
    if c == F::zero() {
        return Ok(F::zero());
    }
    let size = F::from_u64(alphabet_size).unwrap();
    let top = (size - F::one()) / size;
    if fano_rhs(top, alphabet_size) <= c {
        // C at (or within roundoff of) capacity: only the uniform-error point works.
        return Ok(top);
    }
    let (mut lo, mut hi) = (F::zero(), top);
    for _ in 0..FANO_MAX_ITERATIONS {
        if hi - lo <= tol {
            break;
        }
        let mid = lo + (hi - lo) / real(2.0);
        if fano_rhs(mid, alphabet_size) >= c {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Lower bound on the final error probability given the ideal conditional
/// entropy and the accumulated independence loss.
pub fn error_bound_report<F: Real>(
    h_ideal: F,
    ledger: &LossLedger<F>,
    alphabet_size: u64,
) -> Result<F> {
    fano_min_error(
        FanoInput {
            cond_entropy: h_ideal + ledger.total,
            alphabet_size,
        },
        real(FANO_TOLERANCE),
    )
}

/// Mean independence gap of random joint pmfs at one sequence length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapSweepPoint {
    pub positions: usize,
    pub vocab: usize,
    pub samples: usize,
    pub mean_gap: f64,
    pub max_gap: f64,
}

/// Empirical independence gap of uniformly drawn (Dirichlet(1)) joint pmfs
/// for L = 1..=max_positions. Reported, not asserted: nothing forces the gap
/// to grow with L for arbitrary distributions.
pub fn gap_sweep<R: Rng>(
    rng: &mut R,
    max_positions: usize,
    vocab: usize,
    samples: usize,
) -> Result<Vec<GapSweepPoint>> {
    if max_positions == 0 || vocab == 0 || samples == 0 {
        return Err(InfoError::InvalidArgument(
            "positions, vocab and samples must all be >= 1".into(),
        ));
    }
    let mut out = Vec::with_capacity(max_positions);
    for positions in 1..=max_positions {
        let dims = vec![vocab; positions];
        let size = vocab.pow(positions as u32);
        let mut total = 0.0;
        let mut max_gap: f64 = 0.0;
        for _ in 0..samples {
            let pmf = random_pmf(rng, dims.clone(), size)?;
            let g = independence_gap(&pmf)?;
            total += g;
            max_gap = max_gap.max(g);
        }
        out.push(GapSweepPoint {
            positions,
            vocab,
            samples,
            mean_gap: total / samples as f64,
            max_gap,
        });
    }
    Ok(out)
}

/// Flat-Dirichlet joint pmf via normalized exponential draws.
pub fn random_pmf<R: Rng>(rng: &mut R, dims: Vec<usize>, size: usize) -> Result<DiscretePmf<f64>> {
    let weights: Vec<f64> = (0..size)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    DiscretePmf::from_weights(dims, weights)
}
