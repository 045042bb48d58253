use std::io::Write;

use clap::Subcommand;
use propeval_core::harness::HarnessError;
use propeval_core::info_bound::{
    entropy_base, error_bound_report, fano_min_error, gap_sweep, independence_gap, total_loss,
    DiscretePmf, FanoInput, InfoError, FANO_TOLERANCE,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Subcommand)]
pub enum BoundCommand {
    /// Smallest error probability allowed by Fano's inequality.
    Fano {
        /// Conditional entropy C in bits.
        #[arg(long, conflicts_with_all = ["h_ideal", "gaps"], required_unless_present = "h_ideal")]
        entropy: Option<f64>,
        /// Ideal conditional entropy; the gaps are added to it.
        #[arg(long, requires = "gaps")]
        h_ideal: Option<f64>,
        /// Comma-separated per-step independence gaps in bits.
        #[arg(long, value_delimiter = ',')]
        gaps: Option<Vec<f64>>,
        /// Alphabet size |X|.
        #[arg(long)]
        alphabet: u64,
        #[arg(long)]
        csv: bool,
    },
    /// Entropy of a pmf given as comma-separated probabilities.
    Entropy {
        #[arg(long, value_delimiter = ',', required = true)]
        probs: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        base: f64,
    },
    /// Independence gap Σ H(marginals) − H(joint) of a joint pmf.
    Gap {
        /// Alphabet size per position, e.g. 2,2.
        #[arg(long, value_delimiter = ',', required = true)]
        dims: Vec<usize>,
        /// Row-major joint probabilities.
        #[arg(long, value_delimiter = ',', required = true)]
        probs: Vec<f64>,
    },
    /// Mean independence gap of random joint pmfs by sequence length.
    Sweep {
        #[arg(long, default_value_t = 4)]
        max_positions: usize,
        #[arg(long, default_value_t = 3)]
        vocab: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Every bound error stems from the arguments given.
fn classify(e: InfoError) -> HarnessError {
    HarnessError::Usage(e.to_string())
}

pub fn run(cmd: &BoundCommand, out: &mut dyn Write) -> Result<(), HarnessError> {
    let text = match cmd {
        BoundCommand::Fano {
            entropy,
            h_ideal,
            gaps,
            alphabet,
            csv,
        } => {
            let (c, e_min) = match (entropy, h_ideal) {
                (Some(c), _) => (
                    *c,
                    fano_min_error(
                        FanoInput {
                            cond_entropy: *c,
                            alphabet_size: *alphabet,
                        },
                        FANO_TOLERANCE,
                    )
                    .map_err(classify)?,
                ),
                (None, Some(h)) => {
                    let ledger = total_loss(gaps.as_deref().unwrap_or(&[])).map_err(classify)?;
                    (h + ledger.total, error_bound_report(*h, &ledger, *alphabet).map_err(classify)?)
                }
                (None, None) => return Err(HarnessError::Usage("--entropy or --h-ideal is required".into())),
            };
            if *csv {
                format!("cond_entropy,alphabet,e_min\n{c},{alphabet},{e_min:.12}\n")
            } else {
                format!("C = {c} bits, |X| = {alphabet}: E_min = {e_min:.12}\n")
            }
        }
        BoundCommand::Entropy { probs, base } => {
            let pmf = DiscretePmf::univariate(probs.clone()).map_err(classify)?;
            format!("{:.12}\n", entropy_base(&pmf, *base).map_err(classify)?)
        }
        BoundCommand::Gap { dims, probs } => {
            let pmf = DiscretePmf::new(dims.clone(), probs.clone()).map_err(classify)?;
            format!("{:.12}\n", independence_gap(&pmf).map_err(classify)?)
        }
        BoundCommand::Sweep {
            max_positions,
            vocab,
            samples,
            seed,
        } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let points = gap_sweep(&mut rng, *max_positions, *vocab, *samples).map_err(classify)?;
            let mut s = String::from("positions,vocab,samples,mean_gap,max_gap\n");
            for p in points {
                s.push_str(&format!(
                    "{},{},{},{:.9},{:.9}\n",
                    p.positions, p.vocab, p.samples, p.mean_gap, p.max_gap
                ));
            }
            s
        }
    };
    out.write_all(text.as_bytes()).map_err(|e| HarnessError::Io {
        path: "<stdout>".into(),
        source: e,
    })
}
