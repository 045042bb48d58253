use std::collections::HashSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    canonical_solutions, proposer_prompt, verify_step, Game24Error, Quad, SolutionRecord, Solver,
    StepThought,
};

/// One dataset line: a quad and one canonical solution of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub quad: Quad,
    pub steps: Vec<String>,
    pub expression: String,
    pub canonical_key: String,
}

impl From<&SolutionRecord> for DatasetEntry {
    fn from(r: &SolutionRecord) -> Self {
        Self {
            quad: r.quad,
            steps: r.steps.iter().map(|s| s.raw_text.clone()).collect(),
            expression: r.expression.clone(),
            canonical_key: r.canonical_key.clone(),
        }
    }
}

/// Counts from one dataset build.
///
/// `canonical_solutions` is the dataset size (one entry per quad and
/// canonical key). The other solution counts use coarser or finer
/// equivalences and are reported for comparison.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetReport {
    pub max_value: u32,
    pub multisets: u64,
    pub solvable_multisets: u64,
    /// Every DFS derivation, including those that differ only in which copy
    /// of a repeated number was used.
    pub raw_solutions: u64,
    /// Distinct step sequences per quad.
    pub distinct_step_paths: u64,
    /// Distinct fully parenthesized expressions per quad.
    pub distinct_expressions: u64,
    pub canonical_solutions: u64,
}

/// Number of 4-element multisets over `1..=max_value`: C(max_value + 3, 4).
pub fn multiset_count(max_value: u32) -> u64 {
    let n = max_value as u64 + 3;
    n * (n - 1) * (n - 2) * (n - 3) / 24
}

/// All quads `a ≤ b ≤ c ≤ d` in lexicographic order.
pub fn all_quads(max_value: u32) -> Vec<Quad> {
    let mut out = Vec::with_capacity(multiset_count(max_value) as usize);
    for a in 1..=max_value {
        for b in a..=max_value {
            for c in b..=max_value {
                for d in c..=max_value {
                    out.push(Quad::new([a, b, c, d], max_value).expect("in range"));
                }
            }
        }
    }
    out
}

struct QuadResult {
    raw: u64,
    paths: u64,
    expressions: u64,
    canonical: Vec<SolutionRecord>,
}

fn analyze(solver: &Solver, quad: &Quad) -> QuadResult {
    let raw = solver.solve(quad);
    let paths: HashSet<Vec<&str>> = raw
        .iter()
        .map(|r| r.steps.iter().map(|s| s.raw_text.as_str()).collect())
        .collect();
    let expressions: HashSet<&str> = raw.iter().map(|r| r.expression.as_str()).collect();
    QuadResult {
        raw: raw.len() as u64,
        paths: paths.len() as u64,
        expressions: expressions.len() as u64,
        canonical: canonical_solutions(&raw),
    }
}

const CHUNK: usize = 512;

/// Enumerate every multiset, solve it, and stream one JSON line per canonical
/// solution to `sink` in sorted quad order. Work is parallel per chunk;
/// output order does not depend on scheduling.
pub fn generate_dataset(
    max_value: u32,
    mut sink: Option<&mut dyn Write>,
) -> Result<DatasetReport, Game24Error> {
    if !(1..=100).contains(&max_value) {
        return Err(Game24Error::MaxValue(max_value));
    }
    let solver = Solver::default();
    let quads = all_quads(max_value);
    let mut report = DatasetReport {
        max_value,
        multisets: quads.len() as u64,
        ..DatasetReport::default()
    };
    for chunk in quads.chunks(CHUNK) {
        let results: Vec<QuadResult> = chunk.par_iter().map(|q| analyze(&solver, q)).collect();
        for r in results {
            if r.raw > 0 {
                report.solvable_multisets += 1;
            }
            report.raw_solutions += r.raw;
            report.distinct_step_paths += r.paths;
            report.distinct_expressions += r.expressions;
            report.canonical_solutions += r.canonical.len() as u64;
            if let Some(w) = sink.as_mut() {
                for rec in &r.canonical {
                    let line = serde_json::to_string(&DatasetEntry::from(rec))
                        .map_err(|e| Game24Error::Io(e.to_string()))?;
                    writeln!(w, "{line}").map_err(|e| Game24Error::Io(e.to_string()))?;
                }
            }
        }
    }
    if let Some(w) = sink.as_mut() {
        w.flush().map_err(|e| Game24Error::Io(e.to_string()))?;
    }
    Ok(report)
}

/// Input/output pair for teaching a proposer one step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub quad: Quad,
    pub preceding: Vec<String>,
    pub input: String,
    pub output: String,
}

/// The proposer prompt for the quad followed by the steps taken so far.
pub fn step_prompt(quad: &Quad, preceding: &[String]) -> String {
    let mut prompt = proposer_prompt::<i64>(&quad.to_state());
    if !preceding.is_empty() {
        prompt.push_str("\nSteps so far:");
        for s in preceding {
            prompt.push('\n');
            prompt.push_str(s);
        }
    }
    prompt
}

/// Three examples along the first canonical solution of `quad`.
pub fn make_training_examples(quad: &Quad) -> Result<Vec<TrainingExample>, Game24Error> {
    let solver = Solver::default();
    let records = canonical_solutions(&solver.solve(quad));
    let path = records.first().ok_or(Game24Error::UnsolvableQuad(*quad))?;
    let mut state = quad.to_state::<i64>();
    let mut preceding = Vec::new();
    let mut out = Vec::with_capacity(path.steps.len());
    for step in &path.steps {
        debug_assert!(verify_step(&state, step).is_empty());
        debug_assert!(on_ground_truth(&solver, &state, step));
        out.push(TrainingExample {
            quad: *quad,
            preceding: preceding.clone(),
            input: step_prompt(quad, &preceding),
            output: step.raw_text.clone(),
        });
        preceding.push(step.raw_text.clone());
        state = step.claimed_remaining.clone();
    }
    Ok(out)
}

fn on_ground_truth(solver: &Solver, state: &[num_rational::Ratio<i64>], step: &StepThought) -> bool {
    solver
        .ground_truth_next_thoughts(state)
        .iter()
        .any(|g| g.raw_text == step.raw_text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game24::{verify_solution_text, ParseError};

    #[test]
    fn multiset_counts() {
        assert_eq!(multiset_count(1), 1);
        assert_eq!(multiset_count(30), 40_920);
        assert_eq!(all_quads(5).len() as u64, multiset_count(5));
    }

    #[test]
    fn max_value_one_is_empty() {
        let mut buf = Vec::new();
        let r = generate_dataset(1, Some(&mut buf)).unwrap();
        assert_eq!((r.multisets, r.solvable_multisets, r.canonical_solutions), (1, 0, 0));
        assert!(buf.is_empty());
        assert!(generate_dataset(0, None).is_err());
        assert!(generate_dataset(101, None).is_err());
    }

    #[test]
    fn small_dataset_lines_verify() -> Result<(), ParseError> {
        let mut buf = Vec::new();
        let r = generate_dataset(6, Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let entries: Vec<DatasetEntry> =
            text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(entries.len() as u64, r.canonical_solutions);
        assert!(r.raw_solutions >= r.distinct_step_paths);
        assert!(r.distinct_expressions >= r.canonical_solutions);
        for e in &entries {
            let steps: Vec<&str> = e.steps.iter().map(String::as_str).collect();
            assert!(verify_solution_text::<i64>(&e.quad, &steps).is_empty());
        }
        assert!(entries.windows(2).all(|w| w[0].quad <= w[1].quad));
        Ok(())
    }

    #[test]
    fn training_examples_chain() {
        let q = Quad::new([1, 14, 16, 25], 30).unwrap();
        let ex = make_training_examples(&q).unwrap();
        assert_eq!(ex.len(), 3);
        assert!(ex[0].preceding.is_empty());
        assert_eq!(ex[0].input, proposer_prompt::<i64>(&q.to_state()));
        let outs: Vec<&str> = ex.iter().map(|e| e.output.as_str()).collect();
        assert!(verify_solution_text::<i64>(&q, &outs).is_empty());
        assert_eq!(ex[2].preceding.len(), 2);

        let bad = Quad::new([1, 1, 1, 1], 30).unwrap();
        assert_eq!(make_training_examples(&bad), Err(Game24Error::UnsolvableQuad(bad)));
    }
}
