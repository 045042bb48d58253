use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use dashmap::DashMap;
use num_rational::Ratio;
use num_traits::Signed;

use super::{int_rat, render_rat, Op, Quad, StepThought, TARGET};
use crate::scalar::RatInt;

/// Which intermediate values the search may produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchRules {
    pub target: i64,
    pub allow_negative: bool,
    pub allow_fractions: bool,
}

impl Default for SearchRules {
    fn default() -> Self {
        Self {
            target: TARGET,
            allow_negative: true,
            allow_fractions: true,
        }
    }
}

impl SearchRules {
    fn admits<I: RatInt>(&self, v: &Ratio<I>) -> bool {
        (self.allow_negative || !v.is_negative()) && (self.allow_fractions || v.is_integer())
    }
}

/// Expression tree of a solution, used for display and dedup keys.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr<I: RatInt = i64> {
    Leaf(Ratio<I>),
    Node(Op, Arc<Expr<I>>, Arc<Expr<I>>),
}

impl<I: RatInt> Expr<I> {
    fn infix(&self, top: bool) -> String {
        match self {
            Expr::Leaf(v) => render_rat(v),
            Expr::Node(op, a, b) => {
                let s = format!("{}{}{}", a.infix(false), op, b.infix(false));
                if top {
                    s
                } else {
                    format!("({s})")
                }
            }
        }
    }

    /// Canonical key: operands of `+` and `*` chains are flattened across
    /// associativity and sorted; `-` and `/` keep operand order; no constant
    /// folding. Two expressions share a key iff they differ only by
    /// commutativity or associativity of `+`/`*`.
    pub fn canonical_key(&self) -> String {
        match self {
            Expr::Leaf(v) => render_rat(v),
            Expr::Node(op, a, b) if op.is_commutative() => {
                let mut parts = Vec::new();
                self.collect_chain(*op, &mut parts);
                parts.sort();
                format!("({})", parts.join(&op.symbol().to_string()))
            }
            Expr::Node(op, a, b) => format!("({}{}{})", a.canonical_key(), op, b.canonical_key()),
        }
    }

    fn collect_chain(&self, chain: Op, out: &mut Vec<String>) {
        match self {
            Expr::Node(op, a, b) if *op == chain => {
                a.collect_chain(chain, out);
                b.collect_chain(chain, out);
            }
            other => out.push(other.canonical_key()),
        }
    }

    /// Exact value, `None` on division by zero.
    pub fn eval(&self) -> Option<Ratio<I>> {
        match self {
            Expr::Leaf(v) => Some(v.clone()),
            Expr::Node(op, a, b) => op.apply(&a.eval()?, &b.eval()?),
        }
    }
}

impl<I: RatInt> fmt::Display for Expr<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.infix(true))
    }
}

/// One full derivation of the target from a quad.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SolutionRecord<I: RatInt = i64> {
    pub quad: Quad,
    pub steps: Vec<StepThought<I>>,
    pub expression: String,
    pub canonical_key: String,
}

/// A move on an ordered state: combine positions `i < j`, optionally with the
/// operands swapped (for `-` and `/`).
#[derive(Debug, Clone, Copy)]
struct Move {
    i: usize,
    j: usize,
    op: Op,
    swapped: bool,
}

const MOVES: [(Op, bool); 6] = [
    (Op::Add, false),
    (Op::Mul, false),
    (Op::Sub, false),
    (Op::Sub, true),
    (Op::Div, false),
    (Op::Div, true),
];

fn without<T: Clone>(state: &[T], i: usize, j: usize) -> Vec<T> {
    state
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i && *k != j)
        .map(|(_, v)| v.clone())
        .collect()
}

/// Exhaustive Game-of-24 search with a shared solvability memo.
///
/// `solve` enumerates every derivation by plain DFS. `is_solvable` is a
/// separate memoized early-exit search over sorted states; the two are kept
/// independent so they can cross-check each other.
pub struct Solver<I: RatInt = i64> {
    rules: SearchRules,
    target: Ratio<I>,
    memo: DashMap<Vec<Ratio<I>>, bool>,
}

impl<I: RatInt> Default for Solver<I> {
    fn default() -> Self {
        Self::new(SearchRules::default())
    }
}

impl<I: RatInt> fmt::Debug for Solver<I> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver")
            .field("rules", &self.rules)
            .field("memo_entries", &self.memo.len())
            .finish()
    }
}

impl<I: RatInt> Solver<I> {
    pub fn new(rules: SearchRules) -> Self {
        Self {
            rules,
            target: int_rat(rules.target),
            memo: DashMap::new(),
        }
    }

    pub fn rules(&self) -> SearchRules {
        self.rules
    }

    fn combine(&self, a: &Ratio<I>, b: &Ratio<I>, op: Op, swapped: bool) -> Option<Ratio<I>> {
        let v = if swapped { op.apply(b, a) } else { op.apply(a, b) }?;
        self.rules.admits(&v).then_some(v)
    }

    /// True iff some sequence of operations reduces `state` to the target.
    pub fn is_solvable(&self, state: &[Ratio<I>]) -> bool {
        match state.len() {
            0 => false,
            1 => state[0] == self.target,
            _ => {
                let mut key = state.to_vec();
                key.sort();
                if let Some(hit) = self.memo.get(&key).map(|r| *r) {
                    return hit;
                }
                let found = self.search_sorted(&key);
                self.memo.insert(key, found);
                found
            }
        }
    }

    fn search_sorted(&self, state: &[Ratio<I>]) -> bool {
        for i in 0..state.len() {
            for j in i + 1..state.len() {
                let rest = without(state, i, j);
                for &(op, swapped) in &MOVES {
                    if let Some(c) = self.combine(&state[i], &state[j], op, swapped) {
                        let mut next = rest.clone();
                        next.push(c);
                        if self.is_solvable(&next) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Every derivation of the target from `quad`, sorted by canonical key
    /// (then expression, then step text). Duplicate numbers produce repeated
    /// derivations; see [`canonical_solutions`].
    pub fn solve(&self, quad: &Quad) -> Vec<SolutionRecord<I>> {
        let start = quad.to_state::<I>();
        let mut path = Vec::with_capacity(3);
        let mut out = Vec::new();
        self.dfs(&start, &mut path, &mut |moves| {
            out.push(self.replay(quad, moves));
        });
        out.sort_by(|a, b| {
            (&a.canonical_key, &a.expression)
                .cmp(&(&b.canonical_key, &b.expression))
                .then_with(|| {
                    let ta = a.steps.iter().map(|s| s.raw_text.as_str());
                    let tb = b.steps.iter().map(|s| s.raw_text.as_str());
                    ta.cmp(tb)
                })
        });
        out
    }

    /// Number of raw derivations without materializing them.
    pub fn count_solutions(&self, quad: &Quad) -> usize {
        let mut n = 0;
        self.dfs(&quad.to_state::<I>(), &mut Vec::with_capacity(3), &mut |_| n += 1);
        n
    }

    fn dfs(&self, state: &[Ratio<I>], path: &mut Vec<Move>, hit: &mut dyn FnMut(&[Move])) {
        if state.len() == 1 {
            if state[0] == self.target {
                hit(path);
            }
            return;
        }
        for i in 0..state.len() {
            for j in i + 1..state.len() {
                let rest = without(state, i, j);
                for &(op, swapped) in &MOVES {
                    if let Some(c) = self.combine(&state[i], &state[j], op, swapped) {
                        let mut next = rest.clone();
                        next.push(c);
                        path.push(Move { i, j, op, swapped });
                        self.dfs(&next, path, hit);
                        path.pop();
                    }
                }
            }
        }
    }

    fn replay(&self, quad: &Quad, moves: &[Move]) -> SolutionRecord<I> {
        let mut nodes: Vec<(Ratio<I>, Arc<Expr<I>>)> = quad
            .to_state::<I>()
            .into_iter()
            .map(|v| (v.clone(), Arc::new(Expr::Leaf(v))))
            .collect();
        let mut steps = Vec::with_capacity(moves.len());
        for m in moves {
            let (a, b) = if m.swapped {
                (&nodes[m.j], &nodes[m.i])
            } else {
                (&nodes[m.i], &nodes[m.j])
            };
            let c = m.op.apply(&a.0, &b.0).expect("replayed move was valid");
            let expr = Arc::new(Expr::Node(m.op, a.1.clone(), b.1.clone()));
            let (av, bv) = (a.0.clone(), b.0.clone());
            let mut next = without(&nodes, m.i, m.j);
            next.push((c.clone(), expr));
            let remaining = next.iter().map(|n| n.0.clone()).collect();
            steps.push(StepThought::new(av, m.op, bv, c, remaining));
            nodes = next;
        }
        let root = &nodes[0].1;
        SolutionRecord {
            quad: *quad,
            steps,
            expression: root.to_string(),
            canonical_key: root.canonical_key(),
        }
    }

    /// Every single legal step from `state` (ordered operand pairs, all four
    /// operations), deduplicated by text, in enumeration order.
    pub fn all_next_steps(&self, state: &[Ratio<I>]) -> Vec<StepThought<I>> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for i in 0..state.len() {
            for j in 0..state.len() {
                if i == j {
                    continue;
                }
                for op in Op::ALL {
                    if let Some(step) = StepThought::from_state(state, i, j, op) {
                        if self.rules.admits(&step.claimed_result) && seen.insert(step.raw_text.clone())
                        {
                            out.push(step);
                        }
                    }
                }
            }
        }
        out
    }

    /// Single steps from `state` whose successor is still solvable.
    pub fn ground_truth_next_thoughts(&self, state: &[Ratio<I>]) -> Vec<StepThought<I>> {
        if state.len() < 2 {
            return Vec::new();
        }
        self.all_next_steps(state)
            .into_iter()
            .filter(|s| self.is_solvable(&s.claimed_remaining))
            .collect()
    }
}

/// Keep the first record of each canonical key. Idempotent.
pub fn canonical_solutions<I: RatInt>(records: &[SolutionRecord<I>]) -> Vec<SolutionRecord<I>> {
    let mut seen = HashSet::new();
    records
        .iter()
        .filter(|r| seen.insert(r.canonical_key.clone()))
        .cloned()
        .collect()
}

pub fn solve(quad: &Quad) -> Vec<SolutionRecord> {
    Solver::default().solve(quad)
}

pub fn is_solvable<I: RatInt>(state: &[Ratio<I>]) -> bool {
    Solver::<I>::default().is_solvable(state)
}

pub fn ground_truth_next_thoughts<I: RatInt>(state: &[Ratio<I>]) -> Vec<StepThought<I>> {
    Solver::<I>::default().ground_truth_next_thoughts(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    type R = Ratio<i64>;

    fn st(v: &[i64]) -> Vec<R> {
        v.iter().map(|&x| R::from(x)).collect()
    }

    fn quad(v: [u32; 4]) -> Quad {
        Quad::new(v, 30).unwrap()
    }

    #[test]
    fn solvability_examples() {
        assert!(is_solvable(&st(&[24])));
        assert!(!is_solvable(&st(&[1, 1, 1, 1])));
        assert!(is_solvable(&st(&[16, 25, 15])));
        assert!(!is_solvable::<i64>(&[]));
    }

    #[test]
    fn unsolvable_quad_has_no_solutions() {
        assert!(solve(&quad([1, 1, 1, 1])).is_empty());
    }

    #[test]
    fn fractional_solution_found() {
        let sols = solve(&quad([3, 3, 8, 8]));
        assert!(sols.iter().any(|s| s.expression == "8/(3-(8/3))"), "{:?}",
            sols.iter().map(|s| &s.expression).collect::<Vec<_>>());
        // Nothing else reaches 24 from these numbers.
        assert_eq!(canonical_solutions(&sols).len(), 1);
    }

    #[test]
    fn identity_products_present() {
        let sols = solve(&quad([24, 1, 1, 1]));
        assert!(sols.iter().any(|s| s.canonical_key == "(1*1*1*24)"));
    }

    #[test]
    fn canonical_keys() {
        let leaf = |v: i64| Arc::new(Expr::Leaf(R::from(v)));
        let ab = Expr::Node(Op::Add, leaf(1), leaf(2));
        let ba = Expr::Node(Op::Add, leaf(2), leaf(1));
        assert_eq!(ab.canonical_key(), ba.canonical_key());
        let amb = Expr::Node(Op::Sub, leaf(1), leaf(2));
        let bma = Expr::Node(Op::Sub, leaf(2), leaf(1));
        assert_ne!(amb.canonical_key(), bma.canonical_key());
        let left = Expr::Node(Op::Mul, Arc::new(Expr::Node(Op::Mul, leaf(2), leaf(3))), leaf(4));
        let right = Expr::Node(Op::Mul, leaf(2), Arc::new(Expr::Node(Op::Mul, leaf(4), leaf(3))));
        assert_eq!(left.canonical_key(), right.canonical_key());
        assert_eq!(left.canonical_key(), "(2*3*4)");
    }

    #[test]
    fn dedup_idempotent() {
        let raw = solve(&quad([1, 2, 3, 4]));
        let once = canonical_solutions(&raw);
        assert!(once.len() < raw.len());
        assert_eq!(canonical_solutions(&once), once);
    }

    #[test]
    fn ground_truth_thoughts() {
        let gt = ground_truth_next_thoughts(&st(&[24, 1]));
        let texts: Vec<&str> = gt.iter().map(|s| s.raw_text.as_str()).collect();
        assert!(texts.contains(&"24*1=24 (24)"));
        assert!(texts.contains(&"24/1=24 (24)"));

        assert!(ground_truth_next_thoughts(&st(&[1, 1, 1, 1])).is_empty());

        let gt = ground_truth_next_thoughts(&st(&[1, 14, 16, 25]));
        assert!(gt.iter().any(|s| s.raw_text == "14+1=15 (16,25,15)"));
        assert!(gt.iter().all(|s| super::super::verify_step(&st(&[1, 14, 16, 25]), s).is_empty()));
    }

    #[test]
    fn integer_only_rules_drop_fraction_solutions() {
        let solver = Solver::<i64>::new(SearchRules {
            allow_fractions: false,
            ..SearchRules::default()
        });
        assert!(!solver.is_solvable(&st(&[3, 3, 8, 8])));
        assert!(solver.solve(&quad([3, 3, 8, 8])).is_empty());
    }

    #[test]
    fn every_record_replays() {
        for s in solve(&quad([1, 14, 16, 25])) {
            assert!(super::super::verify_solution(&s.quad, &s.steps).is_empty());
            assert_eq!(s.steps.len(), 3);
        }
    }
}
