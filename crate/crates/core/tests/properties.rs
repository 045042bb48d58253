use std::sync::OnceLock;

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use proptest::prelude::*;
use propeval_core::cost_model::{
    batch_capacity_ratio, dlm_latency_orders, dlm_step_flops, dlm_total_flops, llm_total_flops,
    DenoiseSchedule, Regime, SequenceProfile, TransformerShape,
};
use propeval_core::engine::{mock_propose, run_task, EngineConfig, MockProposer, OracleEvaluator};
use propeval_core::game24::{
    all_quads, canonical_solutions, ground_truth_next_thoughts, is_solvable, parse_step, Quad,
    Solver,
};
use propeval_core::harness::{read_transcripts, write_transcripts};
use propeval_core::info_bound::{
    entropy, entropy_of, fano_min_error, fano_rhs, independence_gap, random_pmf, FanoInput,
    FANO_TOLERANCE,
};
use propeval_core::metrics::pass_at_k;
use propeval_core::tasks::{mcq_verify, Game24Task, Label, McqInstance, TaskSpec};
use propeval_core::{Flops, Rat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn quads() -> &'static [Quad] {
    static Q: OnceLock<Vec<Quad>> = OnceLock::new();
    Q.get_or_init(|| all_quads(13))
}

fn any_quad() -> impl Strategy<Value = Quad> {
    (0..quads().len()).prop_map(|i| quads()[i])
}

fn shape() -> impl Strategy<Value = TransformerShape> {
    (1..=32u64, 1..=64u64, 1..=4096u64, 1..=48u64, 1..=50_000u64)
        .prop_map(|(h, dh, e, n, v)| TransformerShape::new(h * dh, e, h, n, v).unwrap())
}

fn choose(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let mut r = BigUint::from(1u32);
    for i in 0..k {
        r = r * (n - i) / (i + 1);
    }
    r
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn dlm_total_is_linear_in_steps_and_samples(s in shape(), l in 1..2048u64, t in 1..64u64, k in 1..16u64) {
        let one: Flops = dlm_total_flops(&s, l, &DenoiseSchedule::new(1, 1, 1.0).unwrap()).unwrap();
        let tk: Flops = dlm_total_flops(&s, l, &DenoiseSchedule::new(t, k, 1.0).unwrap()).unwrap();
        prop_assert_eq!(tk, one * (t * k) as Flops);
        prop_assert_eq!(one, dlm_step_flops::<Flops>(&s, l).unwrap().f_total);
    }

    #[test]
    fn doubling_blocks_doubles_block_work(s in shape(), l in 1..2048u64) {
        let mut s2 = s;
        s2.num_blocks *= 2;
        let a = dlm_step_flops::<Flops>(&s, l).unwrap();
        let b = dlm_step_flops::<Flops>(&s2, l).unwrap();
        prop_assert_eq!(b.f_blocks, 2 * a.f_blocks);
        prop_assert_eq!(b.f_others, a.f_others);
    }

    #[test]
    fn kv_cache_never_costs_more(s in shape(), lin in 1..1024u64, lout in 2..1024u64) {
        let seq = SequenceProfile::new(lin, lout).unwrap();
        let cached = llm_total_flops::<Flops>(&s, &seq, true).unwrap().f_total;
        let plain = llm_total_flops::<Flops>(&s, &seq, false).unwrap().f_total;
        prop_assert!(plain > cached);
    }

    #[test]
    fn uncached_total_grows_with_output(s in shape(), lin in 1..512u64, lout in 1..512u64) {
        let a = llm_total_flops::<Flops>(&s, &SequenceProfile::new(lin, lout).unwrap(), false).unwrap();
        let b = llm_total_flops::<Flops>(&s, &SequenceProfile::new(lin, lout + 1).unwrap(), false).unwrap();
        prop_assert!(b.f_total > a.f_total);
    }

    #[test]
    fn latency_over_flops_is_one_over_length(l in 1..100_000u64, t in 1..64u64, k in 1..64u64, beta in 0.0..=1.0f64) {
        let o = dlm_latency_orders::<f64>(l, &DenoiseSchedule::new(t, k, beta).unwrap()).unwrap();
        let r = o.parallel_latency_order / o.flops_order;
        prop_assert!((r * l as f64 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn regime_one_ratio_exceeds_half_n(s in shape(), lin in 1..4096u64, lout in 1..4096u64) {
        let seq = SequenceProfile::new(lin, lout).unwrap();
        let r = batch_capacity_ratio::<Flops>(&s, &seq).unwrap();
        prop_assert!(r.ratio > r.lower_bound);
        if r.regime == Regime::FfnDominated {
            prop_assert_eq!(r.lower_bound, num_rational::Ratio::new(s.num_blocks as Flops, 2));
        }
    }

    #[test]
    fn gap_nonnegative_and_subadditive(seed in any::<u64>(), positions in 1..=3usize, vocab in 1..=4usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pmf = random_pmf(&mut rng, vec![vocab; positions], vocab.pow(positions as u32)).unwrap();
        prop_assert!(independence_gap(&pmf).unwrap() >= -1e-9);
        let marginals: f64 = (0..positions).map(|p| entropy_of(&pmf.marginal(p).unwrap())).sum();
        prop_assert!(entropy(&pmf) <= marginals + 1e-9);
    }

    #[test]
    fn fano_brackets_the_crossing(x in 2..1000u64, frac in 0.0..1.0f64) {
        let cap = (x as f64).log2();
        let c = cap * frac;
        let e = fano_min_error(FanoInput { cond_entropy: c, alphabet_size: x }, FANO_TOLERANCE).unwrap();
        prop_assert!(fano_rhs(e, x) >= c - 1e-12);
        if e > 2.0 * FANO_TOLERANCE {
            prop_assert!(fano_rhs(e - 2.0 * FANO_TOLERANCE, x) < c);
        }
        let wider = fano_min_error(FanoInput { cond_entropy: c, alphabet_size: x + 1 }, FANO_TOLERANCE).unwrap();
        prop_assert!(wider <= e + 1e-12);
    }

    #[test]
    fn pass_at_k_matches_binomial_oracle(n in 1..40u64, c_frac in 0.0..=1.0f64, k_frac in 0.0..=1.0f64) {
        let c = ((n as f64) * c_frac).floor() as u64;
        let k = 1 + ((n - 1) as f64 * k_frac).floor() as u64;
        let miss = choose(n - c, k).to_f64().unwrap() / choose(n, k).to_f64().unwrap();
        let got = pass_at_k(n as usize, c as usize, k as usize);
        prop_assert!((got - (1.0 - miss)).abs() < 1e-9, "n={} c={} k={}: {} vs {}", n, c, k, got, 1.0 - miss);
        if c < n {
            prop_assert!(pass_at_k(n as usize, c as usize + 1, k as usize) >= got);
        }
    }

    #[test]
    fn steps_render_then_parse_identically(q in any_quad()) {
        let solver = Solver::<i64>::new(Default::default());
        for step in solver.all_next_steps(&q.to_state()) {
            let back = parse_step::<i64>(&step.raw_text).unwrap();
            prop_assert_eq!(back.render(), step.raw_text.clone());
            prop_assert_eq!(back, step);
        }
    }

    #[test]
    fn ground_truth_exists_iff_solvable(q in any_quad()) {
        let state: Vec<Rat> = q.to_state();
        let truth = ground_truth_next_thoughts(&state);
        prop_assert_eq!(!truth.is_empty(), is_solvable(&state));
        for t in truth {
            let mut next = t.claimed_remaining.clone();
            next.sort();
            prop_assert!(is_solvable(&next));
        }
    }

    #[test]
    fn canonical_dedup_is_idempotent(q in any_quad()) {
        let solver = Solver::<i64>::new(Default::default());
        let once = canonical_solutions(&solver.solve(&q));
        let twice = canonical_solutions(&once);
        prop_assert_eq!(&once, &twice);
    }

    #[test]
    fn mcq_verdict_is_permutation_equivariant(
        perm in Just([0usize, 1, 2, 3]).prop_shuffle(),
        gold in 0..4usize,
        said in 0..4usize,
    ) {
        let inst = McqInstance {
            id: "q".into(),
            question: "Which?".into(),
            choices: vec!["w".into(), "x".into(), "y".into(), "z".into()],
            answer: Label::from_index(gold).unwrap(),
        };
        let p = inst.permuted([perm[0], perm[1], perm[2], perm[3]]);
        let letter = |i: usize| Label::from_index(i).unwrap().letter();
        // The same choice text sits at a new position after permuting.
        let moved = perm.iter().position(|&k| k == said).unwrap();
        let before = mcq_verify(&inst, &format!("The answer is ({})", letter(said))).unwrap();
        let after = mcq_verify(&p, &format!("The answer is ({})", letter(moved))).unwrap();
        prop_assert_eq!(before, after);
        prop_assert_eq!(before, said == gold);
    }

    #[test]
    fn mock_batches_extend_as_prefixes(q in any_quad(), m in 1..12usize, seed in any::<u64>(), p in 0.0..=1.0f64) {
        let task = Game24Task::new("p", q);
        let s = task.initial_state();
        let small = mock_propose(&task, &s, m, p, seed).unwrap();
        let large = mock_propose(&task, &s, m + 1, p, seed).unwrap();
        prop_assert_eq!(&small.texts[..], &large.texts[..m]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transcripts_round_trip(q in any_quad(), seed in any::<u64>(), p in 0.0..=1.0f64, m in 1..8usize) {
        let task = Game24Task::new(format!("{q}"), q);
        let cfg = EngineConfig::default().with_proposals(m).with_seed(seed);
        let run = run_task(&task, &MockProposer::new(p), &OracleEvaluator::default(), &cfg);
        let mut buf = Vec::new();
        write_transcripts(std::slice::from_ref(&run), &mut buf).unwrap();
        let back = read_transcripts(buf.as_slice(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, vec![run]);
    }
}
