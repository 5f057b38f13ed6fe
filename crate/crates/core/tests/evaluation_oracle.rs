mod common;

use nestkg::evaluation::{evaluate, Task, DEFAULT_HITS};
use nestkg::graph::{AtomicTriple, NestedGraph, NestedTriple, Split, Splits};
use nestkg::hypercomplex::Algebra;
use nestkg::scoring::{EmbeddingStore, ParamKey};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::oracle::{brute_force, force_ties, oracle_graph, plain_score, report};
use common::{random_atomic, random_store, symbols};

#[test]
fn evaluators_match_brute_force_on_random_graphs() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut queries = 0;
    for case in 0..20 {
        let g = oracle_graph(&mut rng);
        assert!(g.atomic.len() <= 40 && g.nested.len() <= 15 && g.num_entities() <= 10);
        let alg = Algebra::ALL[case % 3];
        let mut store = random_store(&mut rng, g.symbols.clone(), 3, alg, 1.0);
        if case % 2 == 0 {
            force_ties(&mut store);
        }
        for task in Task::ALL {
            for split in Split::ALL {
                let fast = evaluate(task, &store, &g, split, &DEFAULT_HITS);
                let slow = report(brute_force(task, &store, &g, split, &plain_score));
                assert_eq!(fast, slow, "case {case} {} {}", task.name(), split.name());
                queries += fast.query_count;
            }
        }
    }
    assert!(queries > 500);
}

#[test]
fn per_relation_breakdown_aggregates_to_global() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = oracle_graph(&mut rng);
    let store = random_store(&mut rng, g.symbols.clone(), 2, Algebra::Split, 1.0);
    for task in Task::ALL {
        let r = evaluate(task, &store, &g, Split::Train, &DEFAULT_HITS);
        let n: usize = r.per_relation.values().map(|p| p.query_count).sum();
        let mrr: f64 = r.per_relation.values().map(|p| p.mrr * p.query_count as f64).sum();
        assert_eq!(n, r.query_count);
        assert!((mrr / n as f64 - r.mrr).abs() < 1e-12);
    }
}

/// Five entities, one relation and a hand-chosen store where every rank can
/// be worked out on paper.
#[test]
fn five_entity_base_example() {
    let mut atomic = Splits::default();
    atomic.get_mut(Split::Train).push(AtomicTriple::new(0, 0, 2));
    atomic.get_mut(Split::Test).push(AtomicTriple::new(0, 0, 1));
    let g = NestedGraph::new(symbols(5, 1, 1), atomic, Splits::default(), vec![AtomicTriple::new(0, 0, 3)]).unwrap();
    let mut store = EmbeddingStore::<f64>::zeros(g.symbols.clone(), 1, Algebra::Quaternion).unwrap();
    // Identity rotation, zero translation: φ = ⟨h, t⟩ on the real channel.
    store.block_mut(ParamKey::RelationRotation(0))[0] = 1.0;
    for (e, v) in [1.0, 2.0, 3.0, 4.0, 0.5].into_iter().enumerate() {
        store.block_mut(ParamKey::Entity(e as u32))[0] = v;
    }
    let r = evaluate(Task::BaseLinkPrediction, &store, &g, Split::Test, &[1, 3]);
    // Tail query (0, r, ?): scores t·1 = [1, 2, 3, 4, 0.5]; truth 2, entity 2 is
    // filtered (train), entity 3 (augmented only) is not: rank 2.
    // Head query (?, r, 1): scores h·2 = [2, 4, 6, 8, 1]; truth 2 beats only
    // entity 4: rank 4.
    assert_eq!(r.ranks, vec![4, 2]);
    assert!((r.mrr - (0.25 + 0.5) / 2.0).abs() < 1e-15);
    assert_eq!(r.hits(3), Some(0.5));
}

#[test]
fn single_candidate_ranks_first() {
    let a = AtomicTriple::new(0, 0, 1);
    let mut nested = Splits::default();
    nested.get_mut(Split::Test).push(NestedTriple::new(a, 0, a));
    let mut atomic = Splits::default();
    atomic.get_mut(Split::Train).push(a);
    let g = NestedGraph::new(symbols(2, 1, 1), atomic, nested, vec![]).unwrap();
    assert_eq!(g.involved_triples(), &[a]);
    let store = EmbeddingStore::<f64>::init(g.symbols.clone(), 4, Algebra::Hyperbolic, 1).unwrap();
    let r = evaluate(Task::TriplePrediction, &store, &g, Split::Test, &[10]);
    assert_eq!((r.query_count, r.mr, r.mrr, r.hits(10)), (2, 1.0, 1.0, Some(1.0)));
}

fn increasing(kind: u8, x: f64) -> f64 {
    match kind {
        0 => x.exp(),
        1 => 3.0 * x - 7.0,
        _ => x.powi(3) + x,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reports_are_invariant_under_increasing_score_maps(seed in 0u64..1000, kind in 0u8..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracle_graph(&mut rng);
        let store = random_store(&mut rng, g.symbols.clone(), 2, Algebra::ALL[(seed % 3) as usize], 0.8);
        let mapped = |s: &EmbeddingStore, task: Task, nt: &NestedTriple, t: &AtomicTriple| increasing(kind, plain_score(s, task, nt, t));
        for task in Task::ALL {
            let base = report(brute_force(task, &store, &g, Split::Test, &plain_score));
            let warped = report(brute_force(task, &store, &g, Split::Test, &mapped));
            prop_assert_eq!(&base, &warped);
            prop_assert_eq!(&evaluate(task, &store, &g, Split::Test, &DEFAULT_HITS), &base);
        }
    }

    #[test]
    fn known_facts_never_worsen_filtered_ranks(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = oracle_graph(&mut rng);
        let store = random_store(&mut rng, g.symbols.clone(), 2, Algebra::Quaternion, 1.0);
        // Move a random extra atomic fact into train: test ranks can only improve.
        let mut atomic = g.atomic.clone();
        let extra = random_atomic(&mut rng, g.num_entities(), g.num_relations());
        if !atomic.iter().any(|t| *t == extra) {
            atomic.get_mut(Split::Train).push(extra);
        }
        let more = NestedGraph::new(g.symbols.clone(), atomic, g.nested.clone(), vec![]).unwrap();
        let before = evaluate(Task::BaseLinkPrediction, &store, &g, Split::Test, &DEFAULT_HITS);
        let after = evaluate(Task::BaseLinkPrediction, &store, &more, Split::Test, &DEFAULT_HITS);
        for (a, b) in after.ranks.iter().zip(&before.ranks) {
            prop_assert!(a <= b);
        }
    }
}
