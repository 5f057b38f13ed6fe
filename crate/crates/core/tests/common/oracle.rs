//! Independent reference implementations used as oracles.

use std::collections::BTreeMap;

use nestkg::evaluation::{RankingReport, Task, DEFAULT_HITS};
use nestkg::graph::{AtomicTriple, EntityId, NestedGraph, NestedTriple, Split};
use nestkg::hypercomplex::{self as hc, Algebra, Hyper4Vector, NORMALIZE_EPS};
use nestkg::scoring::{rotate_triple, triple_embedding, triple_inner, EmbeddingStore, ParamKey};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{random_atomic, random_graph};

pub fn vec_of(v: &[f64]) -> Hyper4Vector {
    Hyper4Vector::from_flat(v.to_vec()).unwrap()
}

/// Atomic score rebuilt from the value-level algebra operations.
pub fn atomic_score(store: &EmbeddingStore, t: &AtomicTriple) -> f64 {
    let alg = store.algebra();
    let h = vec_of(store.entity(t.head));
    let rb = vec_of(store.relation_translation(t.relation));
    let rt = hc::normalize(&vec_of(store.relation_rotation(t.relation)), NORMALIZE_EPS);
    let moved = hc::hamilton_product(&hc::add(&h, &rb).unwrap(), &rt, alg).unwrap();
    hc::inner(&moved, &vec_of(store.entity(t.tail))).unwrap()
}

pub fn nested_score(store: &EmbeddingStore, nt: &NestedTriple) -> f64 {
    let rel = store.nested_relation(nt.relation);
    let rotated = rotate_triple(&triple_embedding(store, &nt.head), &rel, store.algebra()).unwrap();
    triple_inner(&rotated, &triple_embedding(store, &nt.tail)).unwrap()
}

pub fn rank(truth: f64, others: impl Iterator<Item = f64>) -> usize {
    let mut r = 1;
    for s in others {
        if s >= truth || s.is_nan() || truth.is_nan() {
            r += 1;
        }
    }
    r
}

/// Reference evaluator: plain loops over every candidate, rescoring each
/// completed fact from scratch. Returns `(relation name, ranks)` per fact.
pub fn brute_force(task: Task, store: &EmbeddingStore, g: &NestedGraph, split: Split, score: &dyn Fn(&EmbeddingStore, Task, &NestedTriple, &AtomicTriple) -> f64) -> Vec<(String, Vec<usize>)> {
    let known_nested: Vec<NestedTriple> = g.nested.iter().copied().collect();
    let known_atomic: Vec<AtomicTriple> = g.atomic.iter().copied().collect();
    let entities: Vec<EntityId> = (0..g.num_entities() as u32).map(EntityId).collect();
    let mut out = Vec::new();
    match task {
        Task::TriplePrediction => {
            for nt in g.nested.get(split) {
                let s = |x: &NestedTriple| score(store, task, x, &x.head);
                let heads: Vec<f64> = g
                    .involved_triples()
                    .iter()
                    .map(|&c| NestedTriple { head: c, ..*nt })
                    .filter(|c| c != nt && !known_nested.contains(c))
                    .map(|c| s(&c))
                    .collect();
                let tails: Vec<f64> = g
                    .involved_triples()
                    .iter()
                    .map(|&c| NestedTriple { tail: c, ..*nt })
                    .filter(|c| c != nt && !known_nested.contains(c))
                    .map(|c| s(&c))
                    .collect();
                out.push((
                    g.symbols.nested_relations.name(nt.relation.0).to_owned(),
                    vec![rank(s(nt), heads.into_iter()), rank(s(nt), tails.into_iter())],
                ));
            }
        }
        Task::ConditionalLinkPrediction => {
            for nt in g.nested.get(split) {
                let s = |x: &NestedTriple| score(store, task, x, &x.head);
                let mut ranks = Vec::new();
                for slot in 0..4 {
                    let with = |e: EntityId| {
                        let mut c = *nt;
                        match slot {
                            0 => c.head.head = e,
                            1 => c.head.tail = e,
                            2 => c.tail.head = e,
                            _ => c.tail.tail = e,
                        }
                        c
                    };
                    let others: Vec<f64> =
                        entities.iter().map(|&e| with(e)).filter(|c| c != nt && !known_nested.contains(c)).map(|c| s(&c)).collect();
                    ranks.push(rank(s(nt), others.into_iter()));
                }
                out.push((g.symbols.nested_relations.name(nt.relation.0).to_owned(), ranks));
            }
        }
        Task::BaseLinkPrediction => {
            for t in g.atomic.get(split) {
                let dummy = NestedTriple::new(*t, 0, *t);
                let s = |x: &AtomicTriple| score(store, task, &dummy, x);
                let heads: Vec<f64> = entities
                    .iter()
                    .map(|&e| AtomicTriple { head: e, ..*t })
                    .filter(|c| c != t && !known_atomic.contains(c))
                    .map(|c| s(&c))
                    .collect();
                let tails: Vec<f64> = entities
                    .iter()
                    .map(|&e| AtomicTriple { tail: e, ..*t })
                    .filter(|c| c != t && !known_atomic.contains(c))
                    .map(|c| s(&c))
                    .collect();
                out.push((g.symbols.relations.name(t.relation.0).to_owned(), vec![rank(s(t), heads.into_iter()), rank(s(t), tails.into_iter())]));
            }
        }
    }
    out
}

pub fn plain_score(store: &EmbeddingStore, task: Task, nt: &NestedTriple, t: &AtomicTriple) -> f64 {
    match task {
        Task::BaseLinkPrediction => atomic_score(store, t),
        _ => nested_score(store, nt),
    }
}

pub fn report(per_fact: Vec<(String, Vec<usize>)>) -> RankingReport {
    let mut by_rel: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut all = Vec::new();
    for (name, ranks) in per_fact {
        by_rel.entry(name).or_default().extend(&ranks);
        all.extend(ranks);
    }
    let mut r = RankingReport::from_ranks(all, &DEFAULT_HITS);
    r.per_relation = by_rel.into_iter().map(|(k, v)| (k, RankingReport::from_ranks(v, &DEFAULT_HITS))).collect();
    r
}

/// Copies entity 0 onto entity 1 so that exact score ties occur.
pub fn force_ties(store: &mut EmbeddingStore) {
    let e0 = store.block(ParamKey::Entity(0)).to_vec();
    store.block_mut(ParamKey::Entity(1)).copy_from_slice(&e0);
}

pub fn oracle_graph(rng: &mut ChaCha8Rng) -> NestedGraph {
    let entities = rng.gen_range(3..=10);
    let (relations, nested_rel) = (rng.gen_range(1..=3), rng.gen_range(1..=2));
    let (atomic, nested) = (rng.gen_range(10..=40), rng.gen_range(4..=15));
    let g = random_graph(rng, entities, relations, nested_rel, atomic, nested);
    // Augmented triples must never act as filters.
    let augmented = (0..5).map(|_| random_atomic(rng, entities, g.num_relations())).collect();
    NestedGraph::new(g.symbols, g.atomic, g.nested, augmented).unwrap()
}


/// ComplEx score `Re(Σ h·r·conj(t))` with `h`, `r`, `t` read off the real and
/// `i` channels and `r` scaled to unit modulus per element.
pub fn complex_score(h: &Hyper4Vector, r: &Hyper4Vector, t: &Hyper4Vector) -> f64 {
    let c = |v: &Hyper4Vector, k: usize| Complex64::new(v.s()[k], v.x()[k]);
    (0..h.dim()).map(|k| (c(h, k) * (c(r, k) / c(r, k).norm()) * c(t, k).conj()).re).sum()
}

/// The same score over split-complex numbers (`i² = +1`), where
/// `(a + bi)(c + di) = (ac + bd) + (ad + bc)i`. The rotation is scaled by the
/// Euclidean modulus, as the embedding normalizes it.
pub fn split_complex_score(h: &Hyper4Vector, r: &Hyper4Vector, t: &Hyper4Vector) -> f64 {
    (0..h.dim())
        .map(|k| {
            let (a, b) = (h.s()[k], h.x()[k]);
            let n = r.s()[k].hypot(r.x()[k]);
            let (c, d) = (r.s()[k] / n, r.x()[k] / n);
            (a * c + b * d) * t.s()[k] + (a * d + b * c) * t.x()[k]
        })
        .sum()
}

/// Multiplication tables written out by hand, row factor first.
pub fn basis_table(alg: Algebra) -> [&'static str; 16] {
    match alg {
        Algebra::Quaternion => [
            "1*1=1", "1*i=i", "1*j=j", "1*k=k",
            "i*1=i", "i*i=-1", "i*j=k", "i*k=-j",
            "j*1=j", "j*i=-k", "j*j=-1", "j*k=i",
            "k*1=k", "k*i=j", "k*j=-i", "k*k=-1",
        ],
        Algebra::Hyperbolic => [
            "1*1=1", "1*i=i", "1*j=j", "1*k=k",
            "i*1=i", "i*i=1", "i*j=k", "i*k=-j",
            "j*1=j", "j*i=-k", "j*j=1", "j*k=i",
            "k*1=k", "k*i=j", "k*j=-i", "k*k=1",
        ],
        Algebra::Split => [
            "1*1=1", "1*i=i", "1*j=j", "1*k=k",
            "i*1=i", "i*i=-1", "i*j=k", "i*k=-j",
            "j*1=j", "j*i=-k", "j*j=1", "j*k=-i",
            "k*1=k", "k*i=j", "k*j=i", "k*k=1",
        ],
    }
}

fn unit_index(name: &str) -> usize {
    ["1", "i", "j", "k"].iter().position(|u| *u == name).expect("unit name")
}

pub fn parse_entry(entry: &str) -> (usize, usize, f64, usize) {
    let (lhs, rhs) = entry.split_once('=').unwrap();
    let (a, b) = lhs.split_once('*').unwrap();
    let (sign, unit) = rhs.strip_prefix('-').map_or((1.0, rhs), |u| (-1.0, u));
    (unit_index(a), unit_index(b), sign, unit_index(unit))
}
