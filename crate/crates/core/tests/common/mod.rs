#![allow(dead_code)]

pub mod fd;
pub mod oracle;

use nestkg::graph::{AtomicTriple, NestedGraph, NestedTriple, Splits, SymbolTable, Symbols};
use nestkg::hypercomplex::Algebra;
use nestkg::scoring::EmbeddingStore;
use rand::Rng;

pub fn symbols(entities: usize, relations: usize, nested: usize) -> Symbols {
    Symbols {
        entities: SymbolTable::from_names((0..entities).map(|i| format!("e{i}"))).unwrap(),
        relations: SymbolTable::from_names((0..relations).map(|i| format!("r{i}"))).unwrap(),
        nested_relations: SymbolTable::from_names((0..nested).map(|i| format!("n{i}"))).unwrap(),
    }
}

pub fn random_atomic<R: Rng>(rng: &mut R, entities: usize, relations: usize) -> AtomicTriple {
    AtomicTriple::new(
        rng.gen_range(0..entities as u32),
        rng.gen_range(0..relations as u32),
        rng.gen_range(0..entities as u32),
    )
}

/// A random store with every block uniform in `±scale`.
pub fn random_store<R: Rng>(rng: &mut R, symbols: Symbols, dim: usize, alg: Algebra, scale: f64) -> EmbeddingStore {
    let mut store = EmbeddingStore::zeros(symbols, dim, alg).unwrap();
    let keys: Vec<_> = store.keys().collect();
    for k in keys {
        for v in store.block_mut(k) {
            *v = rng.gen_range(-scale..scale);
        }
    }
    store
}

/// A random graph whose atomic and nested facts are spread over the three
/// splits, with no overlap between splits.
pub fn random_graph<R: Rng>(rng: &mut R, entities: usize, relations: usize, nested_rel: usize, atomic: usize, nested: usize) -> NestedGraph {
    let mut a: Vec<AtomicTriple> = (0..atomic).map(|_| random_atomic(rng, entities, relations)).collect();
    a.sort();
    a.dedup();
    let mut splits = Splits::default();
    for t in a {
        splits.get_mut(pick_split(rng)).push(t);
    }
    let mut pool: Vec<AtomicTriple> = splits.iter().copied().collect();
    pool.extend((0..4).map(|_| random_atomic(rng, entities, relations)));
    let mut n: Vec<NestedTriple> = (0..nested)
        .map(|_| {
            NestedTriple::new(
                pool[rng.gen_range(0..pool.len())],
                rng.gen_range(0..nested_rel as u32),
                pool[rng.gen_range(0..pool.len())],
            )
        })
        .collect();
    n.sort();
    n.dedup();
    let mut nsplits = Splits::default();
    for t in n {
        nsplits.get_mut(pick_split(rng)).push(t);
    }
    NestedGraph::new(symbols(entities, relations, nested_rel), splits, nsplits, vec![]).unwrap()
}

fn pick_split<R: Rng>(rng: &mut R) -> nestkg::graph::Split {
    use nestkg::graph::Split;
    match rng.gen_range(0..10) {
        0..=5 => Split::Train,
        6 | 7 => Split::Valid,
        _ => Split::Test,
    }
}
