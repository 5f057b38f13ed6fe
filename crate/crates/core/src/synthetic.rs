//! Generator for a small nested graph with planted relation patterns.
//!
//! Two nested relations are planted: `implies` links `(h, r0, t)` to
//! `(h, r1, t)` (R-implication) and `symmetric` links `(a, r2, b)` to
//! `(b, r2, a)` in both directions (R-symmetry). The remaining atomic facts
//! are uniform random triples over the other relations.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{split_811, AtomicTriple, NestedGraph, NestedTriple, SymbolTable, Symbols};

pub const IMPLICATION: &str = "implies";
pub const SYMMETRY: &str = "symmetric";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticConfig {
    pub entities: usize,
    /// At least 3: `r0 → r1` carries the implication, `r2` the symmetry.
    pub relations: usize,
    pub atomic_triples: usize,
    /// Nested facts per planted relation; the symmetric count must be even.
    pub implication_facts: usize,
    pub symmetry_facts: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self { entities: 200, relations: 6, atomic_triples: 2000, implication_facts: 200, symmetry_facts: 200, seed: 7 }
    }
}

pub fn generate(cfg: &SyntheticConfig) -> Result<NestedGraph> {
    let pairs_needed = cfg.implication_facts + cfg.symmetry_facts / 2;
    let planted_atomic = 2 * cfg.implication_facts + cfg.symmetry_facts;
    if cfg.relations < 3 || cfg.symmetry_facts % 2 == 1 || cfg.entities < 2 {
        return Err(Error::Contract("need ≥ 3 relations, ≥ 2 entities and an even symmetry count".into()));
    }
    if cfg.atomic_triples < planted_atomic || pairs_needed > cfg.entities * (cfg.entities - 1) / 2 {
        return Err(Error::Contract("too few atomic triples or entity pairs for the planted facts".into()));
    }
    let filler_relations = (cfg.relations - 3) as u32;
    if filler_relations == 0 && cfg.atomic_triples > planted_atomic {
        return Err(Error::Contract("filler triples need more than 3 relations".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.entities as u32;

    // Distinct unordered entity pairs, one per planted fact group.
    let mut used = HashSet::new();
    let mut pairs = Vec::with_capacity(pairs_needed);
    while pairs.len() < pairs_needed {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && used.insert((a.min(b), a.max(b))) {
            pairs.push((a, b));
        }
    }

    let mut atomic = Vec::with_capacity(cfg.atomic_triples);
    let mut nested = Vec::with_capacity(cfg.implication_facts + cfg.symmetry_facts);
    for &(h, t) in &pairs[..cfg.implication_facts] {
        let (body, head) = (AtomicTriple::new(h, 0, t), AtomicTriple::new(h, 1, t));
        atomic.extend([body, head]);
        nested.push(NestedTriple::new(body, 0, head));
    }
    for &(a, b) in &pairs[cfg.implication_facts..] {
        let (ab, ba) = (AtomicTriple::new(a, 2, b), AtomicTriple::new(b, 2, a));
        atomic.extend([ab, ba]);
        nested.push(NestedTriple::new(ab, 1, ba));
        nested.push(NestedTriple::new(ba, 1, ab));
    }
    let mut seen: HashSet<AtomicTriple> = atomic.iter().copied().collect();
    while atomic.len() < cfg.atomic_triples {
        let t = AtomicTriple::new(rng.gen_range(0..n), 3 + rng.gen_range(0..filler_relations), rng.gen_range(0..n));
        if t.head != t.tail && seen.insert(t) {
            atomic.push(t);
        }
    }
    atomic.shuffle(&mut rng);
    nested.shuffle(&mut rng);

    let symbols = Symbols {
        entities: SymbolTable::from_names((0..cfg.entities).map(|i| format!("e{i}")))?,
        relations: SymbolTable::from_names((0..cfg.relations).map(|i| format!("r{i}")))?,
        nested_relations: SymbolTable::from_names([IMPLICATION, SYMMETRY])?,
    };
    NestedGraph::new(
        symbols,
        split_811(&atomic, cfg.seed.wrapping_add(1)),
        split_811(&nested, cfg.seed.wrapping_add(2)),
        Vec::new(),
    )
}
