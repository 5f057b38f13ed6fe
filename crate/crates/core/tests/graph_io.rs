mod common;

use nestkg::graph::{augment_by_random_walk, split_811, GraphFiles, GraphLoader, NestedGraph};
use nestkg::synthetic::{generate, SyntheticConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{random_atomic, random_graph};

fn with_augmented(g: NestedGraph, seed: u64) -> NestedGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let aug = (0..6).map(|_| random_atomic(&mut rng, g.num_entities(), g.num_relations())).collect();
    NestedGraph::new(g.symbols, g.atomic, g.nested, aug).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn write_then_load_round_trips(seed in 0u64..100_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = with_augmented(random_graph(&mut rng, 8, 3, 2, 30, 12), seed);
        let dir = tempfile::tempdir().unwrap();
        let files = GraphFiles { augmented: Some(dir.path().join("augmented.txt")), ..GraphFiles::in_dir(dir.path()) };
        g.write_files(&files).unwrap();
        let back = GraphLoader::new().with_symbols(g.symbols.clone()).load(&files).unwrap();
        prop_assert_eq!(&back, &g);
        // Without fixed tables, ids follow first appearance but the facts agree by name.
        let loose = GraphLoader::new().load(&files).unwrap();
        prop_assert_eq!(loose.stats().atomic_triples, g.stats().atomic_triples);
        prop_assert_eq!(loose.stats().involved_triples, g.stats().involved_triples);
        let names = |h: &NestedGraph| {
            let mut v: Vec<[String; 3]> = h.atomic.iter().map(|t| h.atomic_name(t).map(str::to_owned)).collect();
            v.sort();
            v
        };
        prop_assert_eq!(names(&loose), names(&g));
    }

    #[test]
    fn split_811_partitions(n in 0usize..500, seed in 0u64..1000) {
        let items: Vec<usize> = (0..n).collect();
        let s = split_811(&items, seed);
        prop_assert_eq!(s.valid.len(), n / 10);
        prop_assert_eq!(s.test.len(), n / 10);
        let mut all: Vec<usize> = s.iter().copied().collect();
        all.sort();
        prop_assert_eq!(all, items);
    }
}

#[test]
fn synthetic_graph_round_trips_through_files() {
    let g = generate(&SyntheticConfig { entities: 30, atomic_triples: 200, implication_facts: 20, symmetry_facts: 20, ..Default::default() })
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = GraphFiles::in_dir(dir.path());
    g.write_files(&files).unwrap();
    let back = GraphLoader::new().strict(true).with_symbols(g.symbols.clone()).load(&files).unwrap();
    assert_eq!(back, g);
}

#[test]
fn augmentation_is_seeded_and_uses_train_edges() {
    let base = generate(&SyntheticConfig { entities: 30, atomic_triples: 200, implication_facts: 20, symmetry_facts: 20, ..Default::default() })
        .unwrap();
    let (mut a, mut b) = (base.clone(), base.clone());
    let (x, y) = (augment_by_random_walk(&mut a, 2, 3, 5).unwrap(), augment_by_random_walk(&mut b, 2, 3, 5).unwrap());
    assert_eq!(x, y);
    assert!(!x.is_empty());
    for t in &x {
        let name = a.symbols.relations.name(t.relation.0);
        let (r1, r2) = name.split_once('|').unwrap();
        let (r1, r2) = (a.symbols.relations.get(r1).unwrap(), a.symbols.relations.get(r2).unwrap());
        let ok = base.atomic.train.iter().any(|e1| {
            e1.head == t.head
                && e1.relation.0 == r1
                && base.atomic.train.iter().any(|e2| e2.head == e1.tail && e2.relation.0 == r2 && e2.tail == t.tail)
        });
        assert!(ok, "{t}");
    }
}
