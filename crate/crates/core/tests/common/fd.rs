//! Finite-difference gradient checking.

use nestkg::graph::{EntityId, NestedTriple};
use nestkg::scoring::EmbeddingStore;
use nestkg::training::{gradients, loss, AtomicSample, Batch, NestedSample, Side, TrainConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::random_atomic;

pub const H: f64 = 1e-6;
pub const ENTITIES: usize = 5;
pub const RELATIONS: usize = 2;

pub fn config(lambda_nested: f64, lambda_augmented: f64, regularization: f64) -> TrainConfig {
    TrainConfig { lambda_nested, lambda_augmented, regularization, dim: 2, ..Default::default() }
}

pub fn atomic_sample(rng: &mut ChaCha8Rng) -> AtomicSample {
    let positive = random_atomic(rng, ENTITIES, RELATIONS);
    let negatives = (0..rng.gen_range(0..4))
        .map(|_| {
            let side = if rng.gen_bool(0.5) { Side::Head } else { Side::Tail };
            (side, EntityId(rng.gen_range(0..ENTITIES as u32)))
        })
        .collect();
    AtomicSample { positive, negatives }
}

pub fn nested_sample(rng: &mut ChaCha8Rng) -> NestedSample {
    let positive = NestedTriple::new(random_atomic(rng, ENTITIES, RELATIONS), 0, random_atomic(rng, ENTITIES, RELATIONS));
    let negatives = (0..rng.gen_range(0..4))
        .map(|_| {
            let side = if rng.gen_bool(0.5) { Side::Head } else { Side::Tail };
            (side, random_atomic(rng, ENTITIES, RELATIONS))
        })
        .collect();
    NestedSample { positive, negatives }
}

pub fn random_batch(rng: &mut ChaCha8Rng) -> Batch {
    Batch {
        atomic: (0..rng.gen_range(1..3)).map(|_| atomic_sample(rng)).collect(),
        nested: (0..rng.gen_range(1..3)).map(|_| nested_sample(rng)).collect(),
        augmented: (0..rng.gen_range(0..2)).map(|_| atomic_sample(rng)).collect(),
    }
}

/// Worst entry-wise error of the analytic gradient against central
/// differences over every parameter of the store, relative to
/// `max(|analytic|, |numeric|, 1e-3)`.
pub fn max_relative_error(batch: &Batch, store: &EmbeddingStore, cfg: &TrainConfig) -> f64 {
    let analytic = gradients(batch, store, cfg);
    let mut probe = store.clone();
    let mut worst: f64 = 0.0;
    for key in store.keys() {
        for k in 0..store.block(key).len() {
            let orig = store.block(key)[k];
            probe.block_mut(key)[k] = orig + H;
            let up = loss(batch, &probe, cfg).total;
            probe.block_mut(key)[k] = orig - H;
            let down = loss(batch, &probe, cfg).total;
            probe.block_mut(key)[k] = orig;
            let numeric = (up - down) / (2.0 * H);
            let a = analytic.get(key).map_or(0.0, |g| g[k]);
            worst = worst.max((a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-3));
        }
    }
    worst
}

