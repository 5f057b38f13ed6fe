//! Corruption of positives by replacing one side.

use std::collections::HashSet;

use rand::Rng;

use crate::graph::{AtomicTriple, EntityId, NestedGraph, NestedTriple};

use super::objective::{AtomicSample, NestedSample, Side};

/// A positive example of any kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Example {
    Atomic(AtomicTriple),
    Augmented(AtomicTriple),
    Nested(NestedTriple),
}

/// Draws corruptions for training positives.
///
/// Atomic positives get a uniformly random entity on a fair-coin side;
/// nested positives get a uniformly random involved triple. In filtered mode
/// a draw that is itself a known training fact is redrawn, up to
/// `retries` times. A corruption never equals its positive; when no other
/// candidate exists it is dropped.
#[derive(Debug, Clone)]
pub struct NegativeSampler {
    num_entities: u32,
    involved: Vec<AtomicTriple>,
    atomic_known: HashSet<AtomicTriple>,
    augmented_known: HashSet<AtomicTriple>,
    nested_known: HashSet<NestedTriple>,
    filtered: bool,
    retries: usize,
}

impl NegativeSampler {
    pub fn new(g: &NestedGraph, filtered: bool, retries: usize) -> Self {
        let atomic_known: HashSet<_> = g.atomic.train.iter().copied().collect();
        let mut augmented_known = atomic_known.clone();
        augmented_known.extend(g.augmented.iter().copied());
        Self {
            num_entities: g.num_entities() as u32,
            involved: g.involved_triples().to_vec(),
            atomic_known,
            augmented_known,
            nested_known: g.nested.train.iter().copied().collect(),
            filtered,
            retries,
        }
    }

    /// One draw per attempt; the first acceptable draw wins, else the last
    /// draw that differs from the positive.
    fn draw<C: Copy + PartialEq, R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        positive: C,
        mut candidate: impl FnMut(&mut R) -> C,
        known: impl Fn(C) -> bool,
    ) -> Option<C> {
        let mut fallback = None;
        for _ in 0..=self.retries {
            let c = candidate(rng);
            if c == positive {
                continue;
            }
            if !self.filtered || !known(c) {
                return Some(c);
            }
            fallback = Some(c);
        }
        fallback
    }

    pub fn atomic<R: Rng + ?Sized>(&self, pos: &AtomicTriple, augmented: bool, n: usize, rng: &mut R) -> AtomicSample {
        let known = if augmented { &self.augmented_known } else { &self.atomic_known };
        let mut negatives = Vec::with_capacity(n);
        if self.num_entities > 0 {
            for _ in 0..n {
                let side = if rng.gen_bool(0.5) { Side::Head } else { Side::Tail };
                let replace = |e: EntityId| match side {
                    Side::Head => AtomicTriple { head: e, ..*pos },
                    Side::Tail => AtomicTriple { tail: e, ..*pos },
                };
                let drawn = self.draw(rng, *pos, |r| replace(EntityId(r.gen_range(0..self.num_entities))), |t| known.contains(&t));
                if let Some(t) = drawn {
                    negatives.push((side, if side == Side::Head { t.head } else { t.tail }));
                }
            }
        }
        AtomicSample { positive: *pos, negatives }
    }

    pub fn nested<R: Rng + ?Sized>(&self, pos: &NestedTriple, n: usize, rng: &mut R) -> NestedSample {
        let mut negatives = Vec::with_capacity(n);
        if !self.involved.is_empty() {
            for _ in 0..n {
                let side = if rng.gen_bool(0.5) { Side::Head } else { Side::Tail };
                let replace = |t: AtomicTriple| match side {
                    Side::Head => NestedTriple { head: t, ..*pos },
                    Side::Tail => NestedTriple { tail: t, ..*pos },
                };
                let drawn = self.draw(
                    rng,
                    *pos,
                    |r| replace(self.involved[r.gen_range(0..self.involved.len())]),
                    |t| self.nested_known.contains(&t),
                );
                if let Some(t) = drawn {
                    negatives.push((side, if side == Side::Head { t.head } else { t.tail }));
                }
            }
        }
        NestedSample { positive: *pos, negatives }
    }

    /// Corruptions of `pos` as standalone examples of the same kind.
    pub fn sample_negatives<R: Rng + ?Sized>(&self, pos: &Example, n: usize, rng: &mut R) -> Vec<Example> {
        match *pos {
            Example::Atomic(t) => self.atomic(&t, false, n, rng).negative_triples().map(Example::Atomic).collect(),
            Example::Augmented(t) => self.atomic(&t, true, n, rng).negative_triples().map(Example::Augmented).collect(),
            Example::Nested(t) => self.nested(&t, n, rng).negative_triples().map(Example::Nested).collect(),
        }
    }
}
