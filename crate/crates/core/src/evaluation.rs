//! Ranking evaluation for the three link-prediction tasks.
//!
//! Every task ranks the true answer of a query against a candidate set after
//! removing other known answers (filtered setting). Ties are broken
//! pessimistically: the rank is one plus the number of remaining candidates
//! scoring at least as high as the truth.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use rayon::prelude::*;

use crate::graph::{AtomicTriple, EntityId, NestedGraph, NestedTriple, Split};
use crate::hypercomplex::{self as hc, Real};
use crate::scoring::{AtomicContext, EmbeddingStore, NestedContext, TripleColumns};

pub const DEFAULT_HITS: [usize; 3] = [1, 3, 10];

/// Which query family to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    /// Predict a missing atomic triple of a nested fact among the involved triples.
    TriplePrediction,
    /// Predict a missing entity inside a nested fact among all entities.
    ConditionalLinkPrediction,
    /// Predict a missing entity of an atomic fact among all entities.
    BaseLinkPrediction,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::TriplePrediction, Task::ConditionalLinkPrediction, Task::BaseLinkPrediction];

    pub fn name(self) -> &'static str {
        match self {
            Task::TriplePrediction => "triple",
            Task::ConditionalLinkPrediction => "conditional",
            Task::BaseLinkPrediction => "base",
        }
    }
}

impl std::str::FromStr for Task {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "triple" | "triple-prediction" => Ok(Task::TriplePrediction),
            "conditional" | "conditional-link-prediction" => Ok(Task::ConditionalLinkPrediction),
            "base" | "base-link-prediction" => Ok(Task::BaseLinkPrediction),
            _ => Err(crate::error::Error::Config(format!("unknown task '{s}' (expected triple, conditional or base)"))),
        }
    }
}

/// Rank metrics over a set of queries.
///
/// `hits_at` values are fractions in `[0, 1]`. With no queries every metric
/// is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub mr: f64,
    pub mrr: f64,
    pub hits_at: BTreeMap<usize, f64>,
    pub query_count: usize,
    /// Ranks in query order.
    pub ranks: Vec<usize>,
    /// Breakdown by the relation of the evaluated fact. Nested entries have no
    /// further breakdown.
    pub per_relation: BTreeMap<String, RankingReport>,
}

impl RankingReport {
    pub fn from_ranks(ranks: Vec<usize>, hits: &[usize]) -> Self {
        let n = ranks.len();
        let mut hits_at = BTreeMap::new();
        let (mut mr, mut mrr) = (0.0, 0.0);
        if n > 0 {
            mr = ranks.iter().map(|&r| r as f64).sum::<f64>() / n as f64;
            mrr = ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n as f64;
        }
        for &k in hits {
            let c = ranks.iter().filter(|&&r| r <= k).count();
            hits_at.insert(k, if n > 0 { c as f64 / n as f64 } else { 0.0 });
        }
        Self { mr, mrr, hits_at, query_count: n, ranks, per_relation: BTreeMap::new() }
    }

    pub fn hits(&self, k: usize) -> Option<f64> {
        self.hits_at.get(&k).copied()
    }
}

impl fmt::Display for RankingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "queries={} MR={:.3} MRR={:.4}", self.query_count, self.mr, self.mrr)?;
        for (k, v) in &self.hits_at {
            write!(f, " Hits@{k}={v:.4}")?;
        }
        Ok(())
    }
}

/// `1 + #{others scoring ≥ truth}`. A NaN anywhere counts against the truth.
pub fn pessimistic_rank<T: Real>(truth: T, others: impl IntoIterator<Item = T>) -> usize {
    1 + others.into_iter().filter(|&s| !(s < truth)).count()
}

pub fn evaluate<T: Real>(task: Task, store: &EmbeddingStore<T>, g: &NestedGraph, split: Split, hits: &[usize]) -> RankingReport {
    match task {
        Task::TriplePrediction => evaluate_triple_prediction(store, g, split, hits),
        Task::ConditionalLinkPrediction => evaluate_conditional(store, g, split, hits),
        Task::BaseLinkPrediction => evaluate_base(store, g, split, hits),
    }
}

/// Collects per-fact rank lists into a report with a per-relation breakdown.
fn assemble(per_fact: Vec<(String, Vec<usize>)>, hits: &[usize]) -> RankingReport {
    let mut by_relation: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut all = Vec::new();
    for (name, ranks) in per_fact {
        by_relation.entry(name).or_default().extend(&ranks);
        all.extend(ranks);
    }
    let mut report = RankingReport::from_ranks(all, hits);
    report.per_relation = by_relation.into_iter().map(|(k, v)| (k, RankingReport::from_ranks(v, hits))).collect();
    report
}

/// For each nested fact `(H, n, T)` of `split`: rank `T` given `(H, n, ?)` and
/// `H` given `(?, n, T)` among the involved triples. Known nested facts of
/// every split are filtered.
pub fn evaluate_triple_prediction<T: Real>(store: &EmbeddingStore<T>, g: &NestedGraph, split: Split, hits: &[usize]) -> RankingReport {
    let known: HashSet<NestedTriple> = g.nested.iter().copied().collect();
    let involved = g.involved_triples();
    let b = 4 * store.dim();
    let per_fact = g
        .nested
        .get(split)
        .par_iter()
        .map(|nt| {
            let ctx = NestedContext::new(store, nt.relation);
            let mut buf = vec![T::zero(); 3 * b];

            ctx.forward(&TripleColumns::of(store, &nt.head), &mut buf);
            let tail_score = |x: &AtomicTriple| TripleColumns::of(store, x).dot(&buf);
            let truth = tail_score(&nt.tail);
            let tail_rank = pessimistic_rank(
                truth,
                involved
                    .iter()
                    .filter(|x| **x != nt.tail && !known.contains(&NestedTriple { tail: **x, ..*nt }))
                    .map(tail_score),
            );

            ctx.pullback_tail(&TripleColumns::of(store, &nt.tail), &mut buf);
            let head_score = |x: &AtomicTriple| hc::dot(&ctx.shifted(&TripleColumns::of(store, x)), &buf);
            let truth = head_score(&nt.head);
            let head_rank = pessimistic_rank(
                truth,
                involved
                    .iter()
                    .filter(|x| **x != nt.head && !known.contains(&NestedTriple { head: **x, ..*nt }))
                    .map(head_score),
            );
            (g.symbols.nested_relations.name(nt.relation.0).to_owned(), vec![head_rank, tail_rank])
        })
        .collect();
    assemble(per_fact, hits)
}

/// Which entity slot of a nested fact a conditional query hides.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    HeadOfHead,
    TailOfHead,
    HeadOfTail,
    TailOfTail,
}

impl Slot {
    const ALL: [Slot; 4] = [Slot::HeadOfHead, Slot::TailOfHead, Slot::HeadOfTail, Slot::TailOfTail];

    fn get(self, nt: &NestedTriple) -> EntityId {
        match self {
            Slot::HeadOfHead => nt.head.head,
            Slot::TailOfHead => nt.head.tail,
            Slot::HeadOfTail => nt.tail.head,
            Slot::TailOfTail => nt.tail.tail,
        }
    }

    fn replace(self, nt: &NestedTriple, e: EntityId) -> NestedTriple {
        let mut out = *nt;
        match self {
            Slot::HeadOfHead => out.head.head = e,
            Slot::TailOfHead => out.head.tail = e,
            Slot::HeadOfTail => out.tail.head = e,
            Slot::TailOfTail => out.tail.tail = e,
        }
        out
    }
}

/// For each nested fact of `split`: four queries, each hiding one of the four
/// entities, ranked among all entities. A candidate is filtered when
/// substituting it yields a known nested fact.
pub fn evaluate_conditional<T: Real>(store: &EmbeddingStore<T>, g: &NestedGraph, split: Split, hits: &[usize]) -> RankingReport {
    let known: HashSet<NestedTriple> = g.nested.iter().copied().collect();
    let b = 4 * store.dim();
    let n_entities = g.num_entities() as u32;
    let per_fact = g
        .nested
        .get(split)
        .par_iter()
        .map(|nt| {
            let ctx = NestedContext::new(store, nt.relation);
            let mut rotated = vec![T::zero(); 3 * b];
            ctx.forward(&TripleColumns::of(store, &nt.head), &mut rotated);
            let mut pulled = vec![T::zero(); 3 * b];
            ctx.pullback_tail(&TripleColumns::of(store, &nt.tail), &mut pulled);

            // The score is affine in the hidden entity's column; rank by the
            // varying part only.
            let ranks = Slot::ALL
                .iter()
                .map(|&slot| {
                    let coeff = match slot {
                        Slot::HeadOfHead => &pulled[..b],
                        Slot::TailOfHead => &pulled[2 * b..],
                        Slot::HeadOfTail => &rotated[..b],
                        Slot::TailOfTail => &rotated[2 * b..],
                    };
                    let score = |e: EntityId| hc::dot(store.entity(e), coeff);
                    let truth_id = slot.get(nt);
                    pessimistic_rank(
                        score(truth_id),
                        (0..n_entities)
                            .map(EntityId)
                            .filter(|&e| e != truth_id && !known.contains(&slot.replace(nt, e)))
                            .map(score),
                    )
                })
                .collect();
            (g.symbols.nested_relations.name(nt.relation.0).to_owned(), ranks)
        })
        .collect();
    assemble(per_fact, hits)
}

/// For each atomic fact of `split`: rank its head and its tail among all
/// entities, filtering the original atomic facts of every split (augmented
/// triples are not used as filters).
pub fn evaluate_base<T: Real>(store: &EmbeddingStore<T>, g: &NestedGraph, split: Split, hits: &[usize]) -> RankingReport {
    let known: HashSet<AtomicTriple> = g.atomic.iter().copied().collect();
    let b = 4 * store.dim();
    let n_entities = g.num_entities() as u32;
    let per_fact = g
        .atomic
        .get(split)
        .par_iter()
        .map(|t| {
            let ctx = AtomicContext::new(store, t.relation);
            let entities = || (0..n_entities).map(EntityId);

            let mut buf = vec![T::zero(); b];
            ctx.transform_head(store.entity(t.head), &mut buf);
            let score = |e: EntityId| hc::dot(&buf, store.entity(e));
            let tail_rank = pessimistic_rank(
                score(t.tail),
                entities().filter(|&e| e != t.tail && !known.contains(&AtomicTriple { tail: e, ..*t })).map(score),
            );

            ctx.pullback_tail(store.entity(t.tail), &mut buf);
            let score = |e: EntityId| hc::dot(store.entity(e), &buf);
            let head_rank = pessimistic_rank(
                score(t.head),
                entities().filter(|&e| e != t.head && !known.contains(&AtomicTriple { head: e, ..*t })).map(score),
            );
            (g.symbols.relations.name(t.relation.0).to_owned(), vec![head_rank, tail_rank])
        })
        .collect();
    assemble(per_fact, hits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_from_ranks() {
        let r = RankingReport::from_ranks(vec![1, 2, 4, 10, 11], &[1, 3, 10]);
        assert_eq!(r.query_count, 5);
        assert!((r.mr - 28.0 / 5.0).abs() < 1e-12);
        let mrr = (1.0 + 0.5 + 0.25 + 0.1 + 1.0 / 11.0) / 5.0;
        assert!((r.mrr - mrr).abs() < 1e-12);
        assert_eq!(r.hits(1), Some(0.2));
        assert_eq!(r.hits(3), Some(0.4));
        assert_eq!(r.hits(10), Some(0.8));
    }

    #[test]
    fn empty_report_is_zero() {
        let r = RankingReport::from_ranks(vec![], &[1]);
        assert_eq!((r.mr, r.mrr, r.query_count, r.hits(1)), (0.0, 0.0, 0, Some(0.0)));
    }

    #[test]
    fn ties_are_pessimistic() {
        assert_eq!(pessimistic_rank(1.0, [0.5, 1.0, 2.0]), 3);
        assert_eq!(pessimistic_rank(3.0, [0.5, 1.0, 2.0]), 1);
        assert_eq!(pessimistic_rank(1.0, [1.0, 1.0]), 3);
        assert_eq!(pessimistic_rank(f64::NAN, [0.0]), 2);
        assert_eq!(pessimistic_rank(0.0, [f64::NAN]), 2);
    }
}
