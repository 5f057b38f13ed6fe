//! Composite loss `L = L_atomic + λ₁ L_nested + λ₂ L_aug + β·reg` and its
//! analytic gradient.
//!
//! Each loss term sums `g(-score)` over positives and `g(score)` over their
//! corruptions, with `g(x) = log(1 + eˣ)`. The regularizer is the squared L2
//! norm of every parameter block the batch touches.

use std::collections::{BTreeSet, HashMap};

use crate::graph::{AtomicTriple, EntityId, NestedTriple};
use crate::hypercomplex::{self as hc, Real};
use crate::scoring::{self, AtomicContext, EmbeddingStore, NestedContext, ParamKey, TripleColumns};

use super::TrainConfig;

/// Which argument of a positive a corruption replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Head,
    Tail,
}

/// An atomic (or augmented) positive with its corruptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicSample {
    pub positive: AtomicTriple,
    pub negatives: Vec<(Side, EntityId)>,
}

impl AtomicSample {
    pub fn negative_triples(&self) -> impl Iterator<Item = AtomicTriple> + '_ {
        self.negatives.iter().map(|&(side, e)| match side {
            Side::Head => AtomicTriple { head: e, ..self.positive },
            Side::Tail => AtomicTriple { tail: e, ..self.positive },
        })
    }
}

/// A nested positive with its corruptions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedSample {
    pub positive: NestedTriple,
    pub negatives: Vec<(Side, AtomicTriple)>,
}

impl NestedSample {
    pub fn negative_triples(&self) -> impl Iterator<Item = NestedTriple> + '_ {
        self.negatives.iter().map(|&(side, t)| match side {
            Side::Head => NestedTriple { head: t, ..self.positive },
            Side::Tail => NestedTriple { tail: t, ..self.positive },
        })
    }
}

/// Positives and corruptions for one update, tagged by loss term.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Batch {
    pub atomic: Vec<AtomicSample>,
    pub nested: Vec<NestedSample>,
    pub augmented: Vec<AtomicSample>,
}

impl Batch {
    pub fn is_empty(&self) -> bool {
        self.atomic.is_empty() && self.nested.is_empty() && self.augmented.is_empty()
    }
}

/// Loss split by term. `total` includes the λ weights and the regularizer.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossBreakdown {
    pub atomic: f64,
    pub nested: f64,
    pub augmented: f64,
    pub regularization: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.atomic, self.nested, self.augmented, self.regularization, self.total].iter().all(|v| v.is_finite())
    }

    pub(crate) fn accumulate(&mut self, other: &LossBreakdown) {
        self.atomic += other.atomic;
        self.nested += other.nested;
        self.augmented += other.augmented;
        self.regularization += other.regularization;
        self.total += other.total;
    }
}

/// `log(1 + eˣ)` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic function, the derivative of [`softplus`].
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Sparse gradient keyed by parameter block.
#[derive(Debug, Clone)]
pub struct Gradients<T = f64> {
    dim: usize,
    blocks: HashMap<ParamKey, Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn new(dim: usize) -> Self {
        Self { dim, blocks: HashMap::new() }
    }

    pub fn get(&self, key: ParamKey) -> Option<&[T]> {
        self.blocks.get(&key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamKey, &[T])> {
        self.blocks.iter().map(|(k, v)| (*k, v.as_slice()))
    }

    /// Replaces one block; `value` must have length `4 · dim`.
    pub fn insert_block(&mut self, key: ParamKey, value: Vec<T>) {
        assert_eq!(value.len(), 4 * self.dim, "gradient block length");
        self.blocks.insert(key, value);
    }

    fn block(&mut self, key: ParamKey) -> &mut [T] {
        let b = 4 * self.dim;
        self.blocks.entry(key).or_insert_with(|| vec![T::zero(); b])
    }

    fn axpy(&mut self, key: ParamKey, scale: T, v: &[T]) {
        hc::axpy(scale, v, self.block(key));
    }
}

fn term_weights<T: Real>(cfg: &TrainConfig) -> [T; 3] {
    [T::one(), T::lit(cfg.lambda_nested), T::lit(cfg.lambda_augmented)]
}

/// Parameter blocks read by the weighted terms of `batch`.
pub fn touched_keys(batch: &Batch, cfg: &TrainConfig) -> BTreeSet<ParamKey> {
    let mut keys = BTreeSet::new();
    let mut atomic = |samples: &[AtomicSample]| {
        for s in samples {
            let r = s.positive.relation.0;
            keys.insert(ParamKey::RelationRotation(r));
            keys.insert(ParamKey::RelationTranslation(r));
            keys.insert(ParamKey::Entity(s.positive.head.0));
            keys.insert(ParamKey::Entity(s.positive.tail.0));
            for &(_, e) in &s.negatives {
                keys.insert(ParamKey::Entity(e.0));
            }
        }
    };
    atomic(&batch.atomic);
    if cfg.lambda_augmented != 0.0 {
        atomic(&batch.augmented);
    }
    if cfg.lambda_nested != 0.0 {
        for s in &batch.nested {
            let n = s.positive.relation.0;
            keys.extend((0..9).map(|c| ParamKey::NestedRotation(n, c)));
            keys.extend((0..3).map(|c| ParamKey::NestedTranslation(n, c)));
            let triples = [s.positive.head, s.positive.tail].into_iter().chain(s.negatives.iter().map(|n| n.1));
            for t in triples {
                keys.extend(TripleColumns::<T0>::keys(&t));
            }
        }
    }
    keys
}

type T0 = f64;

/// Direct evaluation of the loss, one score per example.
pub fn loss<T: Real>(batch: &Batch, store: &EmbeddingStore<T>, cfg: &TrainConfig) -> LossBreakdown {
    let f = |v: T| v.to_f64().unwrap_or(f64::NAN);
    let atomic_term = |samples: &[AtomicSample]| -> f64 {
        samples
            .iter()
            .map(|s| {
                f(softplus(-scoring::score_atomic(store, &s.positive)))
                    + s.negative_triples().map(|t| f(softplus(scoring::score_atomic(store, &t)))).sum::<f64>()
            })
            .sum()
    };
    let mut out = LossBreakdown { atomic: atomic_term(&batch.atomic), ..Default::default() };
    if cfg.lambda_augmented != 0.0 {
        out.augmented = atomic_term(&batch.augmented);
    }
    if cfg.lambda_nested != 0.0 {
        out.nested = batch
            .nested
            .iter()
            .map(|s| {
                f(softplus(-scoring::score_nested(store, &s.positive)))
                    + s.negative_triples().map(|t| f(softplus(scoring::score_nested(store, &t)))).sum::<f64>()
            })
            .sum();
    }
    out.regularization = cfg.regularization
        * touched_keys(batch, cfg).into_iter().map(|k| f(hc::dot(store.block(k), store.block(k)))).sum::<f64>();
    out.total = out.atomic + cfg.lambda_nested * out.nested + cfg.lambda_augmented * out.augmented + out.regularization;
    out
}

/// Analytic gradient of [`loss`] with respect to every touched block.
pub fn gradients<T: Real>(batch: &Batch, store: &EmbeddingStore<T>, cfg: &TrainConfig) -> Gradients<T> {
    loss_and_gradients(batch, store, cfg).1
}

/// Loss and gradient in one pass.
///
/// Corruptions share one side with their positive, and both scores are
/// linear in the free side: tail corruptions reuse the transformed head, head
/// corruptions reuse the tail pulled back through the rotation. Backward
/// passes are then taken once per sample on accumulated cotangents.
pub fn loss_and_gradients<T: Real>(batch: &Batch, store: &EmbeddingStore<T>, cfg: &TrainConfig) -> (LossBreakdown, Gradients<T>) {
    let [_, w_nested, w_aug] = term_weights::<T>(cfg);
    let mut grads = Gradients::new(store.dim());
    let mut out = LossBreakdown::default();

    for s in &batch.atomic {
        out.atomic += atomic_sample(store, s, T::one(), &mut grads);
    }
    if cfg.lambda_augmented != 0.0 {
        for s in &batch.augmented {
            out.augmented += atomic_sample(store, s, w_aug, &mut grads);
        }
    }
    if cfg.lambda_nested != 0.0 {
        for s in &batch.nested {
            out.nested += nested_sample(store, s, w_nested, &mut grads);
        }
    }

    let beta = T::lit(cfg.regularization);
    let mut reg = 0.0;
    for key in touched_keys(batch, cfg) {
        let p = store.block(key);
        reg += hc::dot(p, p).to_f64().unwrap_or(f64::NAN);
        if cfg.regularization != 0.0 {
            grads.axpy(key, beta + beta, p);
        }
    }
    out.regularization = cfg.regularization * reg;
    out.total = out.atomic + cfg.lambda_nested * out.nested + cfg.lambda_augmented * out.augmented + out.regularization;
    (out, grads)
}

/// Accumulates `weight ×` the gradient of one atomic sample; returns its
/// unweighted loss.
fn atomic_sample<T: Real>(store: &EmbeddingStore<T>, s: &AtomicSample, weight: T, grads: &mut Gradients<T>) -> f64 {
    let b = 4 * store.dim();
    let alg = store.algebra();
    let pos = s.positive;
    let ctx = AtomicContext::new(store, pos.relation);
    let t_pos = store.entity(pos.tail);

    let u_pos: Vec<T> = store.entity(pos.head).iter().zip(ctx.translation).map(|(a, c)| *a + *c).collect();
    let mut h_rot = vec![T::zero(); b];
    hc::mul_acc(alg, &u_pos, &ctx.rotation, &mut h_rot);
    let mut pulled = vec![T::zero(); b];
    ctx.pullback_tail(t_pos, &mut pulled);

    let mut loss = 0.0;
    // Cotangent of the transformed positive head, and weighted sum of corrupted shifted heads.
    let mut cot = vec![T::zero(); b];
    let mut u_bar = vec![T::zero(); b];
    let mut any_head = false;

    let score = hc::dot(&h_rot, t_pos);
    loss += softplus(-score).to_f64().unwrap_or(f64::NAN);
    let w = -weight * sigmoid(-score);
    hc::axpy(w, t_pos, &mut cot);
    grads.axpy(ParamKey::Entity(pos.tail.0), w, &h_rot);

    for &(side, e) in &s.negatives {
        let emb = store.entity(e);
        match side {
            Side::Tail => {
                let score = hc::dot(&h_rot, emb);
                loss += softplus(score).to_f64().unwrap_or(f64::NAN);
                let w = weight * sigmoid(score);
                hc::axpy(w, emb, &mut cot);
                grads.axpy(ParamKey::Entity(e.0), w, &h_rot);
            }
            Side::Head => {
                let u: Vec<T> = emb.iter().zip(ctx.translation).map(|(a, c)| *a + *c).collect();
                let score = hc::dot(&u, &pulled);
                loss += softplus(score).to_f64().unwrap_or(f64::NAN);
                let w = weight * sigmoid(score);
                hc::axpy(w, &u, &mut u_bar);
                grads.axpy(ParamKey::Entity(e.0), w, &pulled);
                grads.axpy(ParamKey::RelationTranslation(pos.relation.0), w, &pulled);
                any_head = true;
            }
        }
    }

    let mut d_u = vec![T::zero(); b];
    hc::mul_vjp_left_acc(alg, &ctx.rotation, &cot, &mut d_u);
    grads.axpy(ParamKey::Entity(pos.head.0), T::one(), &d_u);
    grads.axpy(ParamKey::RelationTranslation(pos.relation.0), T::one(), &d_u);

    let mut d_rot = vec![T::zero(); b];
    hc::mul_vjp_right_acc(alg, &u_pos, &cot, &mut d_rot);
    if any_head {
        hc::mul_vjp_right_acc(alg, &u_bar, t_pos, &mut d_rot);
        let mut d_t = vec![T::zero(); b];
        hc::mul_acc(alg, &u_bar, &ctx.rotation, &mut d_t);
        grads.axpy(ParamKey::Entity(pos.tail.0), T::one(), &d_t);
    }
    let mut d_raw = vec![T::zero(); b];
    hc::normalize_vjp_acc(ctx.rotation_raw, &d_rot, &mut d_raw, T::lit(hc::NORMALIZE_EPS));
    grads.axpy(ParamKey::RelationRotation(pos.relation.0), T::one(), &d_raw);
    loss
}

fn nested_sample<T: Real>(store: &EmbeddingStore<T>, s: &NestedSample, weight: T, grads: &mut Gradients<T>) -> f64 {
    let b = 4 * store.dim();
    let alg = store.algebra();
    let pos = s.positive;
    let n = pos.relation.0;
    let ctx = NestedContext::new(store, pos.relation);
    let head = TripleColumns::of(store, &pos.head);
    let tail = TripleColumns::of(store, &pos.tail);
    let head_keys = TripleColumns::<T>::keys(&pos.head);
    let tail_keys = TripleColumns::<T>::keys(&pos.tail);

    let u_pos = ctx.shifted(&head);
    let mut rotated = vec![T::zero(); 3 * b];
    ctx.rotate_shifted(&u_pos, &mut rotated);
    let mut pulled = vec![T::zero(); 3 * b];
    ctx.pullback_tail(&tail, &mut pulled);

    let mut loss = 0.0;
    let mut cot = vec![T::zero(); 3 * b];
    let mut u_bar = vec![T::zero(); 3 * b];
    let mut any_head = false;

    let add_cols = |grads: &mut Gradients<T>, keys: &[ParamKey; 3], w: T, v: &[T]| {
        for c in 0..3 {
            grads.axpy(keys[c], w, &v[c * b..(c + 1) * b]);
        }
    };
    let stack = |cols: &TripleColumns<'_, T>, out: &mut [T], w: T| {
        for c in 0..3 {
            hc::axpy(w, cols.cols[c], &mut out[c * b..(c + 1) * b]);
        }
    };

    let score = tail.dot(&rotated);
    loss += softplus(-score).to_f64().unwrap_or(f64::NAN);
    let w = -weight * sigmoid(-score);
    stack(&tail, &mut cot, w);
    add_cols(grads, &tail_keys, w, &rotated);

    for &(side, t) in &s.negatives {
        let cols = TripleColumns::of(store, &t);
        let keys = TripleColumns::<T>::keys(&t);
        match side {
            Side::Tail => {
                let score = cols.dot(&rotated);
                loss += softplus(score).to_f64().unwrap_or(f64::NAN);
                let w = weight * sigmoid(score);
                stack(&cols, &mut cot, w);
                add_cols(grads, &keys, w, &rotated);
            }
            Side::Head => {
                let u = ctx.shifted(&cols);
                let score = hc::dot(&u, &pulled);
                loss += softplus(score).to_f64().unwrap_or(f64::NAN);
                let w = weight * sigmoid(score);
                hc::axpy(w, &u, &mut u_bar);
                add_cols(grads, &keys, w, &pulled);
                for i in 0..3 {
                    grads.axpy(ParamKey::NestedTranslation(n, i as u8), w, &pulled[i * b..(i + 1) * b]);
                }
                any_head = true;
            }
        }
    }

    // Backward through the positive head's rotation with the accumulated cotangent.
    for i in 0..3 {
        let mut d_u = vec![T::zero(); b];
        for j in 0..3 {
            let cj = &cot[j * b..(j + 1) * b];
            hc::mul_vjp_left_acc(alg, ctx.rotation[3 * i + j], cj, &mut d_u);
            let cell = grads.block(ParamKey::NestedRotation(n, (3 * i + j) as u8));
            hc::mul_vjp_right_acc(alg, &u_pos[i * b..(i + 1) * b], cj, cell);
            if any_head {
                hc::mul_vjp_right_acc(alg, &u_bar[i * b..(i + 1) * b], tail.cols[j], cell);
            }
        }
        grads.axpy(head_keys[i], T::one(), &d_u);
        grads.axpy(ParamKey::NestedTranslation(n, i as u8), T::one(), &d_u);
    }
    if any_head {
        let mut d_tail = vec![T::zero(); 3 * b];
        ctx.rotate_shifted(&u_bar, &mut d_tail);
        add_cols(grads, &tail_keys, T::one(), &d_tail);
    }
    loss
}
