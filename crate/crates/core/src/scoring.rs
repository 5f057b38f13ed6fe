//! Parameter storage and the atomic / nested scoring functions.
//!
//! An atomic triple scores as `⟨(h ⊕ r_b) ⊗ unit(r_θ), t⟩`. A nested triple
//! `⟨T_i, r̂, T_j⟩` arranges each atomic triple as the 1×3 row `[h, r_θ, t]`,
//! translates it by the nested relation's 1×3 translation, multiplies it by
//! the 3×3 rotation grid with the Hamilton product as scalar multiplication,
//! and takes the matrix inner product with `T_j`.
//!
//! Nested rotation cells are applied as stored: zero and non-unit cells are
//! what the logical-pattern constructions in [`crate::patterns`] need.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{AtomicTriple, EntityId, NestedRelationId, NestedTriple, RelationId, Symbols};
use crate::hypercomplex::{self as hc, Algebra, Hyper4Vector, Real};

/// Rotation and translation of an atomic relation.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicRelationEmbedding<T = f64> {
    /// Stored unnormalized; normalized element-wise when applied.
    pub rotation: Hyper4Vector<T>,
    pub translation: Hyper4Vector<T>,
}

/// 3×3 rotation grid and 1×3 translation row of a nested relation.
#[derive(Debug, Clone, PartialEq)]
pub struct NestedRelationEmbedding<T = f64> {
    /// `rotation[i][j]` multiplies input column `i` into output column `j`.
    pub rotation: [[Hyper4Vector<T>; 3]; 3],
    pub translation: [Hyper4Vector<T>; 3],
}

impl<T: Real> NestedRelationEmbedding<T> {
    pub fn zeros(d: usize) -> Self {
        let z = || Hyper4Vector::zeros(d);
        Self { rotation: [[z(), z(), z()], [z(), z(), z()], [z(), z(), z()]], translation: [z(), z(), z()] }
    }

    /// Identity rotation grid, zero translation.
    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d);
        for i in 0..3 {
            m.rotation[i][i] = Hyper4Vector::identity(d);
        }
        m
    }

    /// Grid with `cells` placed at `(row, col)`; every other cell zero.
    pub fn with_cells(d: usize, cells: impl IntoIterator<Item = ((usize, usize), Hyper4Vector<T>)>) -> Result<Self> {
        let mut m = Self::zeros(d);
        for ((i, j), v) in cells {
            if v.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: v.dim() });
            }
            m.rotation[i][j] = v;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.translation[0].dim()
    }
}

/// An atomic triple as the 1×3 row `[h, r, t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TripleEmbedding<T = f64> {
    pub cols: [Hyper4Vector<T>; 3],
}

impl<T: Real> TripleEmbedding<T> {
    pub fn new(h: Hyper4Vector<T>, r: Hyper4Vector<T>, t: Hyper4Vector<T>) -> Self {
        Self { cols: [h, r, t] }
    }

    /// Largest absolute channel difference over all three columns.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        let mut m = T::zero();
        for (a, b) in self.cols.iter().zip(&other.cols) {
            m = m.max(a.max_abs_diff(b)?);
        }
        Ok(m)
    }
}

/// Addresses one `4·d` parameter block of an [`EmbeddingStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamKey {
    Entity(u32),
    RelationRotation(u32),
    RelationTranslation(u32),
    /// Nested relation id and row-major cell index `3 * i + j`.
    NestedRotation(u32, u8),
    NestedTranslation(u32, u8),
}

/// All trainable parameters plus the symbol tables they are indexed by.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore<T = f64> {
    pub(crate) algebra: Algebra,
    pub(crate) dim: usize,
    pub(crate) symbols: Symbols,
    pub(crate) entities: Vec<T>,
    pub(crate) rel_rotation: Vec<T>,
    pub(crate) rel_translation: Vec<T>,
    pub(crate) nested_rotation: Vec<T>,
    pub(crate) nested_translation: Vec<T>,
}

impl<T: Real> EmbeddingStore<T> {
    /// All-zero parameters sized for `symbols`.
    pub fn zeros(symbols: Symbols, dim: usize, algebra: Algebra) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        let b = 4 * dim;
        Ok(Self {
            algebra,
            dim,
            entities: vec![T::zero(); symbols.entities.len() * b],
            rel_rotation: vec![T::zero(); symbols.relations.len() * b],
            rel_translation: vec![T::zero(); symbols.relations.len() * b],
            nested_rotation: vec![T::zero(); symbols.nested_relations.len() * 9 * b],
            nested_translation: vec![T::zero(); symbols.nested_relations.len() * 3 * b],
            symbols,
        })
    }

    /// Random initialization.
    ///
    /// Entity and relation channels are uniform in `±0.5/√d`. Nested rotation
    /// grids start at the identity plus noise of the same scale, so early
    /// nested scores track column-wise similarity.
    pub fn init(symbols: Symbols, dim: usize, algebra: Algebra, seed: u64) -> Result<Self> {
        let mut store = Self::zeros(symbols, dim, algebra)?;
        let bound = 0.5 / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |buf: &mut [T]| {
            for v in buf {
                *v = T::lit(rng.gen_range(-bound..bound));
            }
        };
        fill(&mut store.entities);
        fill(&mut store.rel_rotation);
        fill(&mut store.rel_translation);
        fill(&mut store.nested_rotation);
        fill(&mut store.nested_translation);
        let b = 4 * dim;
        for n in 0..store.symbols.nested_relations.len() {
            for i in 0..3 {
                let cell = &mut store.nested_rotation[(n * 9 + 4 * i) * b..][..b];
                for v in &mut cell[..dim] {
                    *v = *v + T::one();
                }
            }
        }
        Ok(store)
    }

    pub fn algebra(&self) -> Algebra {
        self.algebra
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symbols(&self) -> &Symbols {
        &self.symbols
    }

    pub fn num_entities(&self) -> usize {
        self.symbols.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.symbols.relations.len()
    }

    pub fn num_nested_relations(&self) -> usize {
        self.symbols.nested_relations.len()
    }

    fn block_len(&self) -> usize {
        4 * self.dim
    }

    pub fn entity(&self, e: EntityId) -> &[T] {
        let b = self.block_len();
        &self.entities[e.index() * b..][..b]
    }

    pub fn relation_rotation(&self, r: RelationId) -> &[T] {
        let b = self.block_len();
        &self.rel_rotation[r.index() * b..][..b]
    }

    pub fn relation_translation(&self, r: RelationId) -> &[T] {
        let b = self.block_len();
        &self.rel_translation[r.index() * b..][..b]
    }

    pub fn nested_rotation_cell(&self, n: NestedRelationId, i: usize, j: usize) -> &[T] {
        let b = self.block_len();
        &self.nested_rotation[(n.index() * 9 + 3 * i + j) * b..][..b]
    }

    pub fn nested_translation_cell(&self, n: NestedRelationId, i: usize) -> &[T] {
        let b = self.block_len();
        &self.nested_translation[(n.index() * 3 + i) * b..][..b]
    }

    pub fn contains(&self, key: ParamKey) -> bool {
        match key {
            ParamKey::Entity(e) => (e as usize) < self.num_entities(),
            ParamKey::RelationRotation(r) | ParamKey::RelationTranslation(r) => (r as usize) < self.num_relations(),
            ParamKey::NestedRotation(n, c) => (n as usize) < self.num_nested_relations() && c < 9,
            ParamKey::NestedTranslation(n, c) => (n as usize) < self.num_nested_relations() && c < 3,
        }
    }

    fn block_range(&self, key: ParamKey) -> (usize, usize) {
        let b = self.block_len();
        let start = match key {
            ParamKey::Entity(i) | ParamKey::RelationRotation(i) | ParamKey::RelationTranslation(i) => i as usize * b,
            ParamKey::NestedRotation(n, c) => (n as usize * 9 + c as usize) * b,
            ParamKey::NestedTranslation(n, c) => (n as usize * 3 + c as usize) * b,
        };
        (start, start + b)
    }

    /// Parameter block `key`.
    pub fn block(&self, key: ParamKey) -> &[T] {
        let (s, e) = self.block_range(key);
        match key {
            ParamKey::Entity(_) => &self.entities[s..e],
            ParamKey::RelationRotation(_) => &self.rel_rotation[s..e],
            ParamKey::RelationTranslation(_) => &self.rel_translation[s..e],
            ParamKey::NestedRotation(..) => &self.nested_rotation[s..e],
            ParamKey::NestedTranslation(..) => &self.nested_translation[s..e],
        }
    }

    pub fn block_mut(&mut self, key: ParamKey) -> &mut [T] {
        let (s, e) = self.block_range(key);
        match key {
            ParamKey::Entity(_) => &mut self.entities[s..e],
            ParamKey::RelationRotation(_) => &mut self.rel_rotation[s..e],
            ParamKey::RelationTranslation(_) => &mut self.rel_translation[s..e],
            ParamKey::NestedRotation(..) => &mut self.nested_rotation[s..e],
            ParamKey::NestedTranslation(..) => &mut self.nested_translation[s..e],
        }
    }

    /// Every parameter block, in a fixed order.
    pub fn keys(&self) -> impl Iterator<Item = ParamKey> + '_ {
        let ne = self.num_entities() as u32;
        let nr = self.num_relations() as u32;
        let nn = self.num_nested_relations() as u32;
        (0..ne)
            .map(ParamKey::Entity)
            .chain((0..nr).map(ParamKey::RelationRotation))
            .chain((0..nr).map(ParamKey::RelationTranslation))
            .chain((0..nn).flat_map(|n| (0..9).map(move |c| ParamKey::NestedRotation(n, c))))
            .chain((0..nn).flat_map(|n| (0..3).map(move |c| ParamKey::NestedTranslation(n, c))))
    }

    pub fn entity_embedding(&self, e: EntityId) -> Hyper4Vector<T> {
        Hyper4Vector::from_flat(self.entity(e).to_vec()).expect("block length")
    }

    pub fn set_entity_embedding(&mut self, e: EntityId, v: &Hyper4Vector<T>) -> Result<()> {
        self.check_dim(v)?;
        self.block_mut(ParamKey::Entity(e.0)).copy_from_slice(v.as_slice());
        Ok(())
    }

    pub fn atomic_relation(&self, r: RelationId) -> AtomicRelationEmbedding<T> {
        AtomicRelationEmbedding {
            rotation: Hyper4Vector::from_flat(self.relation_rotation(r).to_vec()).expect("block length"),
            translation: Hyper4Vector::from_flat(self.relation_translation(r).to_vec()).expect("block length"),
        }
    }

    pub fn set_atomic_relation(&mut self, r: RelationId, emb: &AtomicRelationEmbedding<T>) -> Result<()> {
        self.check_dim(&emb.rotation)?;
        self.check_dim(&emb.translation)?;
        self.block_mut(ParamKey::RelationRotation(r.0)).copy_from_slice(emb.rotation.as_slice());
        self.block_mut(ParamKey::RelationTranslation(r.0)).copy_from_slice(emb.translation.as_slice());
        Ok(())
    }

    pub fn nested_relation(&self, n: NestedRelationId) -> NestedRelationEmbedding<T> {
        let cell = |v: &[T]| Hyper4Vector::from_flat(v.to_vec()).expect("block length");
        NestedRelationEmbedding {
            rotation: std::array::from_fn(|i| std::array::from_fn(|j| cell(self.nested_rotation_cell(n, i, j)))),
            translation: std::array::from_fn(|i| cell(self.nested_translation_cell(n, i))),
        }
    }

    pub fn set_nested_relation(&mut self, n: NestedRelationId, emb: &NestedRelationEmbedding<T>) -> Result<()> {
        for i in 0..3 {
            self.check_dim(&emb.translation[i])?;
            self.block_mut(ParamKey::NestedTranslation(n.0, i as u8)).copy_from_slice(emb.translation[i].as_slice());
            for j in 0..3 {
                self.check_dim(&emb.rotation[i][j])?;
                self.block_mut(ParamKey::NestedRotation(n.0, (3 * i + j) as u8))
                    .copy_from_slice(emb.rotation[i][j].as_slice());
            }
        }
        Ok(())
    }

    fn check_dim(&self, v: &Hyper4Vector<T>) -> Result<()> {
        if v.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: v.dim() });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        [&self.entities, &self.rel_rotation, &self.rel_translation, &self.nested_rotation, &self.nested_translation]
            .iter()
            .all(|buf| buf.iter().all(|v| v.is_finite()))
    }

    /// Converts every parameter to another precision.
    pub fn cast<U: Real>(&self) -> EmbeddingStore<U> {
        let c = |buf: &[T]| buf.iter().map(|v| U::lit(v.to_f64().unwrap_or(f64::NAN))).collect();
        EmbeddingStore {
            algebra: self.algebra,
            dim: self.dim,
            symbols: self.symbols.clone(),
            entities: c(&self.entities),
            rel_rotation: c(&self.rel_rotation),
            rel_translation: c(&self.rel_translation),
            nested_rotation: c(&self.nested_rotation),
            nested_translation: c(&self.nested_translation),
        }
    }
}

/// `φ(h, r, t) = ⟨(h ⊕ r_b) ⊗ unit(r_θ), t⟩`.
pub fn score_atomic<T: Real>(store: &EmbeddingStore<T>, triple: &AtomicTriple) -> T {
    let ctx = AtomicContext::new(store, triple.relation);
    let mut out = vec![T::zero(); 4 * store.dim];
    ctx.transform_head(store.entity(triple.head), &mut out);
    hc::dot(&out, store.entity(triple.tail))
}

/// `[h, r_θ, t]` with the raw rotation vector as the relation column.
pub fn triple_embedding<T: Real>(store: &EmbeddingStore<T>, triple: &AtomicTriple) -> TripleEmbedding<T> {
    let cell = |v: &[T]| Hyper4Vector::from_flat(v.to_vec()).expect("block length");
    TripleEmbedding {
        cols: [
            cell(store.entity(triple.head)),
            cell(store.relation_rotation(triple.relation)),
            cell(store.entity(triple.tail)),
        ],
    }
}

/// `T'_j = Σ_i (T_i ⊕ b_i) ⊗ R_ij`.
pub fn rotate_triple<T: Real>(triple: &TripleEmbedding<T>, rel: &NestedRelationEmbedding<T>, alg: Algebra) -> Result<TripleEmbedding<T>> {
    let d = rel.dim();
    let mut shifted = Vec::with_capacity(3);
    for i in 0..3 {
        shifted.push(hc::add(&triple.cols[i], &rel.translation[i])?);
    }
    let mut cols = [Hyper4Vector::zeros(d), Hyper4Vector::zeros(d), Hyper4Vector::zeros(d)];
    for (j, col) in cols.iter_mut().enumerate() {
        for (i, u) in shifted.iter().enumerate() {
            let p = hc::hamilton_product(u, &rel.rotation[i][j], alg)?;
            *col = hc::add(col, &p)?;
        }
    }
    Ok(TripleEmbedding { cols })
}

/// Matrix inner product `Σ_col ⟨A_col, B_col⟩`.
pub fn triple_inner<T: Real>(a: &TripleEmbedding<T>, b: &TripleEmbedding<T>) -> Result<T> {
    let mut acc = T::zero();
    for (x, y) in a.cols.iter().zip(&b.cols) {
        acc = acc + hc::inner(x, y)?;
    }
    Ok(acc)
}

/// `ρ(T_i, r̂, T_j) = ⟨rotate(T_i), T_j⟩`.
pub fn score_nested<T: Real>(store: &EmbeddingStore<T>, nt: &NestedTriple) -> T {
    let ctx = NestedContext::new(store, nt.relation);
    let head = TripleColumns::of(store, &nt.head);
    let tail = TripleColumns::of(store, &nt.tail);
    let mut out = vec![T::zero(); 12 * store.dim];
    ctx.forward(&head, &mut out);
    tail.dot(&out)
}

// ---------------------------------------------------------------------------
// Borrowed fast paths shared by training and evaluation.

/// The three parameter blocks of a triple embedding, borrowed from a store.
#[derive(Clone, Copy)]
pub(crate) struct TripleColumns<'a, T> {
    pub cols: [&'a [T]; 3],
}

impl<'a, T: Real> TripleColumns<'a, T> {
    pub fn of(store: &'a EmbeddingStore<T>, t: &AtomicTriple) -> Self {
        Self { cols: [store.entity(t.head), store.relation_rotation(t.relation), store.entity(t.tail)] }
    }

    pub fn keys(t: &AtomicTriple) -> [ParamKey; 3] {
        [ParamKey::Entity(t.head.0), ParamKey::RelationRotation(t.relation.0), ParamKey::Entity(t.tail.0)]
    }

    /// Inner product with a contiguous `3 × 4d` buffer.
    pub fn dot(&self, other: &[T]) -> T {
        let b = self.cols[0].len();
        (0..3).fold(T::zero(), |acc, c| acc + hc::dot(self.cols[c], &other[c * b..(c + 1) * b]))
    }
}

/// Atomic relation with its rotation normalized once.
pub(crate) struct AtomicContext<'a, T> {
    pub alg: Algebra,
    pub rotation_raw: &'a [T],
    pub rotation: Vec<T>,
    pub translation: &'a [T],
}

impl<'a, T: Real> AtomicContext<'a, T> {
    pub fn new(store: &'a EmbeddingStore<T>, r: RelationId) -> Self {
        let raw = store.relation_rotation(r);
        let mut rotation = vec![T::zero(); raw.len()];
        hc::normalize_into(raw, &mut rotation, T::lit(hc::NORMALIZE_EPS));
        Self { alg: store.algebra, rotation_raw: raw, rotation, translation: store.relation_translation(r) }
    }

    /// `out = (h ⊕ r_b) ⊗ unit(r_θ)`.
    pub fn transform_head(&self, h: &[T], out: &mut [T]) {
        let u: Vec<T> = h.iter().zip(self.translation).map(|(a, b)| *a + *b).collect();
        out.fill(T::zero());
        hc::mul_acc(self.alg, &u, &self.rotation, out);
    }

    /// `out` with `φ(h, r, t) = ⟨h ⊕ r_b, out⟩` for every `h`.
    pub fn pullback_tail(&self, t: &[T], out: &mut [T]) {
        out.fill(T::zero());
        hc::mul_vjp_left_acc(self.alg, &self.rotation, t, out);
    }
}

/// Nested relation borrowed from a store.
pub(crate) struct NestedContext<'a, T> {
    pub alg: Algebra,
    pub dim: usize,
    pub rotation: [&'a [T]; 9],
    pub translation: [&'a [T]; 3],
}

impl<'a, T: Real> NestedContext<'a, T> {
    pub fn new(store: &'a EmbeddingStore<T>, n: NestedRelationId) -> Self {
        Self {
            alg: store.algebra,
            dim: store.dim,
            rotation: std::array::from_fn(|c| store.nested_rotation_cell(n, c / 3, c % 3)),
            translation: std::array::from_fn(|i| store.nested_translation_cell(n, i)),
        }
    }

    /// The translated head columns `U_i = T_i ⊕ b_i` as a `3 × 4d` buffer.
    pub fn shifted(&self, head: &TripleColumns<'_, T>) -> Vec<T> {
        let b = 4 * self.dim;
        let mut u = vec![T::zero(); 3 * b];
        for i in 0..3 {
            for (k, v) in u[i * b..(i + 1) * b].iter_mut().enumerate() {
                *v = head.cols[i][k] + self.translation[i][k];
            }
        }
        u
    }

    /// `out = rotate(head)` as a `3 × 4d` buffer.
    pub fn forward(&self, head: &TripleColumns<'_, T>, out: &mut [T]) {
        let u = self.shifted(head);
        self.rotate_shifted(&u, out);
    }

    pub fn rotate_shifted(&self, u: &[T], out: &mut [T]) {
        let b = 4 * self.dim;
        out.fill(T::zero());
        for j in 0..3 {
            let oj = &mut out[j * b..(j + 1) * b];
            for i in 0..3 {
                hc::mul_acc(self.alg, &u[i * b..(i + 1) * b], self.rotation[3 * i + j], oj);
            }
        }
    }

    /// `out` (a `3 × 4d` buffer `G`) with `ρ = Σ_i ⟨U_i, G_i⟩` for every head.
    pub fn pullback_tail(&self, tail: &TripleColumns<'_, T>, out: &mut [T]) {
        let b = 4 * self.dim;
        out.fill(T::zero());
        for i in 0..3 {
            let gi = &mut out[i * b..(i + 1) * b];
            for j in 0..3 {
                hc::mul_vjp_left_acc(self.alg, self.rotation[3 * i + j], tail.cols[j], gi);
            }
        }
    }
}
