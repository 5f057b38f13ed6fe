//! Logical patterns expressible by nested relations, and inspection of
//! learned rotation grids.
//!
//! A pattern rewrites a body triple `[h, r, t]` into a head triple. Some
//! slots are bound to fixed embeddings; the rest are free and must be handled
//! for every value. [`construct_matrix`] builds a rotation grid that performs
//! the rewrite exactly and [`verify_pattern`] checks it on random free values.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::NestedRelationId;
use crate::hypercomplex::{self as hc, Algebra, Hyper4Vector};
use crate::scoring::{rotate_triple, EmbeddingStore, NestedRelationEmbedding, TripleEmbedding};

pub const VERIFY_TOLERANCE: f64 = 1e-9;

/// Entity slot of an entity-level pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EntitySide {
    Head,
    Tail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PatternKind {
    /// `(x, r, y) ↔ (y, r, x)`
    RSymmetry,
    /// `(x, r₁, y) ↔ (y, r₂, x)`
    RInverse,
    /// `(x, r₁, y) → (x, r₂, y)`
    RImplication,
    /// `(x, r₁, y) → (y, r₂, x)`
    RInvImplication,
    /// Head: `(x₁, r, y) → (x₂, r, y)`. Tail: `(x, r, y₁) → (x, r, y₂)`.
    EImplication(EntitySide),
    /// Head: `(x₁, r₁, y) → (x₂, r₂, y)`. Tail: `(x, r₁, y₁) → (x, r₂, y₂)`.
    ERImplication(EntitySide),
    /// Head: `(x₁, r₁, y) → (y, r₂, x₂)`. Tail: `(x, r₁, y₁) → (y₂, r₂, x)`.
    ERInvImplication(EntitySide),
    /// `(x₁, r, x₂) → (y₁, r, y₂)`: E-implication on both entities at once.
    DualEImplication,
}

impl PatternKind {
    pub const ALL: [PatternKind; 11] = [
        PatternKind::RSymmetry,
        PatternKind::RInverse,
        PatternKind::RImplication,
        PatternKind::RInvImplication,
        PatternKind::EImplication(EntitySide::Head),
        PatternKind::EImplication(EntitySide::Tail),
        PatternKind::ERImplication(EntitySide::Head),
        PatternKind::ERImplication(EntitySide::Tail),
        PatternKind::ERInvImplication(EntitySide::Head),
        PatternKind::ERInvImplication(EntitySide::Tail),
        PatternKind::DualEImplication,
    ];

    /// Bound relations and bound entities, in the order of [`PatternSpec`].
    pub fn arity(self) -> (usize, usize) {
        match self {
            PatternKind::RSymmetry => (1, 0),
            PatternKind::RInverse | PatternKind::RImplication | PatternKind::RInvImplication => (2, 0),
            PatternKind::EImplication(_) => (1, 2),
            PatternKind::ERImplication(_) | PatternKind::ERInvImplication(_) => (2, 2),
            PatternKind::DualEImplication => (1, 4),
        }
    }

    /// Free entities the rule quantifies over.
    pub fn free_entities(self) -> usize {
        match self {
            PatternKind::DualEImplication => 0,
            PatternKind::EImplication(_) | PatternKind::ERImplication(_) | PatternKind::ERInvImplication(_) => 1,
            _ => 2,
        }
    }

    /// Whether the rule holds in both directions.
    pub fn is_equivalence(self) -> bool {
        matches!(self, PatternKind::RSymmetry | PatternKind::RInverse)
    }

    pub fn name(self) -> String {
        let side = |s: EntitySide| if s == EntitySide::Head { "head" } else { "tail" };
        match self {
            PatternKind::RSymmetry => "R-symmetry".into(),
            PatternKind::RInverse => "R-inverse".into(),
            PatternKind::RImplication => "R-implication".into(),
            PatternKind::RInvImplication => "R-Inv-implication".into(),
            PatternKind::EImplication(s) => format!("E-implication ({})", side(s)),
            PatternKind::ERImplication(s) => format!("E-R-implication ({})", side(s)),
            PatternKind::ERInvImplication(s) => format!("E-R-Inv-implication ({})", side(s)),
            PatternKind::DualEImplication => "Dual E-implication".into(),
        }
    }
}

impl fmt::Display for PatternKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// A pattern with its bound slots filled in.
///
/// `relations` holds `r` or `r₁, r₂`. `entities` holds the bound entities:
/// `x₁, x₂` (or `y₁, y₂` for tail variants), and `x₁, x₂, y₁, y₂` for the
/// dual pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternSpec {
    pub kind: PatternKind,
    pub relations: Vec<Hyper4Vector>,
    pub entities: Vec<Hyper4Vector>,
}

impl PatternSpec {
    pub fn new(kind: PatternKind, relations: Vec<Hyper4Vector>, entities: Vec<Hyper4Vector>) -> Result<Self> {
        let (nr, ne) = kind.arity();
        if relations.len() != nr || entities.len() != ne {
            return Err(Error::Contract(format!(
                "{kind} binds {nr} relation(s) and {ne} entit(ies), got {} and {}",
                relations.len(),
                entities.len()
            )));
        }
        let d = relations[0].dim();
        if let Some(v) = relations.iter().chain(&entities).find(|v| v.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: v.dim() });
        }
        Ok(Self { kind, relations, entities })
    }

    pub fn dim(&self) -> usize {
        self.relations[0].dim()
    }

    /// Body and head triples for the given free entities.
    pub fn instantiate(&self, free: &[Hyper4Vector]) -> Result<(TripleEmbedding, TripleEmbedding)> {
        if free.len() != self.kind.free_entities() {
            return Err(Error::Contract(format!("{} takes {} free entities", self.kind, self.kind.free_entities())));
        }
        let r = &self.relations;
        let e = &self.entities;
        let t = |a: &Hyper4Vector, b: &Hyper4Vector, c: &Hyper4Vector| TripleEmbedding::new(a.clone(), b.clone(), c.clone());
        let r2 = r.get(1).unwrap_or(&r[0]);
        Ok(match self.kind {
            PatternKind::RSymmetry | PatternKind::RInverse | PatternKind::RInvImplication => {
                (t(&free[0], &r[0], &free[1]), t(&free[1], r2, &free[0]))
            }
            PatternKind::RImplication => (t(&free[0], &r[0], &free[1]), t(&free[0], r2, &free[1])),
            PatternKind::EImplication(EntitySide::Head) | PatternKind::ERImplication(EntitySide::Head) => {
                (t(&e[0], &r[0], &free[0]), t(&e[1], r2, &free[0]))
            }
            PatternKind::EImplication(EntitySide::Tail) | PatternKind::ERImplication(EntitySide::Tail) => {
                (t(&free[0], &r[0], &e[0]), t(&free[0], r2, &e[1]))
            }
            PatternKind::ERInvImplication(EntitySide::Head) => (t(&e[0], &r[0], &free[0]), t(&free[0], r2, &e[1])),
            PatternKind::ERInvImplication(EntitySide::Tail) => (t(&free[0], &r[0], &e[0]), t(&e[1], r2, &free[0])),
            PatternKind::DualEImplication => (t(&e[0], &r[0], &e[1]), t(&e[2], &r[0], &e[3])),
        })
    }
}

fn solve(a: &Hyper4Vector, b: &Hyper4Vector, alg: Algebra, what: &str) -> Result<Hyper4Vector> {
    hc::left_solve(a, b, alg).ok_or_else(|| Error::Infeasible(format!("{what}: singular left factor under {alg}")))
}

/// Rotation grid realizing `spec` with zero translations.
///
/// Cells that must map a bound value onto another are solved element-wise
/// with [`hc::left_solve`]; a singular system, or a second constraint the
/// solution does not meet, is reported as [`Error::Infeasible`].
pub fn construct_matrix(spec: &PatternSpec, alg: Algebra) -> Result<NestedRelationEmbedding> {
    let d = spec.dim();
    let one = || Hyper4Vector::identity(d);
    let r = &spec.relations;
    let e = &spec.entities;
    let cells: Vec<((usize, usize), Hyper4Vector)> = match spec.kind {
        PatternKind::RSymmetry => vec![((0, 2), one()), ((1, 1), solve(&r[0], &r[0], alg, "r ⊗ R22 = r")?), ((2, 0), one())],
        PatternKind::RInverse => {
            let r22 = solve(&r[0], &r[1], alg, "r1 ⊗ R22 = r2")?;
            let back = hc::hamilton_product(&r[1], &r22, alg)?;
            let dev = back.max_abs_diff(&r[0])?;
            if !(dev <= VERIFY_TOLERANCE) {
                return Err(Error::Infeasible(format!(
                    "r2 ⊗ R22 = r1 fails by {dev:e} for the R22 solving r1 ⊗ R22 = r2"
                )));
            }
            vec![((0, 2), one()), ((1, 1), r22), ((2, 0), one())]
        }
        PatternKind::RImplication => vec![((0, 0), one()), ((1, 1), solve(&r[0], &r[1], alg, "r1 ⊗ R22 = r2")?), ((2, 2), one())],
        PatternKind::RInvImplication => {
            vec![((0, 2), one()), ((1, 1), solve(&r[0], &r[1], alg, "r1 ⊗ R22 = r2")?), ((2, 0), one())]
        }
        PatternKind::EImplication(EntitySide::Head) => {
            vec![((0, 0), solve(&e[0], &e[1], alg, "x1 ⊗ R11 = x2")?), ((1, 1), one()), ((2, 2), one())]
        }
        PatternKind::EImplication(EntitySide::Tail) => {
            vec![((0, 0), one()), ((1, 1), one()), ((2, 2), solve(&e[0], &e[1], alg, "y1 ⊗ R33 = y2")?)]
        }
        PatternKind::ERImplication(EntitySide::Head) => vec![
            ((0, 0), solve(&e[0], &e[1], alg, "x1 ⊗ R11 = x2")?),
            ((1, 1), solve(&r[0], &r[1], alg, "r1 ⊗ R22 = r2")?),
            ((2, 2), one()),
        ],
        PatternKind::ERImplication(EntitySide::Tail) => vec![
            ((0, 0), one()),
            ((1, 1), solve(&r[0], &r[1], alg, "r1 ⊗ R22 = r2")?),
            ((2, 2), solve(&e[0], &e[1], alg, "y1 ⊗ R33 = y2")?),
        ],
        PatternKind::ERInvImplication(EntitySide::Head) => vec![
            ((2, 0), one()),
            ((1, 1), solve(&r[0], &r[1], alg, "r1 ⊗ R22 = r2")?),
            ((0, 2), solve(&e[0], &e[1], alg, "x1 ⊗ R13 = x2")?),
        ],
        PatternKind::ERInvImplication(EntitySide::Tail) => vec![
            ((2, 0), solve(&e[0], &e[1], alg, "y1 ⊗ R31 = y2")?),
            ((1, 1), solve(&r[0], &r[1], alg, "r1 ⊗ R22 = r2")?),
            ((0, 2), one()),
        ],
        PatternKind::DualEImplication => vec![
            ((0, 0), solve(&e[0], &e[2], alg, "x1 ⊗ R11 = y1")?),
            ((1, 1), one()),
            ((2, 2), solve(&e[1], &e[3], alg, "x2 ⊗ R33 = y2")?),
        ],
    };
    NestedRelationEmbedding::with_cells(d, cells)
}

/// Outcome of [`verify_pattern`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    pub passed: bool,
    pub max_deviation: f64,
    pub trials: usize,
}

/// Uniform in `[-1, 1)` on every channel.
pub fn random_vector<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Hyper4Vector {
    Hyper4Vector::from_flat((0..4 * d).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("length is 4d")
}

/// Rotates `trials` random bodies of `spec` with `matrix` and measures the
/// largest channel deviation from the expected heads (and, for
/// equivalences, of the rotated heads from the bodies).
pub fn verify_pattern<R: Rng + ?Sized>(
    spec: &PatternSpec,
    matrix: &NestedRelationEmbedding,
    alg: Algebra,
    trials: usize,
    rng: &mut R,
) -> Result<Verification> {
    if trials == 0 {
        return Err(Error::Contract("verify_pattern needs at least one trial".into()));
    }
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let free: Vec<_> = (0..spec.kind.free_entities()).map(|_| random_vector(rng, spec.dim())).collect();
        let (body, head) = spec.instantiate(&free)?;
        worst = worst.max(deviation(&rotate_triple(&body, matrix, alg)?.max_abs_diff(&head)?));
        if spec.kind.is_equivalence() {
            worst = worst.max(deviation(&rotate_triple(&head, matrix, alg)?.max_abs_diff(&body)?));
        }
    }
    Ok(Verification { passed: worst <= VERIFY_TOLERANCE, max_deviation: worst, trials })
}

/// NaN counts as an infinite deviation.
fn deviation(v: &f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        *v
    }
}

// ---------------------------------------------------------------------------
// Proposition suite.

/// One row of [`run_suite`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteCase {
    pub algebra: Algebra,
    pub pattern: String,
    /// `None` when the construction was reported infeasible.
    pub verification: Option<Verification>,
    /// A corrupted construction failed verification, as it should.
    pub negative_control_failed: bool,
    pub note: String,
}

impl SuiteCase {
    pub fn passed(&self) -> bool {
        self.verification.is_some_and(|v| v.passed) && self.negative_control_failed
    }
}

/// Random vector whose elements are all well conditioned as left factors:
/// each element's quadratic form is at least `0.05` in magnitude.
fn well_conditioned<R: Rng + ?Sized>(rng: &mut R, d: usize, alg: Algebra) -> Hyper4Vector {
    let signs = alg.quadratic_form_signs();
    let mut v = Hyper4Vector::zeros(d);
    for k in 0..d {
        loop {
            let e: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
            let q: f64 = e.iter().zip(signs).map(|(x, s)| s * x * x).sum();
            if q.abs() >= 0.05 {
                v.set_element(k, e);
                break;
            }
        }
    }
    v
}

fn corrupt(mut m: NestedRelationEmbedding) -> NestedRelationEmbedding {
    let d = m.dim();
    let mut bump = Hyper4Vector::zeros(d);
    bump.set_element(0, [0.5, 0.25, 0.0, 0.0]);
    m.rotation[1][1] = hc::add(&m.rotation[1][1], &bump).expect("same dim");
    m
}

/// Constructs and verifies every pattern kind on `trials` random bindings
/// per algebra, each checked on one random set of free values, plus a
/// corrupted-cell negative control per kind.
///
/// R-inverse needs `r₁ ⊗ R₂₂ = r₂` and `r₂ ⊗ R₂₂ = r₁` at once; its
/// satisfiable instances are drawn as `r₂ = ±r₁` (with `R₂₂ = ±1`), and an
/// unconstrained `r₂` is checked to be reported infeasible. The dual pattern
/// is additionally checked to agree with the two single E-implications it
/// conjoins.
pub fn run_suite<R: Rng + ?Sized>(d: usize, trials: usize, rng: &mut R) -> Result<Vec<SuiteCase>> {
    let mut out = Vec::new();
    for alg in Algebra::ALL {
        for kind in PatternKind::ALL {
            let mut worst = Verification { passed: true, max_deviation: 0.0, trials: 0 };
            let mut control_failed = true;
            let mut note = String::new();
            let mut infeasible = None;
            for trial in 0..trials {
                let (nr, ne) = kind.arity();
                let mut relations: Vec<_> = (0..nr).map(|_| well_conditioned(rng, d, alg)).collect();
                let entities: Vec<_> = (0..ne).map(|_| well_conditioned(rng, d, alg)).collect();
                if kind == PatternKind::RInverse {
                    let sign = if trial % 2 == 0 { 1.0 } else { -1.0 };
                    relations[1] = Hyper4Vector::from_flat(relations[0].as_slice().iter().map(|v| sign * v).collect())?;
                }
                let spec = PatternSpec::new(kind, relations, entities)?;
                let matrix = match construct_matrix(&spec, alg) {
                    Ok(m) => m,
                    Err(Error::Infeasible(msg)) => {
                        infeasible = Some(msg);
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let v = verify_pattern(&spec, &matrix, alg, 1, rng)?;
                worst.passed &= v.passed;
                worst.max_deviation = worst.max_deviation.max(v.max_deviation);
                worst.trials += 1;
                control_failed &= !verify_pattern(&spec, &corrupt(matrix.clone()), alg, 1, rng)?.passed;

                if kind == PatternKind::DualEImplication {
                    let (x1, x2, y1, y2) = (&spec.entities[0], &spec.entities[1], &spec.entities[2], &spec.entities[3]);
                    let r = &spec.relations;
                    let head = PatternSpec::new(PatternKind::EImplication(EntitySide::Head), r.clone(), vec![x1.clone(), y1.clone()])?;
                    let tail = PatternSpec::new(PatternKind::EImplication(EntitySide::Tail), r.clone(), vec![x2.clone(), y2.clone()])?;
                    let (mh, mt) = (construct_matrix(&head, alg)?, construct_matrix(&tail, alg)?);
                    let conj = verify_pattern(&head, &mh, alg, 1, rng)?.passed
                        && verify_pattern(&tail, &mt, alg, 1, rng)?.passed
                        && matrix.rotation[0][0] == mh.rotation[0][0]
                        && matrix.rotation[2][2] == mt.rotation[2][2];
                    if !conj {
                        worst.passed = false;
                        note = "disagrees with its two E-implications".into();
                    }
                }
            }
            if kind == PatternKind::RInverse && infeasible.is_none() {
                let r1 = well_conditioned(rng, d, alg);
                let r2 = well_conditioned(rng, d, alg);
                match construct_matrix(&PatternSpec::new(kind, vec![r1, r2], vec![])?, alg) {
                    Err(Error::Infeasible(_)) => note = "r2 = ±r1; unrelated r2 reported infeasible".into(),
                    _ => {
                        worst.passed = false;
                        note = "unrelated r2 was not reported infeasible".into();
                    }
                }
            }
            if kind == PatternKind::DualEImplication && note.is_empty() {
                note = "matches the conjunction of head and tail E-implication".into();
            }
            out.push(SuiteCase {
                algebra: alg,
                pattern: kind.name(),
                verification: if infeasible.is_some() { None } else { Some(worst) },
                negative_control_failed: control_failed,
                note: infeasible.unwrap_or(note),
            });
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// First-order patterns of atomic relations.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstOrderPattern {
    /// `φ(h, r, t) = φ(t, r, h)`
    Symmetry,
    /// `φ(h, r, t) = -φ(t, r, h)`
    AntiSymmetry,
    /// `φ(h, r₁, t) = φ(t, r₂, h)`
    Inversion,
    /// `h ⊗ r₁ ⊗ r₂ = h ⊗ r₃`
    Composition,
}

impl FirstOrderPattern {
    pub const ALL: [FirstOrderPattern; 4] =
        [FirstOrderPattern::Symmetry, FirstOrderPattern::AntiSymmetry, FirstOrderPattern::Inversion, FirstOrderPattern::Composition];

    pub fn name(self) -> &'static str {
        match self {
            FirstOrderPattern::Symmetry => "symmetry",
            FirstOrderPattern::AntiSymmetry => "anti-symmetry",
            FirstOrderPattern::Inversion => "inversion",
            FirstOrderPattern::Composition => "composition",
        }
    }
}

/// A witness check on the complex-like restriction: only the real and `i`
/// channels are non-zero and translations are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport {
    pub algebra: Algebra,
    pub pattern: FirstOrderPattern,
    pub witness: String,
    pub max_deviation: f64,
    pub holds: bool,
}

/// Random vector supported on the real and `i` channels.
fn restricted<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Hyper4Vector {
    let mut v = Hyper4Vector::zeros(d);
    for k in 0..d {
        v.set_element(k, [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), 0.0, 0.0]);
    }
    v
}

/// `⟨h ⊗ unit(r), t⟩` with zero translation.
pub fn restricted_score(h: &Hyper4Vector, r: &Hyper4Vector, t: &Hyper4Vector, alg: Algebra) -> Result<f64> {
    let n = hc::normalize(r, hc::NORMALIZE_EPS);
    hc::inner(&hc::hamilton_product(h, &n, alg)?, t)
}

fn sign_unit<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Hyper4Vector {
    let mut v = Hyper4Vector::zeros(d);
    for k in 0..d {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let mut e = [0.0; 4];
        e[if rng.gen_bool(0.5) { 0 } else { 1 }] = sign;
        v.set_element(k, e);
    }
    v
}

fn conj(v: &Hyper4Vector) -> Hyper4Vector {
    let d = v.dim();
    Hyper4Vector::from_flat(v.as_slice().iter().enumerate().map(|(k, x)| if k < d { *x } else { -x }).collect())
        .expect("same length")
}

/// Deviation of one witness on one random draw.
fn witness_deviation<R: Rng + ?Sized>(pattern: FirstOrderPattern, candidate: usize, alg: Algebra, d: usize, rng: &mut R) -> Result<f64> {
    let unit = |v: Hyper4Vector| hc::normalize(&v, hc::NORMALIZE_EPS);
    Ok(match (pattern, candidate) {
        (FirstOrderPattern::Symmetry, _) => {
            let (h, t, r) = (restricted(rng, d), restricted(rng, d), Hyper4Vector::identity(d));
            (restricted_score(&h, &r, &t, alg)? - restricted_score(&t, &r, &h, alg)?).abs()
        }
        (FirstOrderPattern::AntiSymmetry, c) => {
            // Candidate 0 stays in the complex-like channels; the others use
            // a unit outside them, so the entities must use all channels.
            let (h, t) = if c == 0 { (restricted(rng, d), restricted(rng, d)) } else { (random_vector(rng, d), random_vector(rng, d)) };
            let mut e = [0.0; 4];
            e[c + 1] = 1.0;
            let r = Hyper4Vector::splat(d, e);
            (restricted_score(&h, &r, &t, alg)? + restricted_score(&t, &r, &h, alg)?).abs()
        }
        (FirstOrderPattern::Inversion, c) => {
            let (h, t) = (restricted(rng, d), restricted(rng, d));
            let r1 = unit(restricted(rng, d));
            let r2 = if c == 0 { conj(&r1) } else { r1.clone() };
            (restricted_score(&h, &r1, &t, alg)? - restricted_score(&t, &r2, &h, alg)?).abs()
        }
        (FirstOrderPattern::Composition, c) => {
            let h = restricted(rng, d);
            let (r1, r2) = if c == 0 {
                (unit(restricted(rng, d)), unit(restricted(rng, d)))
            } else {
                (sign_unit(rng, d), sign_unit(rng, d))
            };
            let r3 = hc::hamilton_product(&r1, &r2, alg)?;
            let two_hops = hc::hamilton_product(&hc::hamilton_product(&h, &r1, alg)?, &r2, alg)?;
            let one_hop = hc::hamilton_product(&h, &unit(r3), alg)?;
            two_hops.max_abs_diff(&one_hop)?
        }
    })
}

fn witness_candidates(pattern: FirstOrderPattern) -> &'static [&'static str] {
    match pattern {
        FirstOrderPattern::Symmetry => &["r = 1"],
        FirstOrderPattern::AntiSymmetry => &["r = i", "r = j", "r = k"],
        FirstOrderPattern::Inversion => &["r2 = conj(r1)", "r2 = r1"],
        FirstOrderPattern::Composition => &["r3 = unit(r1) ⊗ unit(r2)", "r1, r2 in {±1, ±i}, r3 = r1 ⊗ r2"],
    }
}

/// Tries the witnesses of each first-order pattern in order on `trials`
/// random draws and reports the first that holds, or the first candidate
/// with its deviation when none does. Entities live on the real and `i`
/// channels except for anti-symmetry candidates built on `j` or `k`.
///
/// | pattern        | candidates                                   |
/// |----------------|----------------------------------------------|
/// | symmetry       | `r = 1`                                      |
/// | anti-symmetry  | `r = i`, `r = j`, `r = k`                    |
/// | inversion      | `r₂ = conj(r₁)`, `r₂ = r₁`                   |
/// | composition    | `r₃ = unit(r₁) ⊗ unit(r₂)`, sign units       |
pub fn first_order_witnesses<R: Rng + ?Sized>(alg: Algebra, d: usize, trials: usize, rng: &mut R) -> Result<Vec<WitnessReport>> {
    let mut reports = Vec::new();
    for pattern in FirstOrderPattern::ALL {
        let mut first = None;
        for (c, name) in witness_candidates(pattern).iter().enumerate() {
            let mut worst: f64 = 0.0;
            for _ in 0..trials {
                worst = worst.max(deviation(&witness_deviation(pattern, c, alg, d, rng)?));
            }
            let report = WitnessReport {
                algebra: alg,
                pattern,
                witness: (*name).to_owned(),
                max_deviation: worst,
                holds: worst <= VERIFY_TOLERANCE,
            };
            if report.holds {
                first = Some(report);
                break;
            }
            first.get_or_insert(report);
        }
        reports.push(first.expect("every pattern has a candidate"));
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Heatmaps of learned rotation grids.

/// Mean real channel of the normalized elements of each rotation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub relation: String,
    pub cells: [[f64; 3]; 3],
}

/// Elements with (near-)zero norm contribute 0 rather than the identity.
fn mean_normalized_real(cell: &[f64], d: usize) -> f64 {
    let mut sum = 0.0;
    for k in 0..d {
        let e = [cell[k], cell[d + k], cell[2 * d + k], cell[3 * d + k]];
        let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > hc::NORMALIZE_EPS {
            sum += e[0] / n;
        }
    }
    sum / d as f64
}

pub fn relation_heatmaps(store: &EmbeddingStore) -> Vec<Heatmap> {
    let d = store.dim();
    (0..store.num_nested_relations() as u32)
        .map(|n| {
            let id = NestedRelationId(n);
            let cells =
                std::array::from_fn(|i| std::array::from_fn(|j| mean_normalized_real(store.nested_rotation_cell(id, i, j), d)));
            Heatmap { relation: store.symbols().nested_relations.name(n).to_owned(), cells }
        })
        .collect()
}

pub const HEATMAP_HEADER: &str = "nested_relation,R11,R12,R13,R21,R22,R23,R31,R32,R33";

/// One row per relation; values carry 17 significant digits, so the file
/// reads back bit-exactly.
pub fn heatmaps_to_csv(maps: &[Heatmap]) -> String {
    let mut s = String::from(HEATMAP_HEADER);
    s.push('\n');
    for m in maps {
        s.push_str(&m.relation);
        for v in m.cells.iter().flatten() {
            s.push_str(&format!(",{v:.16e}"));
        }
        s.push('\n');
    }
    s
}

pub fn heatmaps_from_csv(text: &str) -> Result<Vec<Heatmap>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Parse { path: "<heatmap csv>".into(), line: n + 1, message: m };
        // Relation names may contain commas; the nine values never do.
        let mut fields: Vec<&str> = line.rsplitn(10, ',').collect();
        fields.reverse();
        if fields.len() != 10 {
            return Err(bad(format!("expected 10 fields, got {}", fields.len())));
        }
        let mut vals = [0.0; 9];
        for (slot, raw) in vals.iter_mut().zip(&fields[1..]) {
            *slot = f64::from_str(raw.trim()).map_err(|e| bad(format!("'{raw}': {e}")))?;
        }
        out.push(Heatmap { relation: fields[0].to_owned(), cells: std::array::from_fn(|i| std::array::from_fn(|j| vals[3 * i + j])) });
    }
    Ok(out)
}

pub fn write_heatmaps(path: &Path, maps: &[Heatmap]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, heatmaps_to_csv(maps)).map_err(|e| Error::io(path, e))
}

/// Cell positions characterizing a grid shape.
pub const ANTI_DIAGONAL_CORNERS: [(usize, usize); 2] = [(0, 2), (2, 0)];
pub const DIAGONAL_CORNERS: [(usize, usize); 2] = [(0, 0), (2, 2)];

/// `min |corner| / mean |off-pattern cell|`, where the off-pattern cells are
/// those off the corners' (anti-)diagonal.
pub fn corner_dominance(map: &Heatmap, corners: &[(usize, usize); 2]) -> f64 {
    let anti = corners[0].0 != corners[0].1;
    let on_pattern = |i: usize, j: usize| if anti { i + j == 2 } else { i == j };
    let min_corner = corners.iter().map(|&(i, j)| map.cells[i][j].abs()).fold(f64::INFINITY, f64::min);
    let off: Vec<f64> =
        (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).filter(|&(i, j)| !on_pattern(i, j)).map(|(i, j)| map.cells[i][j].abs()).collect();
    let mean_off = off.iter().sum::<f64>() / off.len() as f64;
    min_corner / mean_off
}
