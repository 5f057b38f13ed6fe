//! Nested factual knowledge graphs: atomic triples `(h, r, t)` plus nested
//! triples `⟨(h₁, r₁, t₁), r̂, (h₂, r₂, t₂)⟩` whose arguments are atomic triples.
//!
//! On disk every record is one line of whitespace-separated names: three
//! fields for atomic and augmented files, seven (`h1 r1 t1 nested_rel h2 r2 t2`)
//! for nested files.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Separator between the two parts of a composite (random-walk) relation name.
pub const COMPOSITE_SEPARATOR: char = '|';

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    };
}

id_type!(EntityId);
id_type!(
    /// Atomic relation, including composite relations appended by augmentation.
    RelationId
);
id_type!(NestedRelationId);

/// Bidirectional map between dense indices and external names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for name in names {
            let name = name.into();
            if table.get(&name).is_some() {
                return Err(Error::Contract(format!("duplicate symbol `{name}`")));
            }
            table.intern(&name);
        }
        Ok(table)
    }

    /// Index of `name`, inserting it if absent.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

/// The three symbol tables of a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Symbols {
    pub entities: SymbolTable,
    pub relations: SymbolTable,
    pub nested_relations: SymbolTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AtomicTriple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl AtomicTriple {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self { head: EntityId(head), relation: RelationId(relation), tail: EntityId(tail) }
    }
}

impl fmt::Display for AtomicTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.head.0, self.relation.0, self.tail.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NestedTriple {
    pub head: AtomicTriple,
    pub relation: NestedRelationId,
    pub tail: AtomicTriple,
}

impl NestedTriple {
    pub fn new(head: AtomicTriple, relation: u32, tail: AtomicTriple) -> Self {
        Self { head, relation: NestedRelationId(relation), tail }
    }
}

impl fmt::Display for NestedTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{}, {}, {}>", self.head, self.relation.0, self.tail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

/// Train / validation / test partition of one kind of record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits<T> {
    pub train: Vec<T>,
    pub valid: Vec<T>,
    pub test: Vec<T>,
}

impl<T> Default for Splits<T> {
    fn default() -> Self {
        Self { train: Vec::new(), valid: Vec::new(), test: Vec::new() }
    }
}

impl<T> Splits<T> {
    pub fn get(&self, split: Split) -> &[T] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    pub fn get_mut(&mut self, split: Split) -> &mut Vec<T> {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    /// All records in train, valid, test order.
    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.train.iter().chain(&self.valid).chain(&self.test)
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A nested factual knowledge graph with its splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestedGraph {
    pub symbols: Symbols,
    pub atomic: Splits<AtomicTriple>,
    pub nested: Splits<NestedTriple>,
    pub augmented: Vec<AtomicTriple>,
    involved: Vec<AtomicTriple>,
}

impl NestedGraph {
    /// Validates ids and split disjointness, deduplicates within each list and
    /// derives the involved-triple set.
    pub fn new(
        symbols: Symbols,
        atomic: Splits<AtomicTriple>,
        nested: Splits<NestedTriple>,
        augmented: Vec<AtomicTriple>,
    ) -> Result<Self> {
        let atomic = dedup_splits(atomic, "atomic")?;
        let nested = dedup_splits(nested, "nested")?;
        let augmented = dedup(augmented);

        let (ne, nr, nn) = (
            symbols.entities.len() as u32,
            symbols.relations.len() as u32,
            symbols.nested_relations.len() as u32,
        );
        let atomic_ok = |t: &AtomicTriple| t.head.0 < ne && t.tail.0 < ne && t.relation.0 < nr;
        if let Some(t) = atomic.iter().chain(&augmented).find(|t| !atomic_ok(t)) {
            return Err(Error::Contract(format!("atomic triple {t} references an id outside the symbol tables")));
        }
        if let Some(t) = nested.iter().find(|t| !(atomic_ok(&t.head) && atomic_ok(&t.tail) && t.relation.0 < nn)) {
            return Err(Error::Contract(format!("nested triple {t} references an id outside the symbol tables")));
        }

        let involved = involved_triples(nested.iter());
        Ok(Self { symbols, atomic, nested, augmented, involved })
    }

    /// Deduplicated atomic triples appearing as head or tail of any nested
    /// triple, in order of first appearance.
    pub fn involved_triples(&self) -> &[AtomicTriple] {
        &self.involved
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

    /// Summary counts in the order `|V|, |R|, |T|, |R̂|, |T̂|, |T|'`.
    pub fn stats(&self) -> GraphStats {
        GraphStats {
            entities: self.num_entities(),
            relations: self.num_relations(),
            atomic_triples: self.atomic.len(),
            nested_relations: self.num_nested_relations(),
            nested_triples: self.nested.len(),
            involved_triples: self.involved.len(),
            augmented_triples: self.augmented.len(),
        }
    }

    pub fn atomic_name(&self, t: &AtomicTriple) -> [&str; 3] {
        [
            self.symbols.entities.name(t.head.0),
            self.symbols.relations.name(t.relation.0),
            self.symbols.entities.name(t.tail.0),
        ]
    }

    /// Writes the graph back to the line formats it was loaded from.
    pub fn write_files(&self, files: &GraphFiles) -> Result<()> {
        for (split, path) in Split::ALL.iter().zip(&files.atomic) {
            write_atomic(path, self, self.atomic.get(*split))?;
        }
        for (split, path) in Split::ALL.iter().zip(&files.nested) {
            write_nested(path, self, self.nested.get(*split))?;
        }
        if let Some(path) = &files.augmented {
            write_atomic(path, self, &self.augmented)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphStats {
    pub entities: usize,
    pub relations: usize,
    pub atomic_triples: usize,
    pub nested_relations: usize,
    pub nested_triples: usize,
    pub involved_triples: usize,
    pub augmented_triples: usize,
}

impl fmt::Display for GraphStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "|V|={} |R|={} |T|={} |R^|={} |T^|={} |T|'={} augmented={}",
            self.entities,
            self.relations,
            self.atomic_triples,
            self.nested_relations,
            self.nested_triples,
            self.involved_triples,
            self.augmented_triples
        )
    }
}

fn involved_triples<'a>(nested: impl Iterator<Item = &'a NestedTriple>) -> Vec<AtomicTriple> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for nt in nested {
        for t in [nt.head, nt.tail] {
            if seen.insert(t) {
                out.push(t);
            }
        }
    }
    out
}

fn dedup<T: Copy + Eq + std::hash::Hash>(items: Vec<T>) -> Vec<T> {
    let mut seen = HashSet::with_capacity(items.len());
    items.into_iter().filter(|t| seen.insert(*t)).collect()
}

fn dedup_splits<T>(splits: Splits<T>, kind: &'static str) -> Result<Splits<T>>
where
    T: Copy + Eq + std::hash::Hash + fmt::Display,
{
    let out = Splits { train: dedup(splits.train), valid: dedup(splits.valid), test: dedup(splits.test) };
    let mut owner: HashMap<T, Split> = HashMap::new();
    for split in Split::ALL {
        for t in out.get(split) {
            if let Some(first) = owner.insert(*t, split) {
                return Err(Error::SplitOverlap {
                    kind,
                    triple: t.to_string(),
                    first: first.name(),
                    second: split.name(),
                });
            }
        }
    }
    Ok(out)
}

/// Paths of the seven data files of a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphFiles {
    pub atomic: [PathBuf; 3],
    pub nested: [PathBuf; 3],
    pub augmented: Option<PathBuf>,
}

impl GraphFiles {
    /// Conventional layout `dir/{atomic,nested}_{train,valid,test}.txt`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        let f = |kind: &str, split: Split| dir.join(format!("{kind}_{}.txt", split.name()));
        Self {
            atomic: Split::ALL.map(|s| f("atomic", s)),
            nested: Split::ALL.map(|s| f("nested", s)),
            augmented: None,
        }
    }

    pub fn all_paths(&self) -> Vec<&Path> {
        let mut out: Vec<&Path> = self.atomic.iter().chain(&self.nested).map(PathBuf::as_path).collect();
        out.extend(self.augmented.as_deref());
        out
    }
}

/// Builds a [`NestedGraph`] from files.
#[derive(Debug, Clone, Default)]
pub struct GraphLoader {
    strict: bool,
    frozen: Option<Symbols>,
}

impl GraphLoader {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reject entity or relation names in nested and augmented files that do
    /// not occur in the atomic files, and nested arguments that are not
    /// atomic facts.
    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    /// Resolve every name against fixed symbol tables (e.g. a checkpoint's);
    /// unknown names in any file are errors.
    pub fn with_symbols(mut self, symbols: Symbols) -> Self {
        self.frozen = Some(symbols);
        self
    }

    pub fn load(&self, files: &GraphFiles) -> Result<NestedGraph> {
        let some = |p: &PathBuf| Some(p.clone());
        self.load_paths(files.atomic.each_ref().map(some), files.nested.each_ref().map(some), files.augmented.as_deref())
    }

    /// Loads one atomic file and optionally one nested file, with every fact
    /// in the train split.
    pub fn load_unsplit(&self, atomic: &Path, nested: Option<&Path>) -> Result<NestedGraph> {
        self.load_paths([Some(atomic.to_owned()), None, None], [nested.map(Path::to_owned), None, None], None)
    }

    fn load_paths(&self, atomic_paths: [Option<PathBuf>; 3], nested_paths: [Option<PathBuf>; 3], augmented_path: Option<&Path>) -> Result<NestedGraph> {
        let frozen = self.frozen.is_some();
        let mut symbols = self.frozen.clone().unwrap_or_default();
        let mut atomic = Splits::default();
        for (split, path) in Split::ALL.iter().zip(&atomic_paths) {
            let Some(path) = path else { continue };
            let rows = read_rows(path, 3)?;
            let mut resolver = Resolver { symbols: &mut symbols, path, frozen, strict_atomic: false };
            *atomic.get_mut(*split) = rows
                .iter()
                .map(|(line, f)| resolver.atomic(*line, &f[0], &f[1], &f[2]))
                .collect::<Result<_>>()?;
        }

        let mut nested = Splits::default();
        for (split, path) in Split::ALL.iter().zip(&nested_paths) {
            let Some(path) = path else { continue };
            let rows = read_rows(path, 7)?;
            let mut resolver = Resolver { symbols: &mut symbols, path, frozen, strict_atomic: self.strict };
            *nested.get_mut(*split) = rows
                .iter()
                .map(|(line, f)| {
                    let head = resolver.atomic(*line, &f[0], &f[1], &f[2])?;
                    let rel = resolver.nested_relation(*line, &f[3])?;
                    let tail = resolver.atomic(*line, &f[4], &f[5], &f[6])?;
                    Ok(NestedTriple { head, relation: rel, tail })
                })
                .collect::<Result<_>>()?;
        }

        if self.strict {
            let facts: HashSet<AtomicTriple> = atomic.iter().copied().collect();
            for (split, path) in Split::ALL.iter().zip(&nested_paths) {
                let Some(path) = path else { continue };
                if let Some((i, nt)) = nested
                    .get(*split)
                    .iter()
                    .enumerate()
                    .find(|(_, nt)| !facts.contains(&nt.head) || !facts.contains(&nt.tail))
                {
                    return Err(Error::Contract(format!(
                        "{}: nested triple #{} {} has an argument that is not an atomic fact",
                        path.display(),
                        i + 1,
                        nt
                    )));
                }
            }
        }

        let mut augmented = Vec::new();
        if let Some(path) = augmented_path {
            let rows = read_rows(path, 3)?;
            let mut resolver = Resolver { symbols: &mut symbols, path, frozen, strict_atomic: self.strict };
            augmented = rows
                .iter()
                .map(|(line, f)| resolver.augmented(*line, &f[0], &f[1], &f[2]))
                .collect::<Result<_>>()?;
        }

        NestedGraph::new(symbols, atomic, nested, augmented)
    }
}

struct Resolver<'a> {
    symbols: &'a mut Symbols,
    path: &'a Path,
    frozen: bool,
    strict_atomic: bool,
}

impl Resolver<'_> {
    fn lookup(&self, table: &SymbolTable, kind: &'static str, line: usize, name: &str) -> Result<Option<u32>> {
        match table.get(name) {
            Some(id) => Ok(Some(id)),
            None if self.frozen || self.strict_atomic => Err(Error::UnknownName {
                path: self.path.to_owned(),
                line,
                kind,
                name: name.to_owned(),
            }),
            None => Ok(None),
        }
    }

    fn entity(&mut self, line: usize, name: &str) -> Result<EntityId> {
        let id = match self.lookup(&self.symbols.entities, "entity", line, name)? {
            Some(id) => id,
            None => self.symbols.entities.intern(name),
        };
        Ok(EntityId(id))
    }

    fn relation(&mut self, line: usize, name: &str) -> Result<RelationId> {
        let id = match self.lookup(&self.symbols.relations, "relation", line, name)? {
            Some(id) => id,
            None => self.symbols.relations.intern(name),
        };
        Ok(RelationId(id))
    }

    fn atomic(&mut self, line: usize, h: &str, r: &str, t: &str) -> Result<AtomicTriple> {
        Ok(AtomicTriple { head: self.entity(line, h)?, relation: self.relation(line, r)?, tail: self.entity(line, t)? })
    }

    fn augmented(&mut self, line: usize, h: &str, r: &str, t: &str) -> Result<AtomicTriple> {
        let head = self.entity(line, h)?;
        let tail = self.entity(line, t)?;
        let relation = match self.symbols.relations.get(r) {
            Some(id) => RelationId(id),
            None if self.frozen => {
                return Err(Error::UnknownName { path: self.path.to_owned(), line, kind: "relation", name: r.to_owned() })
            }
            None => {
                // Composite relations are new names; in strict mode their parts must be known.
                if self.strict_atomic {
                    let parts_known = r.split(COMPOSITE_SEPARATOR).count() >= 2
                        && r.split(COMPOSITE_SEPARATOR).all(|p| self.symbols.relations.get(p).is_some());
                    if !parts_known {
                        return Err(Error::UnknownName {
                            path: self.path.to_owned(),
                            line,
                            kind: "relation",
                            name: r.to_owned(),
                        });
                    }
                }
                RelationId(self.symbols.relations.intern(r))
            }
        };
        Ok(AtomicTriple { head, relation, tail })
    }

    fn nested_relation(&mut self, line: usize, name: &str) -> Result<NestedRelationId> {
        let id = match self.symbols.nested_relations.get(name) {
            Some(id) => id,
            None if self.frozen => {
                return Err(Error::UnknownName {
                    path: self.path.to_owned(),
                    line,
                    kind: "nested relation",
                    name: name.to_owned(),
                })
            }
            None => self.symbols.nested_relations.intern(name),
        };
        Ok(NestedRelationId(id))
    }
}

type Row = (usize, Vec<String>);

fn read_rows(path: &Path, fields: usize) -> Result<Vec<Row>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<String> = trimmed.split_whitespace().map(str::to_owned).collect();
        if parts.len() != fields {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!("expected {fields} fields, found {}", parts.len()),
            });
        }
        rows.push((i + 1, parts));
    }
    Ok(rows)
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

/// Writes atomic (or augmented) triples, one `head\trelation\ttail` per line.
pub fn write_atomic(path: &Path, g: &NestedGraph, triples: &[AtomicTriple]) -> Result<()> {
    let mut w = create(path)?;
    for t in triples {
        let [h, r, tl] = g.atomic_name(t);
        writeln!(w, "{h}\t{r}\t{tl}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes nested triples in the seven-field format.
pub fn write_nested(path: &Path, g: &NestedGraph, triples: &[NestedTriple]) -> Result<()> {
    let mut w = create(path)?;
    for nt in triples {
        let [h1, r1, t1] = g.atomic_name(&nt.head);
        let [h2, r2, t2] = g.atomic_name(&nt.tail);
        let nr = g.symbols.nested_relations.name(nt.relation.0);
        writeln!(w, "{h1}\t{r1}\t{t1}\t{nr}\t{h2}\t{r2}\t{t2}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Samples length-2 walks `e₁ -r₁-> e₂ -r₂-> e₃` over the atomic training
/// triples and emits `(e₁, r₁|r₂, e₃)`.
///
/// Composite relations are appended to `g`'s relation table. Output is
/// deduplicated, keeps first-occurrence order, and depends only on `seed`.
/// `g.augmented` is left untouched.
pub fn augment_by_random_walk(
    g: &mut NestedGraph,
    walk_length: usize,
    samples_per_entity: usize,
    seed: u64,
) -> Result<Vec<AtomicTriple>> {
    if walk_length != 2 {
        return Err(Error::Contract(format!("only length-2 walks are supported, got {walk_length}")));
    }
    let mut adjacency: Vec<Vec<(RelationId, EntityId)>> = vec![Vec::new(); g.num_entities()];
    for t in &g.atomic.train {
        adjacency[t.head.index()].push((t.relation, t.tail));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut walks = Vec::new();
    for (start, edges) in adjacency.iter().enumerate() {
        if edges.is_empty() {
            continue;
        }
        for _ in 0..samples_per_entity {
            let (r1, mid) = edges[rng.gen_range(0..edges.len())];
            let next = &adjacency[mid.index()];
            if next.is_empty() {
                continue;
            }
            let (r2, end) = next[rng.gen_range(0..next.len())];
            if seen.insert((start, r1, r2, end)) {
                walks.push((EntityId(start as u32), r1, r2, end));
            }
        }
    }

    let relations = &mut g.symbols.relations;
    Ok(walks
        .into_iter()
        .map(|(head, r1, r2, tail)| {
            let name = format!("{}{COMPOSITE_SEPARATOR}{}", relations.name(r1.0), relations.name(r2.0));
            AtomicTriple { head, relation: RelationId(relations.intern(&name)), tail }
        })
        .collect())
}

/// Shuffles `items` with `seed` and cuts them 8:1:1 into train/valid/test.
pub fn split_811<T: Clone>(items: &[T], seed: u64) -> Splits<T> {
    let mut shuffled = items.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = shuffled.len();
    let n_eval = n / 10;
    let test = shuffled.split_off(n - n_eval);
    let valid = shuffled.split_off(n - 2 * n_eval);
    Splits { train: shuffled, valid, test }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    fn files(dir: &Path, atomic: [&str; 3], nested: [&str; 3]) -> GraphFiles {
        GraphFiles {
            atomic: [
                write(dir, "a_train", atomic[0]),
                write(dir, "a_valid", atomic[1]),
                write(dir, "a_test", atomic[2]),
            ],
            nested: [
                write(dir, "n_train", nested[0]),
                write(dir, "n_valid", nested[1]),
                write(dir, "n_test", nested[2]),
            ],
            augmented: None,
        }
    }

    #[test]
    fn empty_nested_files_give_no_involved_triples() {
        let dir = tempfile::tempdir().unwrap();
        let f = files(dir.path(), ["a r b\nb r c\n", "", ""], ["", "", ""]);
        let g = GraphLoader::new().load(&f).unwrap();
        assert!(g.involved_triples().is_empty());
        assert_eq!(g.num_entities(), 3);
        assert_eq!(g.atomic.train.len(), 2);
    }

    #[test]
    fn duplicate_nested_lines_collapse() {
        let dir = tempfile::tempdir().unwrap();
        let line = "a r b implies a s b\n";
        let f = files(dir.path(), ["a r b\na s b\n", "", ""], [&format!("{line}{line}"), "", ""]);
        let g = GraphLoader::new().load(&f).unwrap();
        assert_eq!(g.nested.train.len(), 1);
        let oracle: HashSet<AtomicTriple> = g.nested.iter().flat_map(|n| [n.head, n.tail]).collect();
        assert_eq!(g.involved_triples().len(), oracle.len());
        assert!(g.involved_triples().len() <= 2);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let f = files(dir.path(), ["a r b\n\na r\n", "", ""], ["", "", ""]);
        match GraphLoader::new().load(&f) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn strict_mode_rejects_unknown_names() {
        let dir = tempfile::tempdir().unwrap();
        let f = files(dir.path(), ["a r b\n", "", ""], ["a r b n a r zz\n", "", ""]);
        assert!(GraphLoader::new().load(&f).is_ok());
        assert!(matches!(GraphLoader::new().strict(true).load(&f), Err(Error::UnknownName { line: 1, .. })));
    }

    #[test]
    fn overlapping_splits_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let f = files(dir.path(), ["a r b\n", "a r b\n", ""], ["", "", ""]);
        assert!(matches!(GraphLoader::new().load(&f), Err(Error::SplitOverlap { .. })));
    }

    #[test]
    fn frozen_symbols_keep_ids() {
        let dir = tempfile::tempdir().unwrap();
        let f = files(dir.path(), ["b r a\n", "", ""], ["", "", ""]);
        let symbols = Symbols {
            entities: SymbolTable::from_names(["a", "b"]).unwrap(),
            relations: SymbolTable::from_names(["r"]).unwrap(),
            nested_relations: SymbolTable::new(),
        };
        let g = GraphLoader::new().with_symbols(symbols.clone()).load(&f).unwrap();
        assert_eq!(g.atomic.train[0], AtomicTriple::new(1, 0, 0));
        let f = files(dir.path(), ["b r c\n", "", ""], ["", "", ""]);
        assert!(GraphLoader::new().with_symbols(symbols).load(&f).is_err());
    }

    fn chain_graph() -> NestedGraph {
        let symbols = Symbols {
            entities: SymbolTable::from_names(["a", "b", "c"]).unwrap(),
            relations: SymbolTable::from_names(["r1", "r2"]).unwrap(),
            nested_relations: SymbolTable::new(),
        };
        let atomic = Splits { train: vec![AtomicTriple::new(0, 0, 1), AtomicTriple::new(1, 1, 2)], ..Default::default() };
        NestedGraph::new(symbols, atomic, Splits::default(), Vec::new()).unwrap()
    }

    #[test]
    fn random_walk_finds_the_only_path() {
        let mut g = chain_graph();
        let aug = augment_by_random_walk(&mut g, 2, 50, 7).unwrap();
        assert_eq!(aug.len(), 1);
        assert_eq!(g.atomic_name(&aug[0]), ["a", "r1|r2", "c"]);
    }

    #[test]
    fn random_walk_on_single_edge_is_empty() {
        let symbols = Symbols {
            entities: SymbolTable::from_names(["a", "b"]).unwrap(),
            relations: SymbolTable::from_names(["r"]).unwrap(),
            nested_relations: SymbolTable::new(),
        };
        let atomic = Splits { train: vec![AtomicTriple::new(0, 0, 1)], ..Default::default() };
        let mut g = NestedGraph::new(symbols, atomic, Splits::default(), Vec::new()).unwrap();
        assert!(augment_by_random_walk(&mut g, 2, 10, 1).unwrap().is_empty());
        assert!(augment_by_random_walk(&mut g, 3, 10, 1).is_err());
    }

    #[test]
    fn split_is_811_and_seeded() {
        let items: Vec<u32> = (0..2000).collect();
        let a = split_811(&items, 5);
        let b = split_811(&items, 5);
        assert_eq!(a, b);
        assert_eq!((a.train.len(), a.valid.len(), a.test.len()), (1600, 200, 200));
        let mut all: Vec<u32> = a.iter().copied().collect();
        all.sort();
        assert_eq!(all, items);
    }
}
