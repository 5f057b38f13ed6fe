//! Python module `pynestkg`.
//!
//! Hypercomplex vectors cross the boundary as flat channel-major lists of
//! length `4 * d`: all real parts, then the `i`, `j` and `k` parts.

use std::path::PathBuf;

use nestkg::checkpoint;
use nestkg::evaluation::{self, RankingReport, Task};
use nestkg::graph::{self, GraphFiles, GraphLoader, NestedGraph, Split};
use nestkg::hypercomplex::{self as hc, Algebra, Hyper4Vector};
use nestkg::patterns;
use nestkg::scoring::{self, EmbeddingStore};
use nestkg::synthetic::{self, SyntheticConfig};
use nestkg::training::{self, TrainConfig};
use pyo3::exceptions::{PyIOError, PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn to_py(e: nestkg::Error) -> PyErr {
    match e {
        nestkg::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn algebra(code: &str) -> PyResult<Algebra> {
    code.parse().map_err(to_py)
}

fn vector(v: Vec<f64>) -> PyResult<Hyper4Vector> {
    Hyper4Vector::from_flat(v).map_err(to_py)
}

/// Product `a ⊗ b` of two flat vectors under algebra `Q`, `H` or `S`.
#[pyfunction]
#[pyo3(signature = (a, b, algebra = "Q"))]
fn hamilton_product(a: Vec<f64>, b: Vec<f64>, algebra: &str) -> PyResult<Vec<f64>> {
    let alg = self::algebra(algebra)?;
    Ok(hc::hamilton_product(&vector(a)?, &vector(b)?, alg).map_err(to_py)?.into_flat())
}

/// Element-wise unit normalization.
#[pyfunction]
fn normalize(a: Vec<f64>) -> PyResult<Vec<f64>> {
    Ok(hc::normalize(&vector(a)?, hc::NORMALIZE_EPS).into_flat())
}

#[pyfunction]
fn inner(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    hc::inner(&vector(a)?, &vector(b)?).map_err(to_py)
}

#[pyclass(name = "Graph", module = "pynestkg")]
struct PyGraph {
    inner: NestedGraph,
}

#[pymethods]
impl PyGraph {
    /// Reads `{atomic,nested}_{train,valid,test}.txt` from `dir`. Passing a
    /// model reuses its vocabulary.
    #[staticmethod]
    #[pyo3(signature = (dir, augmented = None, strict = false, model = None))]
    fn load(dir: PathBuf, augmented: Option<PathBuf>, strict: bool, model: Option<&PyModel>) -> PyResult<Self> {
        let mut files = GraphFiles::in_dir(&dir);
        files.augmented = augmented;
        let mut loader = GraphLoader::new().strict(strict);
        if let Some(m) = model {
            loader = loader.with_symbols(m.inner.symbols().clone());
        }
        Ok(Self { inner: loader.load(&files).map_err(to_py)? })
    }

    /// Graph with planted implication and symmetry nested relations.
    #[staticmethod]
    #[pyo3(signature = (entities = 200, relations = 6, atomic_triples = 2000, implication_facts = 200, symmetry_facts = 200, seed = 7))]
    fn synthetic(
        entities: usize,
        relations: usize,
        atomic_triples: usize,
        implication_facts: usize,
        symmetry_facts: usize,
        seed: u64,
    ) -> PyResult<Self> {
        let cfg = SyntheticConfig { entities, relations, atomic_triples, implication_facts, symmetry_facts, seed };
        Ok(Self { inner: synthetic::generate(&cfg).map_err(to_py)? })
    }

    /// Writes the six split files into `dir`.
    fn save(&self, dir: PathBuf) -> PyResult<()> {
        std::fs::create_dir_all(&dir).map_err(|e| to_py(nestkg::Error::io(&dir, e)))?;
        self.inner.write_files(&GraphFiles::in_dir(&dir)).map_err(to_py)
    }

    /// Adds length-2 random-walk triples drawn from the training facts and
    /// returns how many were added.
    #[pyo3(signature = (walks_per_entity = 10, seed = 0))]
    fn augment(&mut self, walks_per_entity: usize, seed: u64) -> PyResult<usize> {
        let added = graph::augment_by_random_walk(&mut self.inner, 2, walks_per_entity, seed).map_err(to_py)?;
        Ok(added.len())
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("entities", s.entities)?;
        d.set_item("relations", s.relations)?;
        d.set_item("atomic_triples", s.atomic_triples)?;
        d.set_item("nested_relations", s.nested_relations)?;
        d.set_item("nested_triples", s.nested_triples)?;
        d.set_item("involved_triples", s.involved_triples)?;
        d.set_item("augmented_triples", s.augmented_triples)?;
        Ok(d)
    }

    fn atomic_triples(&self, split: &str) -> PyResult<Vec<[String; 3]>> {
        let split: Split = split.parse().map_err(to_py)?;
        Ok(self.inner.atomic.get(split).iter().map(|t| self.inner.atomic_name(t).map(str::to_owned)).collect())
    }

    fn __repr__(&self) -> String {
        format!("Graph({})", self.inner.stats())
    }
}

#[pyclass(name = "Model", module = "pynestkg")]
struct PyModel {
    inner: EmbeddingStore,
    log: Vec<training::EpochLog>,
    best_epoch: usize,
}

impl PyModel {
    fn entity_id(&self, name: &str) -> PyResult<u32> {
        self.inner.symbols().entities.get(name).ok_or_else(|| PyKeyError::new_err(format!("unknown entity '{name}'")))
    }

    fn relation_id(&self, name: &str) -> PyResult<u32> {
        self.inner.symbols().relations.get(name).ok_or_else(|| PyKeyError::new_err(format!("unknown relation '{name}'")))
    }

    fn atomic(&self, t: (String, String, String)) -> PyResult<graph::AtomicTriple> {
        Ok(graph::AtomicTriple::new(self.entity_id(&t.0)?, self.relation_id(&t.1)?, self.entity_id(&t.2)?))
    }
}

fn report<'py>(py: Python<'py>, r: &RankingReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("queries", r.query_count)?;
    d.set_item("mr", r.mr)?;
    d.set_item("mrr", r.mrr)?;
    d.set_item("hits", r.hits_at.clone())?;
    let per = PyDict::new(py);
    for (name, sub) in &r.per_relation {
        per.set_item(name, report(py, sub)?)?;
    }
    d.set_item("per_relation", per)?;
    Ok(d)
}

#[pymethods]
impl PyModel {
    /// Reads a checkpoint written by `save` or the command-line tool.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = checkpoint::load_any(&path).map_err(to_py)?.to_f64();
        Ok(Self { inner, log: Vec::new(), best_epoch: 0 })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        checkpoint::save(&self.inner, &path).map_err(to_py)
    }

    #[getter]
    fn algebra(&self) -> String {
        self.inner.algebra().code().to_string()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    #[getter]
    fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    /// One dict per epoch: the loss terms and, where computed, `valid_mrr`.
    #[getter]
    fn log<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.log
            .iter()
            .map(|e| {
                let d = PyDict::new(py);
                d.set_item("epoch", e.epoch)?;
                d.set_item("loss", e.loss.total)?;
                d.set_item("loss_atomic", e.loss.atomic)?;
                d.set_item("loss_nested", e.loss.nested)?;
                d.set_item("loss_augmented", e.loss.augmented)?;
                d.set_item("valid_mrr", e.valid_mrr)?;
                Ok(d)
            })
            .collect()
    }

    fn entity(&self, name: &str) -> PyResult<Vec<f64>> {
        Ok(self.inner.entity(nestkg::graph::EntityId(self.entity_id(name)?)).to_vec())
    }

    /// Score of the atomic fact `(head, relation, tail)`.
    fn score(&self, triple: (String, String, String)) -> PyResult<f64> {
        Ok(scoring::score_atomic(&self.inner, &self.atomic(triple)?))
    }

    /// Score of the nested fact `(head_triple, nested_relation, tail_triple)`.
    fn score_nested(&self, head: (String, String, String), relation: &str, tail: (String, String, String)) -> PyResult<f64> {
        let n = self
            .inner
            .symbols()
            .nested_relations
            .get(relation)
            .ok_or_else(|| PyKeyError::new_err(format!("unknown nested relation '{relation}'")))?;
        let nt = graph::NestedTriple::new(self.atomic(head)?, n, self.atomic(tail)?);
        Ok(scoring::score_nested(&self.inner, &nt))
    }

    /// Filtered rank metrics for `task` (`triple`, `conditional` or `base`).
    #[pyo3(signature = (graph, task = "triple", split = "test", hits = vec![1, 3, 10]))]
    fn evaluate<'py>(&self, py: Python<'py>, graph: &PyGraph, task: &str, split: &str, hits: Vec<usize>) -> PyResult<Bound<'py, PyDict>> {
        let task: Task = task.parse().map_err(to_py)?;
        let split: Split = split.parse().map_err(to_py)?;
        if graph.inner.symbols != *self.inner.symbols() {
            return Err(PyValueError::new_err("graph vocabulary differs from the model's; load it with Graph.load(dir, model=...)"));
        }
        let r = py.detach(|| evaluation::evaluate(task, &self.inner, &graph.inner, split, &hits));
        report(py, &r)
    }

    /// Nested relation name to its 3x3 grid of mean normalized real parts.
    fn heatmaps<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for m in patterns::relation_heatmaps(&self.inner) {
            d.set_item(m.relation, m.cells)?;
        }
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Model(algebra={}, dim={}, entities={})", self.algebra(), self.dim(), self.inner.num_entities())
    }
}

/// Trains a model. Keyword arguments are training settings such as
/// `algebra`, `dim`, `epochs`, `learning_rate`, `lambda_nested`, `seed`.
#[pyfunction]
#[pyo3(signature = (graph, **settings))]
fn train(py: Python<'_>, graph: &PyGraph, settings: Option<&Bound<'_, PyDict>>) -> PyResult<PyModel> {
    let mut cfg = TrainConfig::default();
    if let Some(settings) = settings {
        for (k, v) in settings.iter() {
            let key: String = k.extract()?;
            let value = if v.is_instance_of::<PyBool>() { v.extract::<bool>()?.to_string() } else { v.str()?.to_string() };
            cfg.set(&key, &value).map_err(to_py)?;
        }
    }
    let g = &graph.inner;
    let outcome = py
        .detach(|| -> nestkg::Result<_> {
            if cfg.single_precision {
                let o = training::train::<f32>(g, &cfg)?;
                Ok(training::TrainOutcome { store: o.store.cast(), log: o.log, best_epoch: o.best_epoch, best_valid_mrr: o.best_valid_mrr })
            } else {
                training::train::<f64>(g, &cfg)
            }
        })
        .map_err(to_py)?;
    Ok(PyModel { inner: outcome.store, log: outcome.log, best_epoch: outcome.best_epoch })
}

/// Constructs and verifies every nested pattern under each algebra, with a
/// corrupted construction as negative control. One dict per case.
#[pyfunction]
#[pyo3(signature = (dim = 3, trials = 100, seed = 0))]
fn pattern_suite<'py>(py: Python<'py>, dim: usize, trials: usize, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cases = patterns::run_suite(dim, trials, &mut rng).map_err(to_py)?;
    cases
        .iter()
        .map(|c| {
            let d = PyDict::new(py);
            d.set_item("algebra", c.algebra.code().to_string())?;
            d.set_item("pattern", &c.pattern)?;
            d.set_item("passed", c.passed())?;
            d.set_item("feasible", c.verification.is_some())?;
            d.set_item("max_deviation", c.verification.map(|v| v.max_deviation))?;
            d.set_item("negative_control_failed", c.negative_control_failed)?;
            d.set_item("note", &c.note)?;
            Ok(d)
        })
        .collect()
}

/// First-order pattern witnesses on the complex-like restriction of `algebra`.
#[pyfunction]
#[pyo3(signature = (algebra = "Q", dim = 3, trials = 100, seed = 0))]
fn witnesses<'py>(py: Python<'py>, algebra: &str, dim: usize, trials: usize, seed: u64) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reports = patterns::first_order_witnesses(self::algebra(algebra)?, dim, trials, &mut rng).map_err(to_py)?;
    reports
        .iter()
        .map(|w| {
            let d = PyDict::new(py);
            d.set_item("pattern", w.pattern.name())?;
            d.set_item("witness", &w.witness)?;
            d.set_item("holds", w.holds)?;
            d.set_item("max_deviation", w.max_deviation)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn pynestkg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hamilton_product, m)?)?;
    m.add_function(wrap_pyfunction!(normalize, m)?)?;
    m.add_function(wrap_pyfunction!(inner, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_suite, m)?)?;
    m.add_function(wrap_pyfunction!(witnesses, m)?)?;
    m.add_class::<PyGraph>()?;
    m.add_class::<PyModel>()?;
    Ok(())
}
