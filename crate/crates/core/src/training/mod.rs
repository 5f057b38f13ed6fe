//! Mini-batch training with Adagrad.

pub mod objective;
pub mod sampling;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluation::{self, Task};
use crate::graph::{NestedGraph, Split};
use crate::hypercomplex::{Algebra, Real};
use crate::scoring::EmbeddingStore;

pub use objective::{
    gradients, loss, loss_and_gradients, sigmoid, softplus, touched_keys, AtomicSample, Batch, Gradients,
    LossBreakdown, NestedSample, Side,
};
pub use sampling::{Example, NegativeSampler};

/// How batches are scheduled onto threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// One batch at a time; bit-identical across runs with the same seed.
    Deterministic,
    /// `threads` consecutive batches are differentiated concurrently against
    /// the same parameters, then applied in order.
    Parallel,
}

impl FromStr for TrainMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "deterministic" => Ok(TrainMode::Deterministic),
            "parallel" => Ok(TrainMode::Parallel),
            _ => Err(Error::Config(format!("unknown mode '{s}' (expected deterministic or parallel)"))),
        }
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainMode::Deterministic => "deterministic",
            TrainMode::Parallel => "parallel",
        })
    }
}

/// Hyper-parameters of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algebra: Algebra,
    pub dim: usize,
    pub learning_rate: f64,
    /// L2 coefficient `β`.
    pub regularization: f64,
    /// Weight `λ₁` of the nested term.
    pub lambda_nested: f64,
    /// Weight `λ₂` of the augmented-triple term.
    pub lambda_augmented: f64,
    pub negatives: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Validation period in epochs; 0 disables validation.
    pub valid_every: usize,
    pub seed: u64,
    /// Train in 32-bit floats.
    pub single_precision: bool,
    pub mode: TrainMode,
    pub threads: usize,
    pub filtered_negatives: bool,
    pub sampling_retries: usize,
    /// Random walks per entity when augmented triples must be generated; 0
    /// leaves the augmented set empty.
    pub augment_walks_per_entity: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algebra: Algebra::Quaternion,
            dim: 200,
            learning_rate: 0.1,
            regularization: 0.1,
            lambda_nested: 0.5,
            lambda_augmented: 0.2,
            negatives: 10,
            epochs: 500,
            batch_size: 128,
            valid_every: 50,
            seed: 0,
            single_precision: false,
            mode: TrainMode::Deterministic,
            threads: 1,
            filtered_negatives: true,
            sampling_retries: 10,
            augment_walks_per_entity: 0,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value '{value}' for '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid boolean '{value}' for '{key}'"))),
    }
}

impl TrainConfig {
    /// Every recognized key, in the order [`TrainConfig::to_key_values`] emits them.
    pub const KEYS: [&'static str; 17] = [
        "algebra",
        "dim",
        "learning_rate",
        "regularization",
        "lambda_nested",
        "lambda_augmented",
        "negatives",
        "epochs",
        "batch_size",
        "valid_every",
        "seed",
        "single_precision",
        "mode",
        "threads",
        "filtered_negatives",
        "sampling_retries",
        "augment_walks_per_entity",
    ];

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "algebra" => self.algebra = value.parse()?,
            "dim" => self.dim = parse(key, value)?,
            "learning_rate" | "alpha" => self.learning_rate = parse(key, value)?,
            "regularization" | "beta" => self.regularization = parse(key, value)?,
            "lambda_nested" | "lambda1" => self.lambda_nested = parse(key, value)?,
            "lambda_augmented" | "lambda2" => self.lambda_augmented = parse(key, value)?,
            "negatives" => self.negatives = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "valid_every" => self.valid_every = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "single_precision" => self.single_precision = parse_bool(key, value)?,
            "mode" => self.mode = value.parse()?,
            "threads" => self.threads = parse(key, value)?,
            "filtered_negatives" => self.filtered_negatives = parse_bool(key, value)?,
            "sampling_retries" => self.sampling_retries = parse(key, value)?,
            "augment_walks_per_entity" => self.augment_walks_per_entity = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_key_values(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value', got '{line}'", n + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn to_key_values(&self) -> Vec<(&'static str, String)> {
        let v: [String; 17] = [
            self.algebra.code().to_string(),
            self.dim.to_string(),
            self.learning_rate.to_string(),
            self.regularization.to_string(),
            self.lambda_nested.to_string(),
            self.lambda_augmented.to_string(),
            self.negatives.to_string(),
            self.epochs.to_string(),
            self.batch_size.to_string(),
            self.valid_every.to_string(),
            self.seed.to_string(),
            self.single_precision.to_string(),
            self.mode.to_string(),
            self.threads.to_string(),
            self.filtered_negatives.to_string(),
            self.sampling_retries.to_string(),
            self.augment_walks_per_entity.to_string(),
        ];
        Self::KEYS.into_iter().zip(v).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if self.dim == 0 {
            return bad("dim must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.threads == 0 {
            return bad("threads must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        for (name, v) in [
            ("regularization", self.regularization),
            ("lambda_nested", self.lambda_nested),
            ("lambda_augmented", self.lambda_augmented),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        Ok(())
    }
}

/// Adagrad: `G += g²; θ -= α g / (√G + 1e-10)`, with state laid out like the store.
#[derive(Debug, Clone)]
pub struct Adagrad<T = f64> {
    learning_rate: T,
    state: EmbeddingStore<T>,
}

impl<T: Real> Adagrad<T> {
    pub const EPS: f64 = 1e-10;

    pub fn new(store: &EmbeddingStore<T>, learning_rate: f64) -> Result<Self> {
        let state = EmbeddingStore::zeros(store.symbols().clone(), store.dim(), store.algebra())?;
        Ok(Self { learning_rate: T::lit(learning_rate), state })
    }

    pub fn step(&mut self, store: &mut EmbeddingStore<T>, grads: &Gradients<T>) {
        let eps = T::lit(Self::EPS);
        for (key, g) in grads.iter() {
            let acc = self.state.block_mut(key);
            let p = store.block_mut(key);
            for ((p, a), g) in p.iter_mut().zip(acc.iter_mut()).zip(g) {
                *a = *a + *g * *g;
                *p = *p - self.learning_rate * *g / (a.sqrt() + eps);
            }
        }
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    /// Summed over the epoch's batches.
    pub loss: LossBreakdown,
    pub valid_mrr: Option<f64>,
}

pub const LOG_HEADER: &str = "epoch,loss_total,loss_atomic,loss_nested,loss_augmented,loss_regularization,valid_mrr";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        let l = &self.loss;
        let mrr = self.valid_mrr.map(|m| m.to_string()).unwrap_or_default();
        format!("{},{},{},{},{},{},{}", self.epoch, l.total, l.atomic, l.nested, l.augmented, l.regularization, mrr)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct TrainOutcome<T = f64> {
    /// Parameters at the best validation point, or at the last epoch when no
    /// validation ran.
    pub store: EmbeddingStore<T>,
    pub log: Vec<EpochLog>,
    /// 0 means the initialization was never improved on.
    pub best_epoch: usize,
    pub best_valid_mrr: Option<f64>,
}

/// Validation MRR: triple prediction when the graph has validation nested
/// facts, else base link prediction on validation atomic facts.
pub fn validation_mrr<T: Real>(store: &EmbeddingStore<T>, g: &NestedGraph) -> Option<f64> {
    if !g.nested.valid.is_empty() {
        Some(evaluation::evaluate(Task::TriplePrediction, store, g, Split::Valid, &[]).mrr)
    } else if !g.atomic.valid.is_empty() {
        Some(evaluation::evaluate(Task::BaseLinkPrediction, store, g, Split::Valid, &[]).mrr)
    } else {
        None
    }
}

/// Per-epoch index cycling: each pool is shuffled and repeated up to the
/// longest pool's length.
struct Pools {
    atomic: Vec<usize>,
    nested: Vec<usize>,
    augmented: Vec<usize>,
}

impl Pools {
    fn shuffle(g: &NestedGraph, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut perm = |n: usize, active: bool| {
            let mut v: Vec<usize> = if active { (0..n).collect() } else { Vec::new() };
            v.shuffle(rng);
            v
        };
        Self {
            atomic: perm(g.atomic.train.len(), true),
            nested: perm(g.nested.train.len(), cfg.lambda_nested != 0.0),
            augmented: perm(g.augmented.len(), cfg.lambda_augmented != 0.0),
        }
    }

    fn epoch_len(&self) -> usize {
        self.atomic.len().max(self.nested.len()).max(self.augmented.len())
    }

    fn slice(pool: &[usize], range: std::ops::Range<usize>) -> impl Iterator<Item = usize> + '_ {
        let n = pool.len();
        range.filter(move |_| n > 0).map(move |i| pool[i % n.max(1)])
    }
}

fn build_batch(
    g: &NestedGraph,
    cfg: &TrainConfig,
    sampler: &NegativeSampler,
    pools: &Pools,
    range: std::ops::Range<usize>,
    rng: &mut ChaCha8Rng,
) -> Batch {
    let k = cfg.negatives;
    Batch {
        atomic: Pools::slice(&pools.atomic, range.clone())
            .map(|i| sampler.atomic(&g.atomic.train[i], false, k, rng))
            .collect(),
        nested: Pools::slice(&pools.nested, range.clone()).map(|i| sampler.nested(&g.nested.train[i], k, rng)).collect(),
        augmented: Pools::slice(&pools.augmented, range).map(|i| sampler.atomic(&g.augmented[i], true, k, rng)).collect(),
    }
}

/// Seeds of the parameter initialization and of batch/negative sampling.
fn seeds(seed: u64) -> (u64, u64) {
    (seed, seed ^ 0x9e37_79b9_7f4a_7c15)
}

pub fn train<T: Real>(g: &NestedGraph, cfg: &TrainConfig) -> Result<TrainOutcome<T>> {
    train_with_observer(g, cfg, &mut |_, _| Ok(()))
}

/// Like [`train`], calling `observer` after every validation point with the
/// current parameters.
pub fn train_with_observer<T: Real>(
    g: &NestedGraph,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&EpochLog, &EmbeddingStore<T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    let (init_seed, _) = seeds(cfg.seed);
    let store = EmbeddingStore::init(g.symbols.clone(), cfg.dim, cfg.algebra, init_seed)?;
    train_from(store, g, cfg, observer)
}

/// Continues training from `store`.
pub fn train_from<T: Real>(
    mut store: EmbeddingStore<T>,
    g: &NestedGraph,
    cfg: &TrainConfig,
    observer: &mut dyn FnMut(&EpochLog, &EmbeddingStore<T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if store.symbols() != &g.symbols || store.dim() != cfg.dim || store.algebra() != cfg.algebra {
        return Err(Error::Contract("store does not match the graph's symbols or the configured algebra/dim".into()));
    }
    let (_, sample_seed) = seeds(cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let sampler = NegativeSampler::new(g, cfg.filtered_negatives, cfg.sampling_retries);
    let mut optimizer = Adagrad::new(&store, cfg.learning_rate)?;
    let pool = match cfg.mode {
        TrainMode::Parallel if cfg.threads > 1 => Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(cfg.threads)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?,
        ),
        _ => None,
    };
    let group = pool.as_ref().map_or(1, |_| cfg.threads);

    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, EmbeddingStore<T>)> = None;

    for epoch in 1..=cfg.epochs {
        let pools = Pools::shuffle(g, cfg, &mut rng);
        let n = pools.epoch_len();
        let starts: Vec<usize> = (0..n).step_by(cfg.batch_size).collect();
        let mut epoch_loss = LossBreakdown::default();

        for (chunk_idx, chunk) in starts.chunks(group).enumerate() {
            let batches: Vec<Batch> = chunk
                .iter()
                .map(|&s| build_batch(g, cfg, &sampler, &pools, s..(s + cfg.batch_size).min(n), &mut rng))
                .collect();
            let results: Vec<(LossBreakdown, Gradients<T>)> = match &pool {
                Some(p) => p.install(|| batches.par_iter().map(|b| loss_and_gradients(b, &store, cfg)).collect()),
                None => batches.iter().map(|b| loss_and_gradients(b, &store, cfg)).collect(),
            };
            for (k, (l, grads)) in results.into_iter().enumerate() {
                if !l.is_finite() || grads.iter().any(|(_, v)| v.iter().any(|x| !x.is_finite())) {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: chunk_idx * group + k,
                        detail: format!("{l:?}"),
                    });
                }
                epoch_loss.accumulate(&l);
                optimizer.step(&mut store, &grads);
            }
        }

        let validate = cfg.valid_every > 0 && (epoch % cfg.valid_every == 0 || epoch == cfg.epochs);
        let valid_mrr = if validate { validation_mrr(&store, g) } else { None };
        let entry = EpochLog { epoch, loss: epoch_loss, valid_mrr };
        if let Some(m) = valid_mrr {
            if best.as_ref().map_or(true, |(b, _, _)| m > *b) {
                best = Some((m, epoch, store.clone()));
            }
            observer(&entry, &store)?;
        }
        log.push(entry);
    }

    Ok(match best {
        Some((mrr, epoch, best_store)) => TrainOutcome { store: best_store, log, best_epoch: epoch, best_valid_mrr: Some(mrr) },
        None => TrainOutcome { best_epoch: cfg.epochs, store, log, best_valid_mrr: None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_values_round_trip() {
        let mut cfg = TrainConfig::default();
        cfg.apply_key_values("# comment\ndim = 16\nalgebra = h\nlambda1=0.25\n\nmode = parallel # trailing\nsingle_precision = yes\n")
            .unwrap();
        assert_eq!((cfg.dim, cfg.algebra, cfg.lambda_nested), (16, Algebra::Hyperbolic, 0.25));
        assert_eq!(cfg.mode, TrainMode::Parallel);
        assert!(cfg.single_precision);

        let text: String = cfg.to_key_values().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        let mut back = TrainConfig::default();
        back.apply_key_values(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.apply_key_values("colour = red").is_err());
        assert!(cfg.apply_key_values("dim = many").is_err());
        assert!(cfg.apply_key_values("dim").is_err());
        cfg.dim = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn adagrad_first_step_moves_by_learning_rate() {
        use crate::graph::{SymbolTable, Symbols};
        use crate::scoring::ParamKey;
        let symbols = Symbols {
            entities: SymbolTable::from_names(["a"]).unwrap(),
            relations: SymbolTable::new(),
            nested_relations: SymbolTable::new(),
        };
        let mut store = EmbeddingStore::<f64>::zeros(symbols, 1, Algebra::Quaternion).unwrap();
        let mut opt = Adagrad::new(&store, 0.1).unwrap();
        let mut g = Gradients::new(1);
        g.insert_block(ParamKey::Entity(0), vec![3.0, -4.0, 0.0, 1e-3]);
        opt.step(&mut store, &g);
        let p = store.block(ParamKey::Entity(0));
        // g / sqrt(g²) = sign(g): the first step has magnitude α.
        assert!((p[0] + 0.1).abs() < 1e-9 && (p[1] - 0.1).abs() < 1e-9 && p[2] == 0.0 && (p[3] + 0.1).abs() < 1e-6);
        opt.step(&mut store, &g);
        let p = store.block(ParamKey::Entity(0));
        let second = 0.1 / 2f64.sqrt();
        assert!((p[0] + 0.1 + second).abs() < 1e-9);
    }
}
