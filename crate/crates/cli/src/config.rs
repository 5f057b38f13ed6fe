//! Resolution of training settings: command-line flags over the config file
//! over `NESTE_SEED` (seed only) over built-in defaults.

use std::fs;
use std::path::{Component, Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use nestkg::graph::{GraphFiles, GraphLoader, NestedGraph, Split, Symbols};
use nestkg::training::{TrainConfig, TrainMode};

pub const SEED_ENV: &str = "NESTE_SEED";

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Any config key as `KEY=VALUE`. Overrides the file; named flags override it.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Q (quaternion), H (hyperbolic) or S (split).
    #[arg(long)]
    pub algebra: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub regularization: Option<f64>,
    #[arg(long)]
    pub lambda_nested: Option<f64>,
    #[arg(long)]
    pub lambda_augmented: Option<f64>,
    #[arg(long)]
    pub negatives: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub valid_every: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 forces deterministic mode. Defaults to the machine's
    /// parallelism.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub single_precision: bool,
}

fn file_keys(text: &str) -> Vec<String> {
    text.lines()
        .filter_map(|l| l.split('#').next())
        .filter_map(|l| l.split_once('='))
        .map(|(k, _)| k.trim().to_ascii_lowercase())
        .collect()
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        if let Ok(seed) = std::env::var(SEED_ENV) {
            cfg.set("seed", &seed).with_context(|| format!("{SEED_ENV}={seed}"))?;
        }
        let mut explicit: Vec<String> = Vec::new();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_key_values(&text).with_context(|| format!("in {}", path.display()))?;
            explicit.extend(file_keys(&text));
        }

        let mut flags: Vec<(&str, String)> = Vec::new();
        let mut push = |k: &'static str, v: Option<String>| {
            if let Some(v) = v {
                flags.push((k, v));
            }
        };
        push("algebra", self.algebra.clone());
        push("dim", self.dim.map(|v| v.to_string()));
        push("epochs", self.epochs.map(|v| v.to_string()));
        push("learning_rate", self.learning_rate.map(|v| v.to_string()));
        push("regularization", self.regularization.map(|v| v.to_string()));
        push("lambda_nested", self.lambda_nested.map(|v| v.to_string()));
        push("lambda_augmented", self.lambda_augmented.map(|v| v.to_string()));
        push("negatives", self.negatives.map(|v| v.to_string()));
        push("batch_size", self.batch_size.map(|v| v.to_string()));
        push("valid_every", self.valid_every.map(|v| v.to_string()));
        push("seed", self.seed.map(|v| v.to_string()));
        push("threads", self.threads.map(|v| v.to_string()));
        if self.single_precision {
            push("single_precision", Some("true".into()));
        }
        for kv in &self.overrides {
            let Some((k, v)) = kv.split_once('=') else { bail!("--set expects KEY=VALUE, got '{kv}'") };
            cfg.set(k.trim(), v.trim())?;
            explicit.push(k.trim().to_ascii_lowercase());
        }
        for (k, v) in &flags {
            cfg.set(k, v)?;
            explicit.push((*k).to_owned());
        }

        if !explicit.iter().any(|k| k == "threads") {
            cfg.threads = std::thread::available_parallelism().map_or(1, |n| n.get());
        }
        if cfg.threads <= 1 {
            cfg.mode = TrainMode::Deterministic;
        } else if !explicit.iter().any(|k| k == "mode") {
            cfg.mode = TrainMode::Parallel;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Directory holding `{atomic,nested}_{train,valid,test}.txt`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub atomic_train: Option<PathBuf>,
    #[arg(long)]
    pub atomic_valid: Option<PathBuf>,
    #[arg(long)]
    pub atomic_test: Option<PathBuf>,
    #[arg(long)]
    pub nested_train: Option<PathBuf>,
    #[arg(long)]
    pub nested_valid: Option<PathBuf>,
    #[arg(long)]
    pub nested_test: Option<PathBuf>,
    /// Precomputed augmented triples.
    #[arg(long)]
    pub augmented: Option<PathBuf>,
    /// Reject names in nested and augmented files that no atomic file defines.
    #[arg(long)]
    pub strict_names: bool,
}

impl DataArgs {
    pub fn files(&self) -> Result<GraphFiles> {
        let explicit = [
            &self.atomic_train,
            &self.atomic_valid,
            &self.atomic_test,
            &self.nested_train,
            &self.nested_valid,
            &self.nested_test,
        ];
        let mut files = match &self.data {
            Some(dir) => GraphFiles::in_dir(dir),
            None if explicit.iter().all(|p| p.is_some()) => GraphFiles::in_dir(""),
            None => bail!("give --data DIR or all six --atomic-*/--nested-* paths"),
        };
        for i in 0..Split::ALL.len() {
            if let Some(p) = explicit[i] {
                files.atomic[i] = p.clone();
            }
            if let Some(p) = explicit[3 + i] {
                files.nested[i] = p.clone();
            }
        }
        files.augmented = self.augmented.clone();
        Ok(files)
    }

    pub fn load(&self, symbols: Option<Symbols>) -> Result<(NestedGraph, GraphFiles)> {
        let files = self.files()?;
        let mut loader = GraphLoader::new().strict(self.strict_names);
        if let Some(s) = symbols {
            loader = loader.with_symbols(s);
        }
        let g = loader.load(&files)?;
        Ok((g, files))
    }
}

/// `name` inside `out_dir`; absolute paths and `..` are refused so that
/// every output stays under the output directory.
pub fn output_path(out_dir: &Path, name: &Path) -> Result<PathBuf> {
    if name.components().any(|c| !matches!(c, Component::Normal(_) | Component::CurDir)) {
        bail!("output name {} must be a relative path inside the output directory", name.display());
    }
    Ok(out_dir.join(name))
}

pub fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}
