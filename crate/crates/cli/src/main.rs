mod config;
mod manifest;

/// Writes to stdout, ignoring failures such as a closed pipe so that the
/// output files are still written.
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

macro_rules! out_raw {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = write!(std::io::stdout(), $($arg)*);
    }};
}

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use nestkg::checkpoint::{self, AnyStore};
use nestkg::evaluation::{evaluate, RankingReport, Task};
use nestkg::graph::{augment_by_random_walk, split_811, write_atomic, GraphFiles, GraphLoader, NestedGraph, Split};
use nestkg::hypercomplex::{Algebra, Real};
use nestkg::patterns::{first_order_witnesses, heatmaps_to_csv, relation_heatmaps, run_suite, write_heatmaps};
use nestkg::scoring::EmbeddingStore;
use nestkg::synthetic::{generate, SyntheticConfig};
use nestkg::training::{train_with_observer, EpochLog, TrainConfig, LOG_HEADER};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use config::{create_out_dir, output_path, ConfigArgs, DataArgs};
use manifest::Manifest;

const CHECKPOINT: &str = "checkpoint.bin";
const AUGMENTED: &str = "augmented.txt";

#[derive(Parser)]
#[command(name = "nestkg", version, about = "Hypercomplex embeddings for knowledge graphs with nested facts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train embeddings and write a checkpoint, a training log and the resolved config.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Rank test (or other split) queries with a checkpoint.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// triple, conditional, base or all.
        #[arg(long, default_value = "all")]
        task: String,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, value_delimiter = ',', default_value = "1,3,10")]
        hits: Vec<usize>,
        /// Expected algebra; a checkpoint trained with another one is an error.
        #[arg(long)]
        algebra: Option<Algebra>,
        /// Expected dimension; a checkpoint of another size is an error.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Verify the pattern constructions and/or export learned rotation grids.
    Analyze {
        /// Run the pattern construction suite and the first-order witnesses.
        #[arg(long)]
        patterns: bool,
        /// Export heatmaps of the checkpoint's nested relations to this file
        /// inside the output directory.
        #[arg(long, num_args = 0..=1, default_missing_value = "heatmaps.csv")]
        heatmaps: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Generate augmented triples from length-2 random walks over train facts.
    Augment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 10)]
        walks_per_entity: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Split unsplit atomic and nested files 8:1:1.
    Split {
        #[arg(long)]
        atomic: PathBuf,
        #[arg(long)]
        nested: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Write a synthetic graph with planted implication and symmetry patterns.
    Synthetic {
        #[arg(long, default_value_t = 200)]
        entities: usize,
        #[arg(long, default_value_t = 6)]
        relations: usize,
        #[arg(long, default_value_t = 2000)]
        atomic_triples: usize,
        #[arg(long, default_value_t = 200)]
        implication_facts: usize,
        #[arg(long, default_value_t = 200)]
        symmetry_facts: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Train { data, config, out_dir } => cmd_train(&data, &config, &out_dir),
        Command::Eval { data, checkpoint, task, split, hits, algebra, dim, out_dir } => {
            cmd_eval(&data, &checkpoint, &task, &split, &hits, algebra, dim, &out_dir)
        }
        Command::Analyze { patterns, heatmaps, checkpoint, trials, dim, seed, out_dir } => {
            cmd_analyze(patterns, heatmaps.as_deref(), checkpoint.as_deref(), trials, dim, seed, &out_dir)
        }
        Command::Augment { data, walks_per_entity, seed, out_dir } => cmd_augment(&data, walks_per_entity, seed, &out_dir),
        Command::Split { atomic, nested, seed, out_dir } => cmd_split(&atomic, nested.as_deref(), seed, &out_dir),
        Command::Synthetic { entities, relations, atomic_triples, implication_facts, symmetry_facts, seed, out_dir } => {
            let cfg = SyntheticConfig { entities, relations, atomic_triples, implication_facts, symmetry_facts, seed };
            cmd_synthetic(&cfg, &out_dir)
        }
    }
}

fn record_inputs(m: &mut Manifest, files: &GraphFiles) {
    for p in files.all_paths() {
        m.input(p);
    }
}

fn cmd_train(data: &DataArgs, args: &ConfigArgs, out_dir: &Path) -> Result<ExitCode> {
    let cfg = args.resolve()?;
    let (mut g, files) = data.load(None)?;
    create_out_dir(out_dir)?;
    let mut m = Manifest::new("train");
    record_inputs(&mut m, &files);
    if let Some(c) = &args.config {
        m.input(c);
    }

    if cfg.augment_walks_per_entity > 0 {
        if files.augmented.is_some() {
            bail!("augment_walks_per_entity > 0 conflicts with --augmented; use one source of augmented triples");
        }
        let walks = augment_by_random_walk(&mut g, 2, cfg.augment_walks_per_entity, cfg.seed)?;
        g = NestedGraph::new(g.symbols, g.atomic, g.nested, walks)?;
        let path = out_dir.join(AUGMENTED);
        write_atomic(&path, &g, &g.augmented)?;
        m.output(path);
    }

    let config_path = out_dir.join("config.txt");
    let text: String = cfg.to_key_values().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
    fs::write(&config_path, &text).with_context(|| format!("writing {}", config_path.display()))?;
    for (k, v) in cfg.to_key_values() {
        m.setting(k, v);
    }
    m.output(&config_path);

    let s = g.stats();
    out!(
        "graph: {} entities, {} relations, {} atomic, {} nested relations, {} nested, {} involved, {} augmented",
        s.entities, s.relations, s.atomic_triples, s.nested_relations, s.nested_triples, s.involved_triples, s.augmented_triples
    );
    out!("training {} d={} for {} epochs ({:?}, {} thread(s))", cfg.algebra, cfg.dim, cfg.epochs, cfg.mode, cfg.threads);

    let ckpt = out_dir.join(CHECKPOINT);
    let log_path = out_dir.join("train_log.csv");
    let (log, best_epoch, best) = if cfg.single_precision { train_and_save::<f32>(&g, &cfg, &ckpt)? } else { train_and_save::<f64>(&g, &cfg, &ckpt)? };
    let rows: String = std::iter::once(LOG_HEADER.to_owned()).chain(log.iter().map(EpochLog::csv_row)).map(|r| r + "\n").collect();
    fs::write(&log_path, rows).with_context(|| format!("writing {}", log_path.display()))?;
    m.output(&ckpt);
    m.output(&log_path);
    m.write(out_dir)?;

    match best {
        Some(mrr) => out!("best validation MRR {mrr:.4} at epoch {best_epoch}"),
        None => out!("no validation points; kept epoch {best_epoch}"),
    }
    out!("checkpoint: {}", ckpt.display());
    Ok(ExitCode::SUCCESS)
}

fn train_and_save<T: Real>(g: &NestedGraph, cfg: &TrainConfig, ckpt: &Path) -> Result<(Vec<EpochLog>, usize, Option<f64>)> {
    let mut report = |l: &EpochLog, _: &EmbeddingStore<T>| {
        out!("epoch {:>4}  loss {:.4}  valid MRR {:.4}", l.epoch, l.loss.total, l.valid_mrr.unwrap_or(f64::NAN));
        Ok(())
    };
    let out = train_with_observer::<T>(g, cfg, &mut report)?;
    checkpoint::save(&out.store, ckpt)?;
    Ok((out.log, out.best_epoch, out.best_valid_mrr))
}

fn parse_split(s: &str) -> Result<Split> {
    Split::ALL.into_iter().find(|x| x.name() == s).with_context(|| format!("unknown split '{s}' (expected train, valid or test)"))
}

fn eval_tasks(task: &str) -> Result<Vec<Task>> {
    if task == "all" {
        return Ok(Task::ALL.to_vec());
    }
    task.split(',').map(|t| t.trim().parse::<Task>().map_err(Into::into)).collect()
}

fn evaluate_any(task: Task, store: &AnyStore, g: &NestedGraph, split: Split, hits: &[usize]) -> RankingReport {
    match store {
        AnyStore::F32(s) => evaluate(task, s, g, split, hits),
        AnyStore::F64(s) => evaluate(task, s, g, split, hits),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    data: &DataArgs,
    ckpt: &Path,
    task: &str,
    split: &str,
    hits: &[usize],
    algebra: Option<Algebra>,
    dim: Option<usize>,
    out_dir: &Path,
) -> Result<ExitCode> {
    let tasks = eval_tasks(task)?;
    let split = parse_split(split)?;
    let store = checkpoint::load_any(ckpt)?;
    if let Some(a) = algebra.filter(|a| *a != store.algebra()) {
        bail!("checkpoint {} uses algebra {} but {} was requested", ckpt.display(), store.algebra(), a);
    }
    if let Some(d) = dim.filter(|d| *d != store.dim()) {
        bail!("checkpoint {} has d = {} but d = {} was requested", ckpt.display(), store.dim(), d);
    }
    let (g, files) = data.load(Some(store.symbols().clone()))?;
    create_out_dir(out_dir)?;

    let mut csv = String::from("task,split,relation,queries,mr,mrr");
    for k in hits {
        csv.push_str(&format!(",hits@{k}"));
    }
    csv.push('\n');
    let row = |task: Task, rel: &str, r: &RankingReport| {
        let mut line = format!("{},{},{},{},{},{}", task.name(), split.name(), rel, r.query_count, r.mr, r.mrr);
        for k in hits {
            line.push_str(&format!(",{}", r.hits(*k).unwrap_or(0.0)));
        }
        line + "\n"
    };

    out!("{:<12} {:<6} {:<24} {:>8} {:>10} {:>7}{}", "task", "split", "relation", "queries", "MR", "MRR", hits.iter().map(|k| format!(" {:>8}", format!("Hits@{k}"))).collect::<String>());
    for &t in &tasks {
        let r = evaluate_any(t, &store, &g, split, hits);
        let print = |rel: &str, r: &RankingReport| {
            let h: String = hits.iter().map(|k| format!(" {:>8.3}", r.hits(*k).unwrap_or(0.0))).collect();
            out!("{:<12} {:<6} {:<24} {:>8} {:>10.3} {:>7.3}{h}", t.name(), split.name(), rel, r.query_count, r.mr, r.mrr);
        };
        print("all", &r);
        csv.push_str(&row(t, "all", &r));
        for (rel, pr) in &r.per_relation {
            print(rel, pr);
            csv.push_str(&row(t, rel, pr));
        }
    }

    let path = out_dir.join("eval.csv");
    fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    let mut m = Manifest::new("eval");
    m.setting("tasks", tasks.iter().map(|t| t.name()).collect::<Vec<_>>().join(","));
    m.setting("split", split.name());
    m.setting("hits", hits.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","));
    m.setting("algebra", store.algebra());
    m.setting("dim", store.dim());
    m.input(ckpt);
    record_inputs(&mut m, &files);
    m.output(&path);
    m.write(out_dir)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_analyze(
    patterns: bool,
    heatmaps: Option<&Path>,
    ckpt: Option<&Path>,
    trials: usize,
    dim: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<ExitCode> {
    if !patterns && heatmaps.is_none() {
        bail!("nothing to do: pass --patterns and/or --heatmaps");
    }
    let heatmap_path = match heatmaps {
        Some(name) => {
            let Some(ckpt) = ckpt else { bail!("--heatmaps needs --checkpoint") };
            Some((output_path(out_dir, name)?, ckpt))
        }
        None => None,
    };
    create_out_dir(out_dir)?;
    let mut m = Manifest::new("analyze");
    let mut ok = true;

    if patterns {
        m.setting("trials", trials);
        m.setting("dim", dim);
        m.setting("seed", seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cases = run_suite(dim, trials, &mut rng)?;
        let mut csv = String::from("algebra,pattern,passed,max_deviation,trials,negative_control_failed,note\n");
        for c in &cases {
            let (dev, n) = c.verification.map_or((f64::NAN, 0), |v| (v.max_deviation, v.trials));
            out!("{} {:<34} {}  max deviation {dev:.2e}  {}", c.algebra.code(), c.pattern, if c.passed() { "PASS" } else { "FAIL" }, c.note);
            csv.push_str(&format!("{},{},{},{dev:e},{n},{},\"{}\"\n", c.algebra.code(), c.pattern, c.passed(), c.negative_control_failed, c.note));
            ok &= c.passed();
        }
        let path = out_dir.join("patterns.csv");
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        m.output(&path);

        let mut csv = String::from("algebra,pattern,witness,holds,max_deviation\n");
        for alg in Algebra::ALL {
            for w in first_order_witnesses(alg, dim, trials, &mut rng)? {
                out!("{} {:<34} {}  via {} ({:.2e})", alg.code(), w.pattern.name(), if w.holds { "holds" } else { "no witness" }, w.witness, w.max_deviation);
                csv.push_str(&format!("{},{},\"{}\",{},{:e}\n", alg.code(), w.pattern.name(), w.witness, w.holds, w.max_deviation));
            }
        }
        let path = out_dir.join("witnesses.csv");
        fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        m.output(&path);
    }

    if let Some((path, ckpt)) = heatmap_path {
        let store = checkpoint::load_any(ckpt)?.to_f64();
        let maps = relation_heatmaps(&store);
        out_raw!("{}", heatmaps_to_csv(&maps));
        write_heatmaps(&path, &maps)?;
        m.input(ckpt);
        m.output(&path);
    }
    m.write(out_dir)?;
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_augment(data: &DataArgs, walks: usize, seed: u64, out_dir: &Path) -> Result<ExitCode> {
    let (mut g, files) = data.load(None)?;
    create_out_dir(out_dir)?;
    let triples = augment_by_random_walk(&mut g, 2, walks, seed)?;
    let path = out_dir.join(AUGMENTED);
    write_atomic(&path, &g, &triples)?;
    out!("{} augmented triples -> {}", triples.len(), path.display());
    let mut m = Manifest::new("augment");
    m.setting("walks_per_entity", walks);
    m.setting("seed", seed);
    record_inputs(&mut m, &files);
    m.output(path);
    m.write(out_dir)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_split(atomic: &Path, nested: Option<&Path>, seed: u64, out_dir: &Path) -> Result<ExitCode> {
    let all = GraphLoader::new().load_unsplit(atomic, nested)?;
    let g = NestedGraph::new(
        all.symbols.clone(),
        split_811(&all.atomic.train, seed),
        split_811(&all.nested.train, seed.wrapping_add(1)),
        Vec::new(),
    )?;
    create_out_dir(out_dir)?;
    let files = GraphFiles::in_dir(out_dir);
    g.write_files(&files)?;
    let mut m = Manifest::new("split");
    m.setting("seed", seed);
    m.input(atomic);
    if let Some(n) = nested {
        m.input(n);
    }
    for p in files.all_paths() {
        m.output(p);
    }
    m.write(out_dir)?;
    out!("atomic {}/{}/{}, nested {}/{}/{}", g.atomic.train.len(), g.atomic.valid.len(), g.atomic.test.len(), g.nested.train.len(), g.nested.valid.len(), g.nested.test.len());
    Ok(ExitCode::SUCCESS)
}

fn cmd_synthetic(cfg: &SyntheticConfig, out_dir: &Path) -> Result<ExitCode> {
    let g = generate(cfg)?;
    create_out_dir(out_dir)?;
    let files = GraphFiles::in_dir(out_dir);
    g.write_files(&files)?;
    let mut m = Manifest::new("synthetic");
    for (k, v) in [
        ("entities", cfg.entities as u64),
        ("relations", cfg.relations as u64),
        ("atomic_triples", cfg.atomic_triples as u64),
        ("implication_facts", cfg.implication_facts as u64),
        ("symmetry_facts", cfg.symmetry_facts as u64),
        ("seed", cfg.seed),
    ] {
        m.setting(k, v);
    }
    for p in files.all_paths() {
        m.output(p);
    }
    m.write(out_dir)?;
    let s = g.stats();
    out!("{} entities, {} atomic, {} nested, {} involved -> {}", s.entities, s.atomic_triples, s.nested_triples, s.involved_triples, out_dir.display());
    Ok(ExitCode::SUCCESS)
}
