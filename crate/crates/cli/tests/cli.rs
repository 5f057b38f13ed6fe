use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use nestkg::checkpoint;
use nestkg::evaluation::{evaluate, Task};
use nestkg::graph::{GraphFiles, GraphLoader, Split};
use nestkg::hypercomplex::Algebra;
use nestkg::scoring::EmbeddingStore;

fn nestkg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nestkg")).args(args).env_remove("NESTE_SEED").output().unwrap()
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "stdout:\n{stdout}\nstderr:\n{}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synthetic(dir: &Path) {
    ok(&nestkg(&[
        "synthetic",
        "--entities",
        "40",
        "--atomic-triples",
        "300",
        "--implication-facts",
        "40",
        "--symmetry-facts",
        "40",
        "--out-dir",
        p(dir),
    ]));
}

/// Synthetic data plus a checkpoint trained to fit its training facts.
struct Fixture {
    data: PathBuf,
    checkpoint: PathBuf,
    _dir: tempfile::TempDir,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        synthetic(&data);
        let run = dir.path().join("run");
        ok(&nestkg(&["train", "--data", p(&data), "--dim", "32", "--epochs", "30", "--valid-every", "10", "--threads", "1", "--out-dir", p(&run)]));
        Fixture { data, checkpoint: run.join("checkpoint.bin"), _dir: dir }
    })
}

fn config_value(run: &Path, key: &str) -> String {
    let text = fs::read_to_string(run.join("config.txt")).unwrap();
    text.lines().find_map(|l| l.strip_prefix(&format!("{key} = "))).unwrap().to_owned()
}

#[test]
fn zero_epochs_writes_the_initialized_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "algebra = H\ndim = 6\n").unwrap();
    synthetic(&dir.path().join("data"));
    let run = dir.path().join("run");
    ok(&nestkg(&["train", "--config", p(&cfg), "--epochs", "0", "--data", p(&dir.path().join("data")), "--out-dir", p(&run)]));
    let store = checkpoint::load::<f64>(&run.join("checkpoint.bin")).unwrap();
    let init = EmbeddingStore::<f64>::init(store.symbols().clone(), 6, Algebra::Hyperbolic, 0).unwrap();
    assert_eq!(checkpoint::encode(&store), checkpoint::encode(&init));
    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("cfg.txt") && manifest.contains("checkpoint.bin") && manifest.contains("algebra = H"));
}

#[test]
fn missing_data_file_is_named() {
    let dir = tempfile::tempdir().unwrap();
    synthetic(dir.path());
    fs::remove_file(dir.path().join("nested_valid.txt")).unwrap();
    let out = nestkg(&["train", "--data", p(dir.path()), "--epochs", "0", "--out-dir", p(&dir.path().join("run"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nested_valid.txt"));
}

#[test]
fn deterministic_runs_give_identical_checkpoint_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synthetic(&data);
    let hash = |name: &str| {
        let run = dir.path().join(name);
        ok(&nestkg(&["train", "--data", p(&data), "--dim", "8", "--epochs", "3", "--seed", "4", "--threads", "1", "--out-dir", p(&run)]));
        let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
        manifest.lines().find(|l| l.ends_with("checkpoint.bin")).unwrap().split_whitespace().next().unwrap().to_owned()
    };
    assert_eq!(hash("a"), hash("b"));
}

#[test]
fn seed_precedence_is_flag_then_file_then_environment() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synthetic(&data);
    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "seed = 3\n").unwrap();
    let train = |name: &str, extra: &[&str]| {
        let run = dir.path().join(name);
        let mut args = vec!["train", "--data", p(&data), "--epochs", "0", "--dim", "4", "--out-dir"];
        args.push(p(&run));
        args.extend(extra);
        let out = Command::new(env!("CARGO_BIN_EXE_nestkg")).args(&args).env("NESTE_SEED", "5").output().unwrap();
        ok(&out);
        config_value(&run, "seed")
    };
    assert_eq!(train("env", &[]), "5");
    assert_eq!(train("file", &["--config", p(&cfg)]), "3");
    assert_eq!(train("flag", &["--config", p(&cfg), "--seed", "9"]), "9");
    assert_eq!(train("set", &["--config", p(&cfg), "--set", "seed=11"]), "11");
}

#[test]
fn single_thread_forces_deterministic_mode() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    synthetic(&data);
    let run = dir.path().join("run");
    ok(&nestkg(&["train", "--data", p(&data), "--epochs", "0", "--threads", "1", "--set", "mode=parallel", "--out-dir", p(&run)]));
    assert_eq!(config_value(&run, "mode"), "deterministic");
    let run = dir.path().join("run2");
    ok(&nestkg(&["train", "--data", p(&data), "--epochs", "1", "--dim", "4", "--threads", "2", "--out-dir", p(&run)]));
    assert_eq!(config_value(&run, "mode"), "parallel");
}

#[test]
fn eval_of_a_fitted_checkpoint_prints_perfect_mrr() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&nestkg(&["eval", "--data", p(&f.data), "--checkpoint", p(&f.checkpoint), "--task", "triple", "--split", "train", "--out-dir", p(dir.path())]));
    let row = out.lines().find(|l| l.starts_with("triple") && l.contains(" all ")).unwrap();
    let fields: Vec<&str> = row.split_whitespace().collect();
    assert_eq!(fields[5], "1.000", "{row}");
}

#[test]
fn eval_csv_matches_the_library() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&nestkg(&["eval", "--data", p(&f.data), "--checkpoint", p(&f.checkpoint), "--task", "base", "--hits", "1,3,10", "--out-dir", p(dir.path())]));
    let csv = fs::read_to_string(dir.path().join("eval.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.iter().filter(|h| h.starts_with("hits@")).count(), 3);

    let store = checkpoint::load::<f64>(&f.checkpoint).unwrap();
    let g = GraphLoader::new().with_symbols(store.symbols().clone()).load(&GraphFiles::in_dir(&f.data)).unwrap();
    let r = evaluate(Task::BaseLinkPrediction, &store, &g, Split::Test, &[1, 3, 10]);
    let all: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(all[2], "all");
    assert_eq!(all[3].parse::<usize>().unwrap(), r.query_count);
    assert_eq!(all[4].parse::<f64>().unwrap(), r.mr);
    assert_eq!(all[5].parse::<f64>().unwrap(), r.mrr);
    for (i, k) in [1, 3, 10].iter().enumerate() {
        assert_eq!(all[6 + i].parse::<f64>().unwrap(), r.hits(*k).unwrap());
    }
    assert_eq!(lines.count(), r.per_relation.len());
}

#[test]
fn eval_rejects_mismatched_algebra_or_dim() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let base = ["eval", "--data", p(&f.data), "--checkpoint", p(&f.checkpoint), "--out-dir", p(dir.path())];
    for extra in [["--algebra", "S"], ["--dim", "31"]] {
        let out = nestkg(&[&base[..], &extra[..]].concat());
        assert!(!out.status.success());
        assert!(String::from_utf8_lossy(&out.stderr).contains("checkpoint"));
    }
    ok(&nestkg(&[&base[..], &["--algebra", "Q", "--dim", "32", "--task", "triple"][..]].concat()));
}

#[test]
fn analyze_patterns_passes() {
    let dir = tempfile::tempdir().unwrap();
    ok(&nestkg(&["analyze", "--patterns", "--trials", "20", "--out-dir", p(dir.path())]));
    let csv = fs::read_to_string(dir.path().join("patterns.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 33);
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("true")));
    assert!(dir.path().join("witnesses.csv").exists());
}

#[test]
fn analyze_heatmaps_needs_a_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let out = nestkg(&["analyze", "--heatmaps", "--out-dir", p(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("--checkpoint"));
}

#[test]
fn analyze_heatmaps_writes_one_row_per_nested_relation() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    ok(&nestkg(&["analyze", "--heatmaps", "maps/h.csv", "--checkpoint", p(&f.checkpoint), "--out-dir", p(dir.path())]));
    let maps = nestkg::patterns::heatmaps_from_csv(&fs::read_to_string(dir.path().join("maps/h.csv")).unwrap()).unwrap();
    assert_eq!(maps.len(), 2);
    let out = nestkg(&["analyze", "--heatmaps", "../escape.csv", "--checkpoint", p(&f.checkpoint), "--out-dir", p(dir.path())]);
    assert!(!out.status.success());
}

#[test]
fn augment_then_train_with_augmented_triples() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let aug = dir.path().join("aug");
    ok(&nestkg(&["augment", "--data", p(&f.data), "--walks-per-entity", "3", "--seed", "1", "--out-dir", p(&aug)]));
    let file = aug.join("augmented.txt");
    let text = fs::read_to_string(&file).unwrap();
    assert!(text.lines().count() > 0 && text.lines().all(|l| l.split('\t').nth(1).unwrap().contains('|')));
    let run = dir.path().join("run");
    let out = ok(&nestkg(&["train", "--data", p(&f.data), "--augmented", p(&file), "--epochs", "1", "--dim", "4", "--threads", "1", "--out-dir", p(&run)]));
    assert!(!out.contains(" 0 augmented"));
}

#[test]
fn split_cuts_eight_one_one() {
    let dir = tempfile::tempdir().unwrap();
    let atomic: String = (0..100).map(|i| format!("e{i}\tr{}\te{}\n", i % 3, (i * 7) % 100)).collect();
    let nested: String = (0..20).map(|i| format!("e{i}\tr{}\te{}\tn\te{}\tr{}\te{}\n", i % 3, (i * 7) % 100, i + 1, (i + 1) % 3, ((i + 1) * 7) % 100)).collect();
    fs::write(dir.path().join("all.txt"), atomic).unwrap();
    fs::write(dir.path().join("nested.txt"), nested).unwrap();
    let out_dir = dir.path().join("split");
    ok(&nestkg(&["split", "--atomic", p(&dir.path().join("all.txt")), "--nested", p(&dir.path().join("nested.txt")), "--seed", "2", "--out-dir", p(&out_dir)]));
    let count = |name: &str| fs::read_to_string(out_dir.join(name)).unwrap().lines().count();
    assert_eq!((count("atomic_train.txt"), count("atomic_valid.txt"), count("atomic_test.txt")), (80, 10, 10));
    assert_eq!((count("nested_train.txt"), count("nested_valid.txt"), count("nested_test.txt")), (16, 2, 2));
    let g = GraphLoader::new().strict(true).load(&GraphFiles::in_dir(&out_dir)).unwrap();
    assert_eq!(g.atomic.len(), 100);
}
