use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn maint(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_maint"))
        .args(args)
        .current_dir(dir)
        .env_remove("MAINT_RUN_DIR")
        .output()
        .expect("spawn maint")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = maint(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap_or(-1)
}

fn read(path: impl AsRef<Path>) -> String {
    std::fs::read_to_string(path.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", path.as_ref().display()))
}

/// Small planted dataset plus a short training run in `dir`.
fn small_run(dir: &Path) {
    ok(
        dir,
        &["synth", "--out", "ds", "--users", "60", "--items", "40", "--categories", "5", "--negatives", "20"],
    );
    ok(
        dir,
        &["train", "--data", "ds", "--set", "model.d=8", "--set", "train.max_epochs=2", "--out", "tr"],
    );
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    r.records().map(|x| x.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn stats_reports_conversion_rates_of_toy_logs() {
    let tmp = TempDir::new().unwrap();
    let taobao = ok(tmp.path(), &["stats", "--input", fixture("taobao_toy.csv").to_str().unwrap(), "--format", "taobao"]);
    for line in ["click,200,0.09", "collect,100,0.07", "cart,100,0.26", "buy,54,target"] {
        assert!(taobao.contains(line), "{line} missing:\n{taobao}");
    }
    let rr = ok(
        tmp.path(),
        &["stats", "--input", fixture("retailrocket_toy").to_str().unwrap(), "--format", "retailrocket"],
    );
    assert!(rr.contains("view,100,0.16") && rr.contains("cart,25,0.76"), "{rr}");
    let click = ok(tmp.path(), &["stats", "--input", fixture("click_toy.csv").to_str().unwrap(), "--format", "generic"]);
    assert!(click.contains("click,") && click.contains(",0.50"), "{click}");
}

#[test]
fn stats_on_tiny_and_empty_logs() {
    let tmp = TempDir::new().unwrap();
    let three = ok(tmp.path(), &["stats", "--input", fixture("three_lines.csv").to_str().unwrap(), "--format", "generic"]);
    assert!(three.contains("events: 3"), "{three}");
    let empty = tmp.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = ok(tmp.path(), &["stats", "--input", empty.to_str().unwrap(), "--format", "generic"]);
    assert!(out.contains("events: 0"));
    assert!(out.trim_end().ends_with("behavior,events,conversion_rate"), "{out}");
}

#[test]
fn mostly_malformed_input_is_a_format_error() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    std::fs::write(&bad, "a,b\nc\nu,i,c,click,1\n").unwrap();
    let out = maint(tmp.path(), &["stats", "--input", bad.to_str().unwrap(), "--format", "generic"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("format error"));
}

#[test]
fn preprocess_round_trips_through_stats() {
    let tmp = TempDir::new().unwrap();
    let summary = ok(
        tmp.path(),
        &[
            "preprocess",
            "--input",
            fixture("taobao_toy.csv").to_str().unwrap(),
            "--format",
            "taobao",
            "--out",
            "ds",
            "--min-user-events",
            "2",
            "--min-item-events",
            "2",
            "--negatives",
            "5",
        ],
    );
    assert!(summary.contains("malformed: 2"), "{summary}");
    let ds = tmp.path().join("ds");
    for f in ["users.txt", "items.txt", "categories.txt", "behaviors.txt", "sequences.tsv", "timestamps.tsv", "split.txt", "meta.txt"] {
        assert!(ds.join(f).is_file(), "{f} missing");
    }
    assert_eq!(read(ds.join("behaviors.txt")).lines().collect::<Vec<_>>(), ["click", "collect", "cart", "buy"]);
    let stats = ok(tmp.path(), &["stats", "--data", "ds"]);
    assert!(stats.contains("buy,"), "{stats}");
    // a second preprocess into the same directory is refused
    let again = maint(
        tmp.path(),
        &["preprocess", "--input", fixture("taobao_toy.csv").to_str().unwrap(), "--format", "taobao", "--out", "ds"],
    );
    assert_eq!(code(&again), 2);
}

#[test]
fn preprocess_retailrocket_directory() {
    let tmp = TempDir::new().unwrap();
    ok(
        tmp.path(),
        &[
            "preprocess",
            "--input",
            fixture("retailrocket_toy").to_str().unwrap(),
            "--format",
            "retailrocket",
            "--out",
            "ds",
            "--min-user-events",
            "1",
            "--min-item-events",
            "1",
            "--negatives",
            "2",
        ],
    );
    let behaviors = read(tmp.path().join("ds/behaviors.txt"));
    assert_eq!(behaviors.lines().last(), Some("buy"));
}

#[test]
fn missing_input_leaves_no_output() {
    let tmp = TempDir::new().unwrap();
    let out = maint(tmp.path(), &["preprocess", "--input", "nope.csv", "--format", "generic", "--out", "ds"]);
    assert_eq!(code(&out), 2);
    assert!(!tmp.path().join("ds").exists());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 0);
}

#[test]
fn usage_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&maint(tmp.path(), &["train"])), 2);
    assert_eq!(code(&maint(tmp.path(), &["frobnicate"])), 2);
    assert_eq!(code(&maint(tmp.path(), &["--help"])), 0);
    let out = maint(tmp.path(), &["gradcheck", "--set", "model.bogus=1"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.J"));
}

#[test]
fn train_writes_run_directory_and_echoes_config() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    let tr = tmp.path().join("tr");
    let config = read(tr.join("config.txt"));
    for line in ["model.d=8", "model.J=3", "train.max_epochs=2", "train.leakage=prefix-masked", "eval.seeds=5"] {
        assert!(config.lines().any(|l| l == line), "{line} missing:\n{config}");
    }
    let curve = read(tr.join("loss_curve.csv"));
    assert_eq!(curve.lines().count(), 3, "{curve}");
    assert!(tr.join("best.ckpt").is_file() && tr.join("best.ckpt.config").is_file());
}

#[test]
fn evaluate_reports_one_row_per_metric_k_seed() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    let text = ok(
        tmp.path(),
        &["evaluate", "--data", "ds", "--checkpoint", "tr/best.ckpt", "--seeds", "5", "--out", "ev"],
    );
    assert!(text.starts_with("seeds: 5"));
    let rows = csv_rows(&read(tmp.path().join("ev/report.csv")));
    assert_eq!(rows.len(), 2 * 3 * 5);
    for m in ["HR", "NDCG"] {
        for k in ["2", "6", "10"] {
            let n = rows.iter().filter(|r| r[0] == m && r[1] == k).count();
            assert_eq!(n, 5, "{m}@{k}");
        }
    }
    for r in &rows {
        let v: f64 = r[3].parse().unwrap();
        assert!((0.0..=1.0).contains(&v));
    }
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    ok(tmp.path(), &["train", "--data", "ds", "--set", "model.d=8", "--set", "train.max_epochs=2", "--out", "tr2"]);
    assert_eq!(
        std::fs::read(tmp.path().join("tr/best.ckpt")).unwrap(),
        std::fs::read(tmp.path().join("tr2/best.ckpt")).unwrap()
    );
    for out in ["e1", "e2"] {
        ok(tmp.path(), &["evaluate", "--data", "ds", "--checkpoint", "tr/best.ckpt", "--seeds", "2", "--out", out]);
    }
    assert_eq!(read(tmp.path().join("e1/report.txt")), read(tmp.path().join("e2/report.txt")));
}

#[test]
fn checkpoint_from_other_dataset_is_rejected() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    ok(tmp.path(), &["synth", "--out", "other", "--users", "30", "--items", "25", "--negatives", "10"]);
    let out = maint(tmp.path(), &["evaluate", "--data", "other", "--checkpoint", "tr/best.ckpt", "--seeds", "2"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mismatch"));
}

#[test]
fn recommend_is_deterministic_and_excludes_history() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    let args = ["recommend", "--checkpoint", "tr/best.ckpt", "--data", "ds", "--user", "u00003", "--k", "5"];
    let first = ok(tmp.path(), &args);
    assert_eq!(first, ok(tmp.path(), &args));
    let rows = csv_rows(&first);
    assert_eq!(rows.len(), 5);
    let users = read(tmp.path().join("ds/users.txt"));
    let u = users.lines().position(|l| l == "u00003").unwrap();
    let items: Vec<String> = read(tmp.path().join("ds/items.txt")).lines().map(String::from).collect();
    let seq = read(tmp.path().join("ds/sequences.tsv"));
    let line = seq.lines().nth(u).unwrap();
    let history: Vec<&str> = line.split('\t').skip(1).collect();
    for r in &rows {
        let idx = items.iter().position(|i| *i == r[1]).unwrap() + 1;
        assert!(
            !history.iter().any(|ev| ev.split(':').next() == Some(&idx.to_string())),
            "item {} already seen",
            r[1]
        );
    }
    let scores: Vec<f64> = rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(scores.windows(2).all(|w| w[0] >= w[1]));
    let unknown = maint(tmp.path(), &["recommend", "--checkpoint", "tr/best.ckpt", "--data", "ds", "--user", "nobody"]);
    assert_eq!(code(&unknown), 2);
}

#[test]
fn explain_weights_sum_to_one_per_aspect() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    ok(tmp.path(), &["explain", "--checkpoint", "tr/best.ckpt", "--data", "ds", "--user", "u00000", "--out", "ex"]);
    let att = csv_rows(&read(tmp.path().join("ex/attention.csv")));
    let gates = csv_rows(&read(tmp.path().join("ex/gates.csv")));
    assert_eq!(gates.len(), 3);
    for j in 1..=3 {
        let s: f64 = att.iter().filter(|r| r[0] == j.to_string()).map(|r| r[6].parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-9, "aspect {j}: {s}");
    }
    for g in &gates {
        let beta: f64 = g[1].parse().unwrap();
        assert!(beta > 0.0 && beta < 1.0);
    }
    let behaviors = read(tmp.path().join("ds/behaviors.txt"));
    assert!(att.iter().all(|r| behaviors.lines().any(|b| b == r[4])));
}

#[test]
fn ablate_without_variants_trains_only_the_full_model() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    let text = ok(
        tmp.path(),
        &[
            "ablate", "--data", "ds", "--variants", "", "--seeds", "2", "--set", "model.d=8", "--set",
            "train.max_epochs=1", "--out", "ab",
        ],
    );
    let rows = csv_rows(&read(tmp.path().join("ab/ablation.csv")));
    assert_eq!(rows.len(), 1, "{text}");
    assert_eq!(rows[0][0], "MAINT");
    let bad = maint(tmp.path(), &["ablate", "--data", "ds", "--variants", "nope"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn ablate_labels_and_pool_checksums() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    ok(
        tmp.path(),
        &[
            "ablate", "--data", "ds", "--variants", "mp,ratt", "--seeds", "2", "--set", "model.d=8", "--set",
            "train.max_epochs=1", "--out", "ab",
        ],
    );
    let text = read(tmp.path().join("ab/ablation.csv"));
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers: Vec<String> = r.headers().unwrap().iter().map(String::from).collect();
    let rows = csv_rows(&text);
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    assert_eq!(labels, ["MAINT", "MAINT-MP", "MAINT-RAtt"]);
    let c = headers.iter().position(|h| h.contains("checksum")).expect("checksum column");
    assert!(rows.iter().all(|r| r[c] == rows[0][c]));
    assert!(tmp.path().join("ab/ablation_runs.csv").is_file());
}

#[test]
fn sweep_writes_one_row_per_value() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    ok(
        tmp.path(),
        &[
            "sweep", "--data", "ds", "--param", "J", "--values", "1,2", "--set", "model.d=8", "--set",
            "train.max_epochs=1", "--out", "sw",
        ],
    );
    let rows = csv_rows(&read(tmp.path().join("sw/sweep.csv")));
    assert_eq!(rows.len(), 2);
    let bad = maint(tmp.path(), &["sweep", "--data", "ds", "--param", "J", "--values", "x"]);
    assert_eq!(code(&bad), 2);
}

#[test]
fn gradcheck_passes_and_flags_corruption() {
    let tmp = TempDir::new().unwrap();
    let out = ok(tmp.path(), &["gradcheck"]);
    assert!(out.contains("gradient check passed"));
    let bad = maint(tmp.path(), &["gradcheck", "--corrupt", "aspect.1.value"]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("aspect.1.value"));
}

#[test]
fn run_dir_defaults_come_from_the_environment() {
    let tmp = TempDir::new().unwrap();
    small_run(tmp.path());
    let out = Command::new(env!("CARGO_BIN_EXE_maint"))
        .args(["evaluate", "--data", "ds", "--checkpoint", "tr/best.ckpt", "--seeds", "2"])
        .current_dir(tmp.path())
        .env("MAINT_RUN_DIR", "elsewhere")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("elsewhere/evaluate/report.txt").is_file());
}
