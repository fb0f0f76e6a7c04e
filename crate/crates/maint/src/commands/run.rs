use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use maint_core::data::DatasetSplit;
use maint_core::evaluation::{evaluate, PopularityBasis, PopularityScorer, Target};
use maint_core::model::{Maint, ModelConfig, Variant};
use maint_core::training::{fit, Checkpoint, EpochRecord, FitResult, KvConfig};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::{save_checkpoint, Dataset};
use crate::report::{f4, seed_compare, EvalReport, Metric, SeedMetrics, TTest, Table};

/// Model settings with the vocabulary sizes of `split`.
pub fn sized_config(config: &KvConfig, split: &DatasetSplit) -> KvConfig {
    KvConfig {
        model: config.model.clone().sized_for(split),
        train: config.train.clone(),
    }
}

/// Refuse a checkpoint whose vocabulary sizes differ from the dataset's.
pub fn check_compatible(model: &ModelConfig, split: &DatasetSplit) -> Result<()> {
    let pairs = [
        ("model.n_items", model.n_items, split.n_items),
        ("model.n_categories", model.n_categories, split.n_categories),
        ("model.n_behaviors", model.n_behaviors, split.n_behaviors),
        ("model.n_buckets", model.n_buckets, split.bucketizer.len()),
        ("model.target_behavior", model.target_behavior, split.target_behavior),
    ];
    let diffs: Vec<String> = pairs
        .iter()
        .filter(|(_, a, b)| a != b)
        .map(|(k, a, b)| format!("{k}={a} but the dataset has {b}"))
        .collect();
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(CliError::input(format!(
            "checkpoint/config mismatch with dataset: {}",
            diffs.join("; ")
        )))
    }
}

/// Fit a fresh model on `ds` with early stopping. The returned model holds
/// the best epoch's parameters.
pub fn train_model(
    ds: &Dataset,
    config: &KvConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(Maint, FitResult, KvConfig)> {
    let effective = sized_config(config, &ds.split);
    effective.train.validate()?;
    let mut model = Maint::new(effective.model.clone(), effective.train.seed)?;
    let result = fit(&mut model, &ds.split, &effective.train, on_epoch)?;
    Ok((model, result, effective))
}

pub fn loss_curve_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,mean_loss,batches,tuples,validation_hr10,improved\n");
    for r in history {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.stats.epoch, r.stats.mean_loss, r.stats.batches, r.stats.tuples, r.validation_hr10, r.improved
        );
    }
    s
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub fit: FitResult,
    pub checkpoint: PathBuf,
    pub effective: RunConfig,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Train and write `config.txt` (before training starts), `loss_curve.csv`
/// and `best.ckpt` with its config snapshot into `out`.
pub fn train(
    ds: &Dataset,
    config: &RunConfig,
    out: &Path,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    config.validate()?;
    let effective = RunConfig {
        kv: sized_config(&config.kv, &ds.split),
        ..config.clone()
    };
    effective.kv.model.validate()?;
    create_dir(out)?;
    write(&out.join("config.txt"), &effective.to_text())?;
    let (model, fit, kv) = train_model(ds, &config.kv, on_epoch)?;
    write(&out.join("loss_curve.csv"), &loss_curve_csv(&fit.history))?;
    let ck = Checkpoint {
        config: kv,
        params: model.params.clone(),
        epoch: fit.best_epoch,
        validation_history: fit.history.iter().map(|r| r.validation_hr10).collect(),
    };
    let path = out.join("best.ckpt");
    save_checkpoint(&path, &ck)?;
    Ok(TrainOutcome {
        fit,
        checkpoint: path,
        effective,
    })
}

/// Negative pools for evaluation seed `i`: the stored pools for `i = 0`,
/// redrawn with seed `base + i` otherwise.
pub fn pools_for(split: &DatasetSplit, i: usize) -> DatasetSplit {
    if i == 0 {
        split.clone()
    } else {
        split.resample_negatives(split.seed.wrapping_add(i as u64))
    }
}

fn seed_metrics(
    scorer: &dyn maint_core::evaluation::Scorer,
    split: &DatasetSplit,
    ks: &[usize],
    seed: u64,
) -> Result<SeedMetrics> {
    let e = evaluate(scorer, split, Target::Test, ks)?;
    Ok(SeedMetrics {
        seed,
        users: e.users(),
        excluded: e.excluded,
        missing: e.missing,
        hr: e.hr,
        ndcg: e.ndcg,
    })
}

/// Test-set evaluation of `model` over `seeds` negative pools, with the
/// popularity baselines on the stored pools as notes.
pub fn evaluate_model(model: &Maint, ds: &Dataset, ks: &[usize], seeds: usize) -> Result<EvalReport> {
    check_compatible(model.config(), &ds.split)?;
    if seeds == 0 {
        return Err(CliError::input("--seeds must be at least 1"));
    }
    let mut runs = Vec::with_capacity(seeds);
    for i in 0..seeds {
        let split = pools_for(&ds.split, i);
        runs.push(seed_metrics(model, &split, ks, split.seed)?);
    }
    let mut notes = Vec::new();
    for (basis, name) in [
        (PopularityBasis::AllEvents, "all_events"),
        (PopularityBasis::TargetEvents, "target_events"),
    ] {
        let pop = PopularityScorer::from_split(&ds.split, basis);
        let m = seed_metrics(&pop, &ds.split, ks, ds.split.seed)?;
        for (pos, &k) in ks.iter().enumerate() {
            notes.push((format!("baseline.popularity_{name}.HR@{k}"), m.hr[pos].to_string()));
        }
    }
    Ok(EvalReport {
        ks: ks.to_vec(),
        runs,
        notes,
    })
}

pub fn write_report(out: &Path, stem: &str, report: &EvalReport) -> Result<()> {
    create_dir(out)?;
    write(&out.join(format!("{stem}.txt")), &report.to_text())?;
    write(&out.join(format!("{stem}.csv")), &report.to_csv())
}

/// SHA-256 over every user's negative pool, as hex.
pub fn pool_checksum(split: &DatasetSplit) -> String {
    let mut h = Sha256::new();
    for u in &split.users {
        h.update((u.user as u64).to_le_bytes());
        for &n in &u.negatives {
            h.update((n as u64).to_le_bytes());
        }
        h.update(u64::MAX.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse a comma-separated variant list. `full` is accepted and ignored
/// since the full model is always included.
pub fn parse_variants(list: &str) -> Result<Vec<Variant>> {
    let mut out = Vec::new();
    for s in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let v = Variant::parse(s)?;
        if v != Variant::Full && !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Training seeds `base, base+1, ...` shared by every model of a comparison.
pub fn run_seeds(config: &RunConfig, seeds: usize) -> Vec<u64> {
    (0..seeds as u64).map(|i| config.kv.train.seed.wrapping_add(i)).collect()
}

/// Train one model per seed with `config` and evaluate each on the stored
/// pools.
pub fn multi_seed(
    ds: &Dataset,
    config: &RunConfig,
    seeds: &[u64],
    mut progress: impl FnMut(u64, &EpochRecord),
) -> Result<EvalReport> {
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut kv = config.kv.clone();
        kv.train.seed = seed;
        let (model, _, _) = train_model(ds, &kv, |r| progress(seed, r))?;
        runs.push(seed_metrics(&model, &ds.split, &config.ks, seed)?);
    }
    Ok(EvalReport {
        ks: config.ks.clone(),
        runs,
        notes: Vec::new(),
    })
}

#[derive(Debug, Clone)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: EvalReport,
    pub pool_checksum: String,
    /// Welch test against the full model per (metric, K); `None` for the
    /// full model itself or with fewer than two seeds.
    pub tests: Vec<(Metric, usize, Option<TTest>)>,
}

#[derive(Debug, Clone)]
pub struct Ablation {
    pub ks: Vec<usize>,
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

pub fn ablate(
    ds: &Dataset,
    config: &RunConfig,
    variants: &[Variant],
    seeds: usize,
    mut progress: impl FnMut(Variant, u64, &EpochRecord),
) -> Result<Ablation> {
    config.validate()?;
    if seeds == 0 {
        return Err(CliError::input("--seeds must be at least 1"));
    }
    let seed_list = run_seeds(config, seeds);
    let mut all = vec![Variant::Full];
    all.extend(variants.iter().copied().filter(|&v| v != Variant::Full));
    let mut rows: Vec<AblationRow> = Vec::new();
    for v in all {
        let mut c = config.clone();
        c.kv.model.variant = v;
        let report = multi_seed(ds, &c, &seed_list, |s, r| progress(v, s, r))?;
        let mut tests = Vec::new();
        for m in Metric::ALL {
            for &k in &config.ks {
                let t = match rows.first() {
                    Some(full) if seeds >= 2 => Some(seed_compare(&report.values(m, k), &full.report.values(m, k))?),
                    _ => None,
                };
                tests.push((m, k, t));
            }
        }
        rows.push(AblationRow {
            variant: v,
            report,
            pool_checksum: pool_checksum(&ds.split),
            tests,
        });
    }
    Ok(Ablation {
        ks: config.ks.clone(),
        seeds: seed_list,
        rows,
    })
}

fn p_text(t: Option<TTest>) -> String {
    match t {
        Some(t) => format!("{:.4}{}", t.p, if t.significant { "*" } else { "" }),
        None => "NA".into(),
    }
}

impl Ablation {
    /// One row per model: mean metrics, then Welch p-values against the
    /// full model (`*` marks p < 0.05), then the negative-pool checksum.
    pub fn table(&self) -> Table {
        let mut headers = vec!["model".to_string()];
        for m in Metric::ALL {
            for k in &self.ks {
                headers.push(format!("{}@{k}", m.name()));
            }
        }
        for m in Metric::ALL {
            for k in &self.ks {
                headers.push(format!("p_{}@{k}", m.name()));
            }
        }
        headers.push("pool_checksum".into());
        let mut t = Table {
            headers,
            rows: Vec::new(),
        };
        for r in &self.rows {
            let mut row = vec![r.variant.label().to_string()];
            for m in Metric::ALL {
                for &k in &self.ks {
                    row.push(f4(r.report.mean(m, k)));
                }
            }
            for (_, _, test) in &r.tests {
                row.push(p_text(*test));
            }
            row.push(r.pool_checksum[..16].to_string());
            t.push(row);
        }
        t
    }

    /// Long form: model, metric, K, mean, std, t, df, p, significant.
    pub fn tests_table(&self) -> Table {
        let mut t = Table::new(&["model", "metric", "K", "mean", "std", "t", "df", "p", "significant"]);
        for r in &self.rows {
            for (m, k, test) in &r.tests {
                let (tt, df, p, sig) = match test {
                    Some(x) => (x.t.to_string(), x.df.to_string(), x.p.to_string(), x.significant.to_string()),
                    None => ("NA".into(), "NA".into(), "NA".into(), "NA".into()),
                };
                t.push(vec![
                    r.variant.label().into(),
                    m.name().into(),
                    k.to_string(),
                    r.report.mean(*m, *k).to_string(),
                    r.report.std(*m, *k).to_string(),
                    tt,
                    df,
                    p,
                    sig,
                ]);
            }
        }
        t
    }

    pub fn runs_table(&self) -> Table {
        let mut t = Table::new(&["model", "metric", "K", "seed", "value"]);
        for r in &self.rows {
            for m in Metric::ALL {
                for &k in &self.ks {
                    for (run, v) in r.report.runs.iter().zip(r.report.values(m, k)) {
                        t.push(vec![
                            r.variant.label().into(),
                            m.name().into(),
                            k.to_string(),
                            run.seed.to_string(),
                            v.to_string(),
                        ]);
                    }
                }
            }
        }
        t
    }

    pub fn write(&self, out: &Path) -> Result<()> {
        create_dir(out)?;
        write(&out.join("ablation.txt"), &self.table().render())?;
        write(&out.join("ablation.csv"), &self.table().to_csv())?;
        write(&out.join("ablation_tests.csv"), &self.tests_table().to_csv())?;
        write(&out.join("ablation_runs.csv"), &self.runs_table().to_csv())
    }
}

/// Hyper-parameters the sweep command varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Aspects,
    Dim,
    Gamma,
    MaxLen,
}

impl SweepParam {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "J" => Ok(SweepParam::Aspects),
            "d" => Ok(SweepParam::Dim),
            "gamma" => Ok(SweepParam::Gamma),
            "max_len" => Ok(SweepParam::MaxLen),
            _ => Err(CliError::input(format!(
                "unknown sweep parameter {s:?}; valid: J, d, gamma, max_len"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Aspects => "J",
            SweepParam::Dim => "d",
            SweepParam::Gamma => "gamma",
            SweepParam::MaxLen => "max_len",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            SweepParam::Aspects => "model.J",
            SweepParam::Dim => "model.d",
            SweepParam::Gamma => "model.gamma",
            SweepParam::MaxLen => "model.max_len",
        }
    }

    /// Check a value is numeric of the right kind, returning it normalized.
    pub fn check(self, value: &str) -> Result<String> {
        let v = value.trim();
        let ok = match self {
            SweepParam::Gamma => v.parse::<f64>().is_ok_and(|x| x.is_finite()),
            _ => v.parse::<usize>().is_ok(),
        };
        if !ok {
            let kind = if self == SweepParam::Gamma { "a number" } else { "a non-negative integer" };
            return Err(CliError::input(format!(
                "invalid argument: {} value {value:?} is not {kind}",
                self.name()
            )));
        }
        Ok(v.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct Sweep {
    pub param: SweepParam,
    pub rows: Vec<(String, EvalReport)>,
}

pub fn sweep(
    ds: &Dataset,
    config: &RunConfig,
    param: SweepParam,
    values: &[String],
    seeds: usize,
    mut progress: impl FnMut(&str, u64, &EpochRecord),
) -> Result<Sweep> {
    config.validate()?;
    if seeds == 0 {
        return Err(CliError::input("--seeds must be at least 1"));
    }
    let values: Vec<String> = values.iter().map(|v| param.check(v)).collect::<Result<_>>()?;
    let seed_list = run_seeds(config, seeds);
    let mut rows = Vec::new();
    for v in values {
        let mut c = config.clone();
        c.set(param.key(), &v)?;
        sized_config(&c.kv, &ds.split).model.validate()?;
        let report = multi_seed(ds, &c, &seed_list, |s, r| progress(&v, s, r))?;
        rows.push((v, report));
    }
    Ok(Sweep { param, rows })
}

impl Sweep {
    pub fn table(&self, ks: &[usize]) -> Table {
        let mut headers = vec![self.param.name().to_string()];
        for m in Metric::ALL {
            for k in ks {
                headers.push(format!("{}@{k}", m.name()));
                headers.push(format!("{}@{k}_std", m.name()));
            }
        }
        let mut t = Table {
            headers,
            rows: Vec::new(),
        };
        for (v, r) in &self.rows {
            let mut row = vec![v.clone()];
            for m in Metric::ALL {
                for &k in ks {
                    row.push(f4(r.mean(m, k)));
                    row.push(f4(r.std(m, k)));
                }
            }
            t.push(row);
        }
        t
    }

    pub fn runs_table(&self) -> Table {
        let mut t = Table::new(&[self.param.name(), "metric", "K", "seed", "value"]);
        for (v, r) in &self.rows {
            for m in Metric::ALL {
                for &k in &r.ks {
                    for (run, x) in r.runs.iter().zip(r.values(m, k)) {
                        t.push(vec![v.clone(), m.name().into(), k.to_string(), run.seed.to_string(), x.to_string()]);
                    }
                }
            }
        }
        t
    }

    pub fn write(&self, out: &Path, ks: &[usize]) -> Result<()> {
        create_dir(out)?;
        let t = self.table(ks);
        write(&out.join("sweep.txt"), &t.render())?;
        write(&out.join("sweep.csv"), &t.to_csv())?;
        write(&out.join("sweep_runs.csv"), &self.runs_table().to_csv())
    }
}
