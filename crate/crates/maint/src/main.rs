use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process;

use clap::{Args, Parser, Subcommand};
use maint::commands::{self, PreprocessOptions, SweepParam};
use maint::config::parse_ks;
use maint::error::{CliError, ExitCode, Result};
use maint::io::{load_checkpoint, read_dataset, Format, FormatSpec};
use maint::RunConfig;
use maint_core::data::SyntheticSpec;
use maint_core::training::EpochRecord;

#[derive(Parser)]
#[command(name = "maint", version, about = "Multi-behavior sequential recommender: data preparation, training, evaluation and analysis")]
struct Cli {
    /// Default parent directory for run outputs.
    #[arg(long, global = true, env = "MAINT_RUN_DIR", default_value = "runs")]
    run_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GenericLayout {
    /// Field delimiter of the generic format.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// The generic input starts with a header line.
    #[arg(long)]
    header: bool,
    /// Name of the target behavior.
    #[arg(long, default_value = "buy")]
    target: String,
}

impl GenericLayout {
    fn spec(&self) -> Result<FormatSpec> {
        if !self.delimiter.is_ascii() {
            return Err(CliError::input("--delimiter must be a single ASCII character"));
        }
        Ok(FormatSpec {
            delimiter: self.delimiter as u8,
            has_header: self.header,
            ..FormatSpec::generic()
        })
    }
}

#[derive(Args)]
struct ConfigArgs {
    /// key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set model.J=2.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig> {
        RunConfig::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw log, filter, split and write a dataset directory.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = ["taobao", "retailrocket", "generic"])]
        format: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        layout: GenericLayout,
        #[arg(long)]
        min_user_events: Option<usize>,
        #[arg(long)]
        min_item_events: Option<usize>,
        /// Apply the user and item count filters once instead of to a fixed point.
        #[arg(long)]
        single_pass: bool,
        #[arg(long, default_value_t = 100)]
        negatives: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Behavior counts and conversion rates of a dataset or a raw log.
    Stats {
        #[arg(long, conflicts_with = "input", required_unless_present = "input")]
        data: Option<PathBuf>,
        #[arg(long, requires = "format")]
        input: Option<PathBuf>,
        #[arg(long, value_parser = ["taobao", "retailrocket", "generic"])]
        format: Option<String>,
        #[command(flatten)]
        layout: GenericLayout,
    },
    /// Generate a planted synthetic dataset directory.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1000)]
        users: usize,
        #[arg(long, default_value_t = 300)]
        items: usize,
        #[arg(long, default_value_t = 15)]
        categories: usize,
        #[arg(long, default_value_t = 4)]
        behaviors: usize,
        #[arg(long, default_value_t = 0.3)]
        noise: f64,
        #[arg(long, default_value_t = 0.8)]
        preference: f64,
        #[arg(long, default_value_t = 0.3)]
        drift: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        negatives: usize,
    },
    /// Train with early stopping and write the run directory.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Test-set HR@K and NDCG@K of a checkpoint over several negative pools.
    Evaluate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "K", default_value = "2,6,10")]
        ks: String,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and compare the ablation variants against the full model.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "mp,blstm,ratt,mgfus")]
        variants: String,
        /// Training seeds per model; defaults to eval.seeds.
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train and evaluate once per value of one hyper-parameter.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_parser = ["J", "d", "gamma", "max_len"])]
        param: String,
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Top-k new items for one user.
    Recommend {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Dump per-aspect attention weights and fusion gates for one user.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every gradient on a small model.
    Gradcheck {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

fn epoch_line(r: &EpochRecord) -> String {
    format!(
        "epoch {:>3}  loss {:.4}  val HR@10 {:.4}{}",
        r.stats.epoch,
        r.stats.mean_loss,
        r.validation_hr10,
        if r.improved { "  *" } else { "" }
    )
}

/// Write to stdout; a closed pipe ends output quietly.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn run(cli: Cli) -> Result<()> {
    let run_dir = cli.run_dir;
    match cli.command {
        Command::Preprocess {
            input,
            format,
            out,
            layout,
            min_user_events,
            min_item_events,
            single_pass,
            negatives,
            seed,
        } => {
            let opts = PreprocessOptions {
                generic: layout.spec()?,
                target: layout.target.clone(),
                min_user_events,
                min_item_events,
                single_pass,
                n_negatives: negatives,
                seed,
                ..PreprocessOptions::new(Format::parse(&format)?)
            };
            let summary = commands::preprocess(&input, &out, &opts)?;
            emit(&summary.to_text());
        }
        Command::Stats {
            data,
            input,
            format,
            layout,
        } => {
            let summary = match (data, input) {
                (Some(d), _) => commands::dataset_stats(&read_dataset(&d)?),
                (None, Some(i)) => {
                    let f = Format::parse(format.as_deref().unwrap_or_default())?;
                    let log = commands::load_log(&i, f, &layout.spec()?)?;
                    eprintln!("lines: {}  malformed: {}", log.lines, log.malformed);
                    let order = maint::io::behavior_order(&log.records, f.behaviors(), &layout.target);
                    commands::StatsSummary::compute(&log.records, &order, &layout.target)
                }
                (None, None) => return Err(CliError::input("either --data or --input is required")),
            };
            emit(&summary.to_text());
            emit(&format!("\n{}", summary.table().to_csv()));
        }
        Command::Synth {
            out,
            users,
            items,
            categories,
            behaviors,
            noise,
            preference,
            drift,
            seed,
            negatives,
        } => {
            let spec = SyntheticSpec {
                n_users: users,
                n_items: items,
                n_categories: categories,
                n_behavior_types: behaviors,
                preference_strength: preference,
                intent_drift: drift,
                noise,
                seed,
                ..SyntheticSpec::default()
            };
            let ds = commands::write_synth(&out, &spec, negatives, seed)?;
            emit(&commands::dataset_stats(&ds).to_text());
        }
        Command::Train { data, config, out } => {
            let ds = read_dataset(&data)?;
            let cfg = config.load()?;
            let out = out.unwrap_or_else(|| run_dir.join("train"));
            let outcome = commands::train(&ds, &cfg, &out, |r| eprintln!("{}", epoch_line(r)))?;
            emit(&format!("best epoch: {}\n", outcome.fit.best_epoch));
            emit(&format!("best validation HR@10: {}\n", outcome.fit.best_hr10));
            emit(&format!("checkpoint: {}\n", outcome.checkpoint.display()));
        }
        Command::Evaluate {
            data,
            checkpoint,
            ks,
            seeds,
            out,
        } => {
            let ks = parse_ks(&ks)?;
            let ds = read_dataset(&data)?;
            let model = load_checkpoint(&checkpoint)?.model()?;
            let report = commands::evaluate_model(&model, &ds, &ks, seeds)?;
            let out = out.unwrap_or_else(|| run_dir.join("evaluate"));
            commands::write_report(&out, "report", &report)?;
            emit(&report.to_text());
        }
        Command::Ablate {
            data,
            config,
            variants,
            seeds,
            out,
        } => {
            let variants = commands::parse_variants(&variants)?;
            let cfg = config.load()?;
            let ds = read_dataset(&data)?;
            let seeds = seeds.unwrap_or(cfg.seeds);
            let ablation = commands::ablate(&ds, &cfg, &variants, seeds, |v, s, r| {
                eprintln!("{} seed {s}: {}", v.label(), epoch_line(r))
            })?;
            let out = out.unwrap_or_else(|| run_dir.join("ablate"));
            ablation.write(&out)?;
            emit(&ablation.table().render());
        }
        Command::Sweep {
            data,
            param,
            values,
            config,
            seeds,
            out,
        } => {
            let param = SweepParam::parse(&param)?;
            for v in &values {
                param.check(v)?;
            }
            let cfg = config.load()?;
            let ds = read_dataset(&data)?;
            let sweep = commands::sweep(&ds, &cfg, param, &values, seeds, |v, s, r| {
                eprintln!("{}={v} seed {s}: {}", param.name(), epoch_line(r))
            })?;
            let out = out.unwrap_or_else(|| run_dir.join(format!("sweep-{}", param.name())));
            sweep.write(&out, &cfg.ks)?;
            emit(&sweep.table(&cfg.ks).render());
        }
        Command::Recommend {
            checkpoint,
            data,
            user,
            k,
        } => {
            let ds = read_dataset(&data)?;
            let model = load_checkpoint(&checkpoint)?.model()?;
            let recs = commands::recommend(&ds, &model, &user, k)?;
            emit(&commands::recommendations_table(&recs).to_csv());
        }
        Command::Explain {
            checkpoint,
            data,
            user,
            out,
        } => {
            let ds = read_dataset(&data)?;
            let model = load_checkpoint(&checkpoint)?.model()?;
            let ex = commands::explain(&ds, &model, &user)?;
            let out = out.unwrap_or_else(|| run_dir.join("explain"));
            write_file(&out.join("attention.csv"), &ex.attention.to_csv())?;
            write_file(&out.join("gates.csv"), &ex.gates.to_csv())?;
            emit(&format!("{}\n{}", ex.attention.render(), ex.gates.render()));
        }
        Command::Gradcheck { config, corrupt } => {
            let cfg = config.load()?;
            let report = commands::gradcheck(&cfg, corrupt.as_deref())?;
            emit(&report.table().render());
            let offenders: Vec<&str> = report.offenders().iter().map(|g| g.name.as_str()).collect();
            if !offenders.is_empty() {
                return Err(CliError::internal(format!(
                    "gradient check failed (tolerance {:e}) for: {}",
                    report.tolerance,
                    offenders.join(", ")
                )));
            }
            emit("gradient check passed\n");
        }
    }
    Ok(())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { ExitCode::Input } else { ExitCode::Success };
            let _ = e.print();
            process::exit(code as i32);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        process::exit(e.code as i32);
    }
}
