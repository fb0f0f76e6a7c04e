use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use maint_core::data::{
    conversion_rate, filter_dataset, generate_synthetic, prepare, BehaviorRecord, Bucketizer,
    FilterConfig, SplitConfig, SyntheticSpec,
};

use crate::error::{CliError, Result};
use crate::io::{behavior_order, write_dataset, Dataset, DatasetMeta, Format, FormatSpec, ParsedLog};
use crate::report::Table;

/// Event count and conversion rate of one behavior type.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorStat {
    pub behavior: String,
    pub events: usize,
    /// `None` for the target type and for types with no events.
    pub conversion: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatsSummary {
    pub users: usize,
    pub items: usize,
    pub categories: usize,
    pub records: usize,
    pub target: String,
    pub rows: Vec<BehaviorStat>,
}

impl StatsSummary {
    /// `records` must be sorted by user then time.
    pub fn compute(records: &[BehaviorRecord], order: &[String], target: &str) -> Self {
        let distinct = |f: fn(&BehaviorRecord) -> &str| records.iter().map(f).collect::<BTreeSet<_>>().len();
        let rows = order
            .iter()
            .map(|b| BehaviorStat {
                behavior: b.clone(),
                events: records.iter().filter(|r| &r.behavior == b).count(),
                conversion: if b == target { None } else { conversion_rate(records, b, target) },
            })
            .collect();
        StatsSummary {
            users: distinct(|r| &r.user),
            items: distinct(|r| &r.item),
            categories: distinct(|r| &r.category),
            records: records.len(),
            target: target.to_string(),
            rows,
        }
    }

    pub fn rate(&self, behavior: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.behavior == behavior)?.conversion
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["behavior", "events", "conversion_rate"]);
        for r in &self.rows {
            let rate = match r.conversion {
                _ if r.behavior == self.target => "target".to_string(),
                Some(c) => format!("{c:.2}"),
                None => "undefined".to_string(),
            };
            t.push(vec![r.behavior.clone(), r.events.to_string(), rate]);
        }
        t
    }

    pub fn to_text(&self) -> String {
        format!(
            "users: {}\nitems: {}\ncategories: {}\nevents: {}\n\n{}",
            self.users,
            self.items,
            self.categories,
            self.records,
            self.table().render()
        )
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessOptions {
    pub format: Format,
    /// Layout for the generic format.
    pub generic: FormatSpec,
    pub target: String,
    pub min_user_events: Option<usize>,
    pub min_item_events: Option<usize>,
    pub single_pass: bool,
    pub n_negatives: usize,
    pub seed: u64,
}

impl PreprocessOptions {
    pub fn new(format: Format) -> Self {
        PreprocessOptions {
            format,
            generic: FormatSpec::generic(),
            target: "buy".into(),
            min_user_events: None,
            min_item_events: None,
            single_pass: false,
            n_negatives: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreprocessSummary {
    pub lines: usize,
    pub malformed: usize,
    pub raw: StatsSummary,
    pub processed: StatsSummary,
    pub dataset: Dataset,
}

impl PreprocessSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# raw log\nlines: {}\nmalformed: {}", self.lines, self.malformed);
        s.push_str(&self.raw.to_text());
        s.push_str("\n# after filtering\n");
        s.push_str(&self.processed.to_text());
        let split = &self.dataset.split;
        let _ = writeln!(
            s,
            "\n# split\nusers: {}\nwith_validation: {}\nexcluded_for_negatives: {}",
            split.users.len(),
            split.users.iter().filter(|u| u.validation.is_some()).count(),
            split.excluded_users()
        );
        s
    }
}

pub fn load_log(input: &Path, format: Format, generic: &FormatSpec) -> Result<ParsedLog> {
    format.load(input, generic)
}

/// Parse, filter, encode and split a raw log into an in-memory dataset.
pub fn preprocess_log(log: ParsedLog, opts: &PreprocessOptions) -> Result<PreprocessSummary> {
    let order = behavior_order(&log.records, opts.format.behaviors(), &opts.target);
    let raw = StatsSummary::compute(&log.records, &order, &opts.target);
    if log.records.is_empty() {
        return Err(maint_core::Error::EmptyDataset.into());
    }
    let (min_user, min_item) = opts.format.thresholds();
    let filter = FilterConfig {
        min_user_events: opts.min_user_events.unwrap_or(min_user),
        min_item_events: opts.min_item_events.unwrap_or(min_item),
        require_target: Some(opts.target.clone()),
        iterate: !opts.single_pass,
    };
    let records = filter_dataset(log.records, &filter)?;
    let processed = StatsSummary::compute(&records, &order, &opts.target);
    let names: Vec<&str> = order.iter().map(String::as_str).collect();
    let prepared = prepare(
        records,
        &names,
        &opts.target,
        &Bucketizer::default(),
        &SplitConfig {
            n_negatives: opts.n_negatives,
            seed: opts.seed,
        },
    )?;
    let dataset = Dataset {
        vocabs: prepared.vocabs,
        sequences: prepared.sequences,
        split: prepared.split,
        meta: DatasetMeta {
            source: opts.format.name().to_string(),
            target: opts.target.clone(),
            min_user_events: filter.min_user_events,
            min_item_events: filter.min_item_events,
            filter_iterate: filter.iterate,
        },
    };
    Ok(PreprocessSummary {
        lines: log.lines,
        malformed: log.malformed,
        raw,
        processed,
        dataset,
    })
}

pub fn preprocess(input: &Path, out: &Path, opts: &PreprocessOptions) -> Result<PreprocessSummary> {
    if out.exists() {
        return Err(CliError::input(format!("{}: output already exists", out.display())));
    }
    let log = load_log(input, opts.format, &opts.generic)?;
    let summary = preprocess_log(log, opts)?;
    write_dataset(out, &summary.dataset, &summary.to_text())?;
    Ok(summary)
}

/// Statistics of a processed dataset, recomputed from its sequences.
pub fn dataset_stats(ds: &Dataset) -> StatsSummary {
    let v = &ds.vocabs;
    let name = |voc: &maint_core::data::Vocab, i: usize| voc.decode(i).unwrap_or("").to_string();
    let records: Vec<BehaviorRecord> = ds
        .sequences
        .iter()
        .flat_map(|s| {
            s.events.iter().map(move |e| {
                BehaviorRecord::new(
                    name(&v.users, s.user),
                    name(&v.items, e.item),
                    name(&v.categories, e.category),
                    name(&v.behaviors, e.behavior),
                    e.timestamp,
                )
            })
        })
        .collect();
    let order: Vec<String> = v.behaviors.strings().to_vec();
    StatsSummary::compute(&records, &order, &ds.meta.target)
}

/// Generate a planted dataset and split it like a preprocessed log. No
/// count filtering is applied.
pub fn synth(spec: &SyntheticSpec, n_negatives: usize, split_seed: u64) -> Result<Dataset> {
    let data = generate_synthetic(spec)?;
    let names = spec.behavior_names();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let prepared = prepare(
        data.records,
        &refs,
        "buy",
        &Bucketizer::default(),
        &SplitConfig {
            n_negatives,
            seed: split_seed,
        },
    )?;
    Ok(Dataset {
        vocabs: prepared.vocabs,
        sequences: prepared.sequences,
        split: prepared.split,
        meta: DatasetMeta {
            source: "synthetic".into(),
            target: "buy".into(),
            min_user_events: 0,
            min_item_events: 0,
            filter_iterate: true,
        },
    })
}

pub fn write_synth(out: &Path, spec: &SyntheticSpec, n_negatives: usize, split_seed: u64) -> Result<Dataset> {
    if out.exists() {
        return Err(CliError::input(format!("{}: output already exists", out.display())));
    }
    let ds = synth(spec, n_negatives, split_seed)?;
    let stats = dataset_stats(&ds).to_text();
    write_dataset(out, &ds, &stats)?;
    Ok(ds)
}
