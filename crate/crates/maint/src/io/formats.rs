//! Raw event log readers: a configurable delimited-text parser with the
//! Taobao and generic presets, and the multi-file Retailrocket layout.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDateTime;
use maint_core::data::{resolve_lowest_category, sort_records, BehaviorRecord};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TimeFormat {
    Seconds,
    Milliseconds,
    /// A chrono pattern, read as UTC. A pattern that stops at the hour is
    /// accepted.
    Pattern(String),
}

impl TimeFormat {
    pub fn parse(&self, s: &str) -> Option<i64> {
        match self {
            TimeFormat::Seconds => s.parse().ok(),
            TimeFormat::Milliseconds => s.parse::<i64>().ok().map(|ms| ms.div_euclid(1000)),
            TimeFormat::Pattern(p) => {
                let dt = NaiveDateTime::parse_from_str(s, p)
                    .or_else(|_| NaiveDateTime::parse_from_str(&format!("{s}:00"), &format!("{p}:%M")))
                    .ok()?;
                Some(dt.and_utc().timestamp())
            }
        }
    }
}

/// Column roles of a delimited event file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormatSpec {
    pub delimiter: u8,
    pub has_header: bool,
    pub user: usize,
    pub item: usize,
    pub category: usize,
    pub behavior: usize,
    pub timestamp: usize,
    pub time: TimeFormat,
    /// Raw behavior code to behavior name. Empty means names are used as is;
    /// otherwise codes missing from the map make the line malformed.
    pub behavior_names: Vec<(String, String)>,
}

impl FormatSpec {
    /// `user_id,item_id,behavior_type,user_geohash,item_category,time` with
    /// behavior codes 1..4 and hour-resolution times.
    pub fn taobao() -> Self {
        FormatSpec {
            delimiter: b',',
            has_header: true,
            user: 0,
            item: 1,
            behavior: 2,
            category: 4,
            timestamp: 5,
            time: TimeFormat::Pattern("%Y-%m-%d %H".into()),
            behavior_names: [("1", "click"), ("2", "collect"), ("3", "cart"), ("4", "buy")]
                .iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
        }
    }

    /// `user,item,category,behavior,timestamp` with epoch seconds.
    pub fn generic() -> Self {
        FormatSpec {
            delimiter: b',',
            has_header: false,
            user: 0,
            item: 1,
            category: 2,
            behavior: 3,
            timestamp: 4,
            time: TimeFormat::Seconds,
            behavior_names: Vec::new(),
        }
    }

    fn behavior(&self, raw: &str) -> Option<String> {
        if self.behavior_names.is_empty() {
            return Some(raw.to_string());
        }
        self.behavior_names
            .iter()
            .find(|(code, _)| code == raw)
            .map(|(_, name)| name.clone())
    }
}

/// Parsed records with line accounting.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedLog {
    /// Sorted by user then timestamp; ties keep file order.
    pub records: Vec<BehaviorRecord>,
    pub lines: usize,
    pub malformed: usize,
}

impl ParsedLog {
    fn check(self, path: &Path) -> Result<Self> {
        if self.lines > 0 && 2 * self.malformed > self.lines {
            return Err(CliError::input(format!(
                "{}: format error, {} of {} lines malformed",
                path.display(),
                self.malformed,
                self.lines
            )));
        }
        Ok(self)
    }
}

fn reader(path: &Path, delimiter: u8, has_header: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn field<'a>(rec: &'a csv::StringRecord, k: usize) -> Option<&'a str> {
    rec.get(k).filter(|s| !s.is_empty())
}

pub fn parse_events(path: &Path, spec: &FormatSpec) -> Result<ParsedLog> {
    let mut log = ParsedLog::default();
    for row in reader(path, spec.delimiter, spec.has_header)?.records() {
        log.lines += 1;
        let parsed = row.ok().and_then(|r| {
            let ts = spec.time.parse(field(&r, spec.timestamp)?)?;
            let rec = BehaviorRecord::new(
                field(&r, spec.user)?,
                field(&r, spec.item)?,
                field(&r, spec.category)?,
                spec.behavior(field(&r, spec.behavior)?)?,
                ts,
            );
            rec.is_valid().then_some(rec)
        });
        match parsed {
            Some(rec) => log.records.push(rec),
            None => log.malformed += 1,
        }
    }
    sort_records(&mut log.records);
    log.check(path)
}

/// Category assigned to Retailrocket items with no `categoryid` property.
pub const UNKNOWN_CATEGORY: &str = "unknown";

/// Files of the Retailrocket dump inside `dir`.
#[derive(Debug, Clone)]
pub struct RetailrocketFiles {
    pub events: PathBuf,
    pub properties: Vec<PathBuf>,
    pub tree: PathBuf,
}

impl RetailrocketFiles {
    pub fn in_dir(dir: &Path) -> Result<Self> {
        if !dir.is_dir() {
            return Err(CliError::input(format!(
                "{}: retailrocket input must be a directory with events.csv, item_properties*.csv and category_tree.csv",
                dir.display()
            )));
        }
        let mut properties: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(|e| CliError::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("item_properties") && n.ends_with(".csv"))
            })
            .collect();
        properties.sort();
        Ok(RetailrocketFiles {
            events: dir.join("events.csv"),
            properties,
            tree: dir.join("category_tree.csv"),
        })
    }
}

/// Events joined with each item's lowest category. Event names map
/// `view` to view, `addtocart` to cart and `transaction` to buy.
pub fn parse_retailrocket(files: &RetailrocketFiles) -> Result<ParsedLog> {
    let mut parent = BTreeMap::new();
    for row in reader(&files.tree, b',', true)?.records() {
        let Ok(r) = row else { continue };
        if let (Some(c), Some(p)) = (field(&r, 0), field(&r, 1)) {
            parent.insert(c.to_string(), p.to_string());
        }
    }

    let mut item_categories: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for path in &files.properties {
        for row in reader(path, b',', true)?.records() {
            let Ok(r) = row else { continue };
            if field(&r, 2) != Some("categoryid") {
                continue;
            }
            if let (Some(item), Some(cat)) = (field(&r, 1), field(&r, 3)) {
                let cats = item_categories.entry(item.to_string()).or_default();
                if !cats.iter().any(|c| c == cat) {
                    cats.push(cat.to_string());
                }
            }
        }
    }
    let lowest = resolve_lowest_category(&parent, &item_categories)?;

    let time = TimeFormat::Milliseconds;
    let mut log = ParsedLog::default();
    for row in reader(&files.events, b',', true)?.records() {
        log.lines += 1;
        let parsed = row.ok().and_then(|r| {
            let behavior = match field(&r, 2)? {
                "view" => "view",
                "addtocart" => "cart",
                "transaction" => "buy",
                _ => return None,
            };
            let item = field(&r, 3)?;
            let category = lowest.get(item).map_or(UNKNOWN_CATEGORY, |c| c.as_str());
            let rec = BehaviorRecord::new(field(&r, 1)?, item, category, behavior, time.parse(field(&r, 0)?)?);
            rec.is_valid().then_some(rec)
        });
        match parsed {
            Some(rec) => log.records.push(rec),
            None => log.malformed += 1,
        }
    }
    sort_records(&mut log.records);
    log.check(&files.events)
}

/// Built-in input layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Taobao,
    Retailrocket,
    Generic,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "taobao" => Ok(Format::Taobao),
            "retailrocket" => Ok(Format::Retailrocket),
            "generic" => Ok(Format::Generic),
            _ => Err(CliError::input(format!(
                "unknown format {s:?}; expected one of taobao, retailrocket, generic"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Format::Taobao => "taobao",
            Format::Retailrocket => "retailrocket",
            Format::Generic => "generic",
        }
    }

    /// Behavior names in index order, target last. `None` for formats whose
    /// names come from the data.
    pub fn behaviors(self) -> Option<&'static [&'static str]> {
        match self {
            Format::Taobao => Some(&["click", "collect", "cart", "buy"]),
            Format::Retailrocket => Some(&["view", "cart", "buy"]),
            Format::Generic => None,
        }
    }

    /// Minimum events per user and per item.
    pub fn thresholds(self) -> (usize, usize) {
        match self {
            Format::Taobao => (10, 20),
            Format::Retailrocket => (5, 10),
            Format::Generic => (0, 0),
        }
    }

    pub fn load(self, input: &Path, generic: &FormatSpec) -> Result<ParsedLog> {
        if !input.exists() {
            return Err(CliError::input(format!("{}: no such file or directory", input.display())));
        }
        match self {
            Format::Taobao => parse_events(input, &FormatSpec::taobao()),
            Format::Generic => parse_events(input, generic),
            Format::Retailrocket => parse_retailrocket(&RetailrocketFiles::in_dir(input)?),
        }
    }
}

/// Behavior names ordered for indexing: `known` first (when given), then any
/// other observed names sorted, with `target` moved to the end.
pub fn behavior_order(records: &[BehaviorRecord], known: Option<&[&str]>, target: &str) -> Vec<String> {
    let mut names: Vec<String> = known.unwrap_or(&[]).iter().map(|s| s.to_string()).collect();
    let mut seen: Vec<&str> = records.iter().map(|r| r.behavior.as_str()).collect();
    seen.sort_unstable();
    seen.dedup();
    for s in seen {
        if !names.iter().any(|n| n == s) {
            names.push(s.to_string());
        }
    }
    if let Some(k) = names.iter().position(|n| n == target) {
        let t = names.remove(k);
        names.push(t);
    }
    names
}
