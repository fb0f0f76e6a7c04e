//! Processed dataset directory.
//!
//! ```text
//! users.txt items.txt categories.txt behaviors.txt   one string per line, line k holds index k+1
//! sequences.tsv    user<TAB>item:category:behavior:bucket<TAB>...
//! timestamps.tsv   user<TAB>t1<TAB>t2...
//! split.txt        key: value header, then one block per user
//! meta.txt         preprocessing settings
//! stats.txt        behavior counts and conversion rates
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use maint_core::data::{
    split_leave_one_out, Bucketizer, DatasetSplit, Event, Holdout, SplitConfig, UserSequence, Vocab,
    Vocabularies,
};

use crate::error::{CliError, Result};

pub const VOCAB_FILES: [&str; 4] = ["users.txt", "items.txt", "categories.txt", "behaviors.txt"];

/// How a dataset directory was produced.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub source: String,
    pub target: String,
    pub min_user_events: usize,
    pub min_item_events: usize,
    pub filter_iterate: bool,
}

impl DatasetMeta {
    fn to_text(&self) -> String {
        format!(
            "source: {}\ntarget: {}\nmin_user_events: {}\nmin_item_events: {}\nfilter_iterate: {}\n",
            self.source, self.target, self.min_user_events, self.min_item_events, self.filter_iterate
        )
    }

    fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text, "meta.txt")?;
        Ok(DatasetMeta {
            source: kv.get("source")?.to_string(),
            target: kv.get("target")?.to_string(),
            min_user_events: kv.number("min_user_events")?,
            min_item_events: kv.number("min_item_events")?,
            filter_iterate: kv.get("filter_iterate")? == "true",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub vocabs: Vocabularies,
    /// Full, untruncated sequences in user order.
    pub sequences: Vec<UserSequence>,
    pub split: DatasetSplit,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn user_index(&self, name: &str) -> Result<usize> {
        self.vocabs
            .users
            .encode(name)
            .ok_or_else(|| CliError::input(format!("unknown user {name:?}")))
    }

    pub fn sequence_of(&self, user: usize) -> Option<&UserSequence> {
        self.sequences
            .binary_search_by_key(&user, |s| s.user)
            .ok()
            .map(|k| &self.sequences[k])
    }

    pub fn target_name(&self) -> &str {
        self.vocabs.behaviors.decode(self.split.target_behavior).unwrap_or("")
    }
}

/// Flat `key: value` lines; blank lines and `#` comments are skipped.
struct KeyValues<'a> {
    file: &'a str,
    pairs: Vec<(&'a str, &'a str)>,
}

impl<'a> KeyValues<'a> {
    fn parse(text: &'a str, file: &'a str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once(':')
                .ok_or_else(|| CliError::input(format!("{file}:{}: expected key: value", n + 1)))?;
            pairs.push((k.trim(), v.trim()));
        }
        Ok(KeyValues { file, pairs })
    }

    fn get(&self, key: &str) -> Result<&'a str> {
        self.pairs
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| CliError::input(format!("{}: missing key {key}", self.file)))
    }

    fn number<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| CliError::input(format!("{}: {key} is not a number: {v:?}", self.file)))
    }
}

fn check_name(s: &str, what: &str) -> Result<()> {
    if s.contains(['\n', '\r', '\t']) {
        return Err(CliError::input(format!("{what} {s:?} contains a tab or line break")));
    }
    Ok(())
}

fn vocab_text(v: &Vocab, what: &str) -> Result<String> {
    let mut out = String::new();
    for s in v.strings() {
        check_name(s, what)?;
        out.push_str(s);
        out.push('\n');
    }
    Ok(out)
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn split_text(split: &DatasetSplit) -> String {
    let mut out = String::from("# leave-one-out split\n");
    let _ = writeln!(out, "n_items: {}", split.n_items);
    let _ = writeln!(out, "n_categories: {}", split.n_categories);
    let _ = writeln!(out, "n_behaviors: {}", split.n_behaviors);
    let _ = writeln!(out, "target_behavior: {}", split.target_behavior);
    let _ = writeln!(out, "n_negatives: {}", split.n_negatives);
    let _ = writeln!(out, "seed: {}", split.seed);
    let _ = writeln!(out, "boundaries: {}", join(split.bucketizer.boundaries(), ","));
    for u in &split.users {
        let _ = writeln!(out, "\nuser: {}", u.user);
        let _ = writeln!(out, "test: {}:{}", u.test.item, u.test.category);
        match u.validation {
            Some(v) => {
                let _ = writeln!(out, "validation: {}:{}", v.item, v.category);
            }
            None => out.push_str("validation: none\n"),
        }
        let _ = writeln!(out, "negatives: {}", join(&u.negatives, ","));
    }
    out
}

/// Render all files of a dataset directory, keyed by file name.
pub fn render_dataset(ds: &Dataset, stats: &str) -> Result<Vec<(&'static str, String)>> {
    let v = &ds.vocabs;
    let mut files = vec![
        (VOCAB_FILES[0], vocab_text(&v.users, "user")?),
        (VOCAB_FILES[1], vocab_text(&v.items, "item")?),
        (VOCAB_FILES[2], vocab_text(&v.categories, "category")?),
        (VOCAB_FILES[3], vocab_text(&v.behaviors, "behavior")?),
    ];
    let mut seqs = String::new();
    let mut times = String::new();
    for s in &ds.sequences {
        let _ = write!(seqs, "{}", s.user);
        let _ = write!(times, "{}", s.user);
        for e in &s.events {
            let _ = write!(seqs, "\t{}:{}:{}:{}", e.item, e.category, e.behavior, e.bucket);
            let _ = write!(times, "\t{}", e.timestamp);
        }
        seqs.push('\n');
        times.push('\n');
    }
    files.push(("sequences.tsv", seqs));
    files.push(("timestamps.tsv", times));
    files.push(("split.txt", split_text(&ds.split)));
    files.push(("meta.txt", ds.meta.to_text()));
    files.push(("stats.txt", stats.to_string()));
    Ok(files)
}

/// Write the directory through a sibling temporary directory renamed into
/// place, so a failure leaves no partial output. `out` must not exist.
pub fn write_dataset(out: &Path, ds: &Dataset, stats: &str) -> Result<()> {
    let files = render_dataset(ds, stats)?;
    write_dir_atomic(out, files.iter().map(|(n, c)| (*n, c.as_bytes())))
}

pub fn write_dir_atomic<'a>(out: &Path, files: impl Iterator<Item = (&'a str, &'a [u8])>) -> Result<()> {
    if out.exists() {
        return Err(CliError::input(format!("{}: output already exists", out.display())));
    }
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| CliError::io(&parent, e))?;
    let name = out
        .file_name()
        .ok_or_else(|| CliError::input(format!("{}: not a directory name", out.display())))?;
    let tmp = parent.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        fs::create_dir(&tmp).map_err(|e| CliError::io(&tmp, e))?;
        for (file, bytes) in files {
            let p = tmp.join(file);
            fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        }
        fs::rename(&tmp, out).map_err(|e| CliError::io(out, e))
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&tmp);
    }
    result
}

fn read(dir: &Path, file: &str) -> Result<String> {
    let p = dir.join(file);
    fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))
}

fn read_vocab(dir: &Path, file: &str) -> Result<Vocab> {
    let text = read(dir, file)?;
    let v = Vocab::from_strings(text.lines().map(String::from));
    if v.len() != text.lines().count() {
        return Err(CliError::input(format!("{file}: duplicate entries")));
    }
    Ok(v)
}

fn bad(file: &str, line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::input(format!("{file}:{line}: {msg}"))
}

fn parse_pair(s: &str) -> Option<(usize, usize)> {
    let (a, b) = s.split_once(':')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

struct SplitManifest {
    header: DatasetSplit,
    users: Vec<(usize, (usize, usize), Option<(usize, usize)>, Vec<usize>)>,
}

fn parse_split(text: &str) -> Result<SplitManifest> {
    let file = "split.txt";
    let (head, body) = match text.find("\nuser:") {
        Some(k) => (&text[..k], &text[k + 1..]),
        None => (text, ""),
    };
    let kv = KeyValues::parse(head, file)?;
    let boundaries: Vec<i64> = kv
        .get("boundaries")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CliError::input("split.txt: bad boundaries"))?;
    let header = DatasetSplit {
        users: Vec::new(),
        n_items: kv.number("n_items")?,
        n_categories: kv.number("n_categories")?,
        n_behaviors: kv.number("n_behaviors")?,
        target_behavior: kv.number("target_behavior")?,
        n_negatives: kv.number("n_negatives")?,
        seed: kv.number("seed")?,
        bucketizer: Bucketizer::new(boundaries)?,
    };
    let mut users = Vec::new();
    for block in body.split("\n\n").filter(|b| !b.trim().is_empty()) {
        let kv = KeyValues::parse(block, file)?;
        let user: usize = kv.number("user")?;
        let test = parse_pair(kv.get("test")?)
            .ok_or_else(|| CliError::input(format!("split.txt: user {user}: bad test entry")))?;
        let validation = match kv.get("validation")? {
            "none" => None,
            s => Some(
                parse_pair(s)
                    .ok_or_else(|| CliError::input(format!("split.txt: user {user}: bad validation entry")))?,
            ),
        };
        let negatives = kv
            .get("negatives")?
            .split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse())
            .collect::<std::result::Result<Vec<usize>, _>>()
            .map_err(|_| CliError::input(format!("split.txt: user {user}: bad negatives")))?;
        users.push((user, test, validation, negatives));
    }
    Ok(SplitManifest { header, users })
}

fn parse_sequences(seqs: &str, times: &str, n_users: usize) -> Result<Vec<(usize, Vec<Event>)>> {
    let seq_lines: Vec<&str> = seqs.lines().filter(|l| !l.is_empty()).collect();
    let time_lines: Vec<&str> = times.lines().filter(|l| !l.is_empty()).collect();
    if seq_lines.len() != time_lines.len() {
        return Err(CliError::input("sequences.tsv and timestamps.tsv differ in line count"));
    }
    let mut out = Vec::with_capacity(seq_lines.len());
    for (n, (sl, tl)) in seq_lines.iter().zip(&time_lines).enumerate() {
        let line = n + 1;
        let mut sf = sl.split('\t');
        let mut tf = tl.split('\t');
        let user: usize = sf
            .next()
            .and_then(|s| s.parse().ok())
            .filter(|&u| u >= 1 && u <= n_users)
            .ok_or_else(|| bad("sequences.tsv", line, "bad user index"))?;
        if tf.next().and_then(|s| s.parse::<usize>().ok()) != Some(user) {
            return Err(bad("timestamps.tsv", line, "user does not match sequences.tsv"));
        }
        let mut events = Vec::new();
        for (ev, ts) in sf.zip(&mut tf) {
            let parts: Vec<usize> = ev
                .split(':')
                .map(|x| x.parse())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("sequences.tsv", line, format!("bad event {ev:?}")))?;
            let [item, category, behavior, bucket] = parts[..] else {
                return Err(bad("sequences.tsv", line, format!("bad event {ev:?}")));
            };
            let timestamp = ts
                .parse()
                .map_err(|_| bad("timestamps.tsv", line, format!("bad timestamp {ts:?}")))?;
            events.push(Event {
                item,
                category,
                behavior,
                bucket,
                timestamp,
            });
        }
        if tf.next().is_some() || events.len() != sl.split('\t').count() - 1 {
            return Err(bad("timestamps.tsv", line, "event count differs from sequences.tsv"));
        }
        out.push((user, events));
    }
    Ok(out)
}

/// Load a dataset directory, rebuilding the split from the sequences and
/// checking it against the stored manifest.
pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    if !dir.is_dir() {
        return Err(CliError::input(format!("{}: not a dataset directory", dir.display())));
    }
    let vocabs = Vocabularies {
        users: read_vocab(dir, VOCAB_FILES[0])?,
        items: read_vocab(dir, VOCAB_FILES[1])?,
        categories: read_vocab(dir, VOCAB_FILES[2])?,
        behaviors: read_vocab(dir, VOCAB_FILES[3])?,
    };
    let meta = DatasetMeta::from_text(&read(dir, "meta.txt")?)?;
    let manifest = parse_split(&read(dir, "split.txt")?)?;
    let h = &manifest.header;
    if (h.n_items, h.n_categories, h.n_behaviors)
        != (vocabs.items.len(), vocabs.categories.len(), vocabs.behaviors.len())
    {
        return Err(CliError::input("split.txt: vocabulary sizes disagree with the vocab files"));
    }
    if vocabs.behaviors.decode(h.target_behavior) != Some(meta.target.as_str()) {
        return Err(CliError::input("split.txt: target behavior disagrees with meta.txt"));
    }

    let raw = parse_sequences(
        &read(dir, "sequences.tsv")?,
        &read(dir, "timestamps.tsv")?,
        vocabs.users.len(),
    )?;
    let mut sequences = Vec::with_capacity(raw.len());
    let mut prev = 0;
    for (user, events) in raw {
        if user <= prev {
            return Err(CliError::input("sequences.tsv: users must be strictly increasing"));
        }
        prev = user;
        for e in &events {
            let ok = (1..=h.n_items).contains(&e.item)
                && (1..=h.n_categories).contains(&e.category)
                && (1..=h.n_behaviors).contains(&e.behavior);
            if !ok {
                return Err(CliError::input(format!("sequences.tsv: user {user}: index out of range")));
            }
        }
        let mut check = events.clone();
        h.bucketizer.assign(&mut check);
        if check != events {
            return Err(CliError::input(format!(
                "sequences.tsv: user {user}: buckets disagree with timestamps"
            )));
        }
        sequences.push(UserSequence::new(user, events, h.target_behavior));
    }

    let split = split_leave_one_out(
        &sequences,
        h.n_items,
        h.n_categories,
        h.n_behaviors,
        h.target_behavior,
        &h.bucketizer,
        &SplitConfig {
            n_negatives: h.n_negatives,
            seed: h.seed,
        },
    );
    let mismatch = |u: usize, what: &str| {
        CliError::input(format!("split.txt: user {u}: {what} disagrees with the sequences"))
    };
    if split.users.len() != manifest.users.len() {
        return Err(CliError::input("split.txt: user count disagrees with the sequences"));
    }
    for (u, (user, test, validation, negatives)) in split.users.iter().zip(&manifest.users) {
        let pair = |h: &Holdout| (h.item, h.category);
        if u.user != *user {
            return Err(mismatch(*user, "user order"));
        }
        if pair(&u.test) != *test {
            return Err(mismatch(*user, "test target"));
        }
        if u.validation.as_ref().map(pair) != *validation {
            return Err(mismatch(*user, "validation target"));
        }
        if u.negatives != *negatives {
            return Err(mismatch(*user, "negative pool"));
        }
    }
    Ok(Dataset {
        vocabs,
        sequences,
        split,
        meta,
    })
}
