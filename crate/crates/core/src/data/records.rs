use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One raw interaction. Identifiers are opaque strings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BehaviorRecord {
    pub user: String,
    pub item: String,
    pub category: String,
    pub behavior: String,
    pub timestamp: i64,
}

impl BehaviorRecord {
    pub fn new(
        user: impl Into<String>,
        item: impl Into<String>,
        category: impl Into<String>,
        behavior: impl Into<String>,
        timestamp: i64,
    ) -> Self {
        BehaviorRecord {
            user: user.into(),
            item: item.into(),
            category: category.into(),
            behavior: behavior.into(),
            timestamp,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.timestamp >= 0
            && !self.user.is_empty()
            && !self.item.is_empty()
            && !self.category.is_empty()
            && !self.behavior.is_empty()
    }
}

/// Stable sort by `(user, timestamp)`; equal keys keep input order.
pub fn sort_records(records: &mut [BehaviorRecord]) {
    records.sort_by(|a, b| a.user.cmp(&b.user).then(a.timestamp.cmp(&b.timestamp)));
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterConfig {
    pub min_user_events: usize,
    pub min_item_events: usize,
    /// Users without an event of this type are dropped after the count filter.
    pub require_target: Option<String>,
    /// Repeat the user/item count filter until nothing changes. When false a
    /// single user pass then a single item pass is applied.
    pub iterate: bool,
}

impl FilterConfig {
    pub fn taobao() -> Self {
        FilterConfig {
            min_user_events: 10,
            min_item_events: 20,
            require_target: Some("buy".into()),
            iterate: true,
        }
    }

    pub fn retailrocket() -> Self {
        FilterConfig {
            min_user_events: 5,
            min_item_events: 10,
            require_target: Some("buy".into()),
            iterate: true,
        }
    }
}

fn counts<'a>(keys: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

pub fn filter_dataset(
    mut records: Vec<BehaviorRecord>,
    config: &FilterConfig,
) -> Result<Vec<BehaviorRecord>> {
    loop {
        let before = records.len();
        let users = counts(records.iter().map(|r| r.user.as_str()));
        let drop_users: BTreeSet<String> = users
            .iter()
            .filter(|(_, &c)| c < config.min_user_events)
            .map(|(u, _)| String::from(*u))
            .collect();
        records.retain(|r| !drop_users.contains(&r.user));

        let items = counts(records.iter().map(|r| r.item.as_str()));
        let drop_items: BTreeSet<String> = items
            .iter()
            .filter(|(_, &c)| c < config.min_item_events)
            .map(|(i, _)| String::from(*i))
            .collect();
        records.retain(|r| !drop_items.contains(&r.item));

        if !config.iterate || records.len() == before {
            break;
        }
    }
    if let Some(target) = &config.require_target {
        let buyers: BTreeSet<String> = records
            .iter()
            .filter(|r| &r.behavior == target)
            .map(|r| r.user.clone())
            .collect();
        records.retain(|r| buyers.contains(&r.user));
    }
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(records)
}

fn depth(node: &str, parent: &BTreeMap<String, String>) -> Result<usize> {
    let mut seen = BTreeSet::new();
    let mut cur = node;
    let mut d = 1;
    seen.insert(cur);
    while let Some(p) = parent.get(cur) {
        if !seen.insert(p.as_str()) {
            return Err(Error::Data(format!("category tree has a cycle through {p}")));
        }
        cur = p;
        d += 1;
    }
    Ok(d)
}

/// For each item keep the deepest of its assigned categories in the tree
/// given as a child → parent map. Equal depths resolve to the
/// lexicographically smallest node id.
pub fn resolve_lowest_category(
    parent: &BTreeMap<String, String>,
    item_categories: &BTreeMap<String, Vec<String>>,
) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut cache: BTreeMap<&str, usize> = BTreeMap::new();
    for (item, cats) in item_categories {
        let mut best: Option<(usize, &str)> = None;
        for c in cats {
            let d = match cache.get(c.as_str()) {
                Some(&d) => d,
                None => {
                    let d = depth(c, parent)?;
                    cache.insert(c.as_str(), d);
                    d
                }
            };
            best = match best {
                Some((bd, bc)) if bd > d || (bd == d && bc <= c.as_str()) => Some((bd, bc)),
                _ => Some((d, c.as_str())),
            };
        }
        if let Some((_, c)) = best {
            out.insert(item.clone(), String::from(c));
        }
    }
    Ok(out)
}

/// Fraction of `behavior` events that precede, in the user's time order, a
/// `target` event by the same user on the same item. `None` when there are
/// no `behavior` events at all.
///
/// Records must already be sorted per user (see [`sort_records`]).
pub fn conversion_rate(records: &[BehaviorRecord], behavior: &str, target: &str) -> Option<f64> {
    let mut total = 0usize;
    let mut converted = 0usize;
    let mut start = 0;
    while start < records.len() {
        let user = &records[start].user;
        let mut end = start;
        while end < records.len() && &records[end].user == user {
            end += 1;
        }
        let block = &records[start..end];
        // last target position per item
        let mut last_target: BTreeMap<&str, usize> = BTreeMap::new();
        for (k, r) in block.iter().enumerate() {
            if r.behavior == target {
                last_target.insert(&r.item, k);
            }
        }
        for (k, r) in block.iter().enumerate() {
            if r.behavior == behavior {
                total += 1;
                if last_target.get(r.item.as_str()).is_some_and(|&t| t > k) {
                    converted += 1;
                }
            }
        }
        start = end;
    }
    (total > 0).then(|| converted as f64 / total as f64)
}
