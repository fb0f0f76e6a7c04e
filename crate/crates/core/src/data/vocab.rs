use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::BehaviorRecord;

/// String ↔ dense index map. Index 0 is reserved for padding, so the first
/// inserted string gets index 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    strings: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_strings(strings: impl IntoIterator<Item = String>) -> Self {
        let mut v = Vocab::new();
        for s in strings {
            v.insert(&s);
        }
        v
    }

    pub fn insert(&mut self, s: &str) -> usize {
        if let Some(&i) = self.index.get(s) {
            return i;
        }
        self.strings.push(String::from(s));
        let i = self.strings.len();
        self.index.insert(String::from(s), i);
        i
    }

    pub fn encode(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn decode(&self, i: usize) -> Option<&str> {
        if i == 0 {
            return None;
        }
        self.strings.get(i - 1).map(String::as_str)
    }

    /// Number of real (non-padding) entries.
    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }

    /// Strings in index order, starting at index 1.
    pub fn strings(&self) -> &[String] {
        &self.strings
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabularies {
    pub users: Vocab,
    pub items: Vocab,
    pub categories: Vocab,
    pub behaviors: Vocab,
}

impl Vocabularies {
    /// Indices follow first appearance in `records`; the listed behavior
    /// names are inserted first so their indices are stable across datasets.
    pub fn build(records: &[BehaviorRecord], behaviors: &[&str]) -> Self {
        let mut v = Vocabularies::default();
        for b in behaviors {
            v.behaviors.insert(b);
        }
        for r in records {
            v.users.insert(&r.user);
            v.items.insert(&r.item);
            v.categories.insert(&r.category);
            v.behaviors.insert(&r.behavior);
        }
        v
    }
}
