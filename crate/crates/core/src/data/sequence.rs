use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use super::{BehaviorRecord, Vocabularies};
use crate::error::{Error, Result};

/// Interval bucket boundaries in seconds: 1 min, 5 min, 30 min, 1 h, 4 h,
/// 1 day, 1 week, 30 days.
pub const DEFAULT_BOUNDARIES: [i64; 8] = [60, 300, 1800, 3600, 14400, 86400, 604800, 2592000];

/// Maps a time gap to a bucket index. Buckets are half-open `[lo, hi)`
/// starting at 0; the event with no successor gets the extra terminal bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bucketizer {
    boundaries: Vec<i64>,
}

impl Default for Bucketizer {
    fn default() -> Self {
        Bucketizer {
            boundaries: DEFAULT_BOUNDARIES.to_vec(),
        }
    }
}

impl Bucketizer {
    pub fn new(boundaries: Vec<i64>) -> Result<Self> {
        if boundaries.windows(2).any(|w| w[0] >= w[1]) || boundaries.first().is_some_and(|&b| b <= 0) {
            return Err(Error::Argument(format!(
                "bucket boundaries must be positive and strictly increasing: {boundaries:?}"
            )));
        }
        Ok(Bucketizer { boundaries })
    }

    pub fn bucket(&self, delta_t: i64) -> Result<usize> {
        if delta_t < 0 {
            return Err(Error::Argument(format!("negative time interval {delta_t}")));
        }
        Ok(self.boundaries.iter().take_while(|&&b| delta_t >= b).count())
    }

    pub fn boundaries(&self) -> &[i64] {
        &self.boundaries
    }

    pub fn terminal(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// Number of distinct bucket indices including the terminal bucket.
    pub fn len(&self) -> usize {
        self.boundaries.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Bucket of each event's gap to its successor; the last gets terminal.
    pub fn assign(&self, events: &mut [Event]) {
        let n = events.len();
        for k in 0..n {
            events[k].bucket = if k + 1 < n {
                // timestamps are non-decreasing within a sequence
                self.bucket(events[k + 1].timestamp - events[k].timestamp)
                    .unwrap_or(0)
            } else {
                self.terminal()
            };
        }
    }
}

/// Default-boundary bucket for `delta_t` seconds.
pub fn bucketize_interval(delta_t: i64) -> Result<usize> {
    Bucketizer::default().bucket(delta_t)
}

/// An encoded interaction. Index 0 in item/category/behavior is padding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Event {
    pub item: usize,
    pub category: usize,
    pub behavior: usize,
    pub bucket: usize,
    pub timestamp: i64,
}

impl Event {
    pub const PADDING: Event = Event {
        item: 0,
        category: 0,
        behavior: 0,
        bucket: 0,
        timestamp: 0,
    };
}

/// A user's time-ordered events with the positions of target-type events.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSequence {
    pub user: usize,
    pub events: Vec<Event>,
    pub target_positions: Vec<usize>,
}

impl UserSequence {
    pub fn new(user: usize, events: Vec<Event>, target_behavior: usize) -> Self {
        let target_positions = events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.behavior == target_behavior)
            .map(|(k, _)| k)
            .collect();
        UserSequence {
            user,
            events,
            target_positions,
        }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }
}

/// Encode sorted records into one sequence per user, ordered by user index.
pub fn encode_sequences(
    records: &[BehaviorRecord],
    vocabs: &Vocabularies,
    target_behavior: usize,
    bucketizer: &Bucketizer,
) -> Result<Vec<UserSequence>> {
    let mut per_user: BTreeMap<usize, Vec<Event>> = BTreeMap::new();
    let lookup = |v: &super::Vocab, s: &str, what: &str| {
        v.encode(s)
            .ok_or_else(|| Error::Data(format!("{what} {s:?} missing from vocabulary")))
    };
    for r in records {
        let user = lookup(&vocabs.users, &r.user, "user")?;
        per_user.entry(user).or_default().push(Event {
            item: lookup(&vocabs.items, &r.item, "item")?,
            category: lookup(&vocabs.categories, &r.category, "category")?,
            behavior: lookup(&vocabs.behaviors, &r.behavior, "behavior")?,
            bucket: 0,
            timestamp: r.timestamp,
        });
    }
    Ok(per_user
        .into_iter()
        .map(|(user, mut events)| {
            events.sort_by_key(|e| e.timestamp);
            bucketizer.assign(&mut events);
            UserSequence::new(user, events, target_behavior)
        })
        .collect())
}

/// Keep the most recent `max_len` events of each user; users left without a
/// target event are dropped.
pub fn truncate_sequences(
    sequences: &[UserSequence],
    max_len: usize,
    target_behavior: usize,
) -> Vec<UserSequence> {
    let max_len = max_len.max(1);
    sequences
        .iter()
        .filter_map(|s| {
            let start = s.events.len().saturating_sub(max_len);
            let seq = UserSequence::new(s.user, s.events[start..].to_vec(), target_behavior);
            (!seq.target_positions.is_empty()).then_some(seq)
        })
        .collect()
}
