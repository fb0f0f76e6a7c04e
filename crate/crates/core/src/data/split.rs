use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::{Bucketizer, Event, UserSequence};
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// A held-out target event. Its model input is `history[..position]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Holdout {
    pub item: usize,
    pub category: usize,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserSplit {
    pub user: usize,
    /// Events before the test event, with every other event on the test item
    /// removed. The validation event, when present, is still in here.
    pub history: Vec<Event>,
    pub validation: Option<Holdout>,
    pub test: Holdout,
    /// Every item the user ever interacted with, sorted.
    pub interacted: Vec<usize>,
    /// Sampled negatives, sorted; empty when the user has too few candidates.
    pub negatives: Vec<usize>,
}

impl UserSplit {
    /// History without the validation event, with buckets recomputed.
    pub fn training_sequence(&self, target_behavior: usize, bucketizer: &Bucketizer) -> UserSequence {
        let mut events = self.history.clone();
        if let Some(v) = self.validation {
            events.remove(v.position);
        }
        bucketizer.assign(&mut events);
        UserSequence::new(self.user, events, target_behavior)
    }

    pub fn validation_context(&self) -> Option<&[Event]> {
        self.validation.map(|v| &self.history[..v.position])
    }

    pub fn test_context(&self) -> &[Event] {
        &self.history[..self.test.position]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitConfig {
    pub n_negatives: usize,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            n_negatives: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub users: Vec<UserSplit>,
    pub n_items: usize,
    pub n_categories: usize,
    pub n_behaviors: usize,
    pub target_behavior: usize,
    pub n_negatives: usize,
    pub seed: u64,
    pub bucketizer: Bucketizer,
}

impl DatasetSplit {
    pub fn training_sequences(&self) -> Vec<UserSequence> {
        self.users
            .iter()
            .map(|u| u.training_sequence(self.target_behavior, &self.bucketizer))
            .collect()
    }

    /// Users whose negative pool could not be filled.
    pub fn excluded_users(&self) -> usize {
        self.users
            .iter()
            .filter(|u| u.negatives.len() != self.n_negatives)
            .count()
    }

    /// Redraw every negative pool with a different seed.
    pub fn resample_negatives(&self, seed: u64) -> DatasetSplit {
        let mut out = self.clone();
        out.seed = seed;
        for u in &mut out.users {
            let interacted: BTreeSet<usize> = u.interacted.iter().copied().collect();
            u.negatives = sample_negatives(u.user, &interacted, self.n_items, self.n_negatives, seed)
                .unwrap_or_default();
        }
        out
    }
}

/// Draw `n` distinct items uniformly from `1..=n_items` minus `interacted`.
/// Deterministic in `(user, seed)`; the result is sorted.
pub fn sample_negatives(
    user: usize,
    interacted: &BTreeSet<usize>,
    n_items: usize,
    n: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    let available = n_items - interacted.range(1..=n_items).count();
    if available < n {
        return Err(Error::Protocol(format!(
            "user {user} has {available} non-interacted items, {n} negatives required"
        )));
    }
    let mut rng = rng_for(seed, &[0x6e65_6761, user as u64]);
    if available >= 4 * n {
        // sparse case: rejection keeps the draw uniform over n-subsets
        // without enumerating a large catalog
        let mut out = BTreeSet::new();
        while out.len() < n {
            let i = rng.gen_range(1..=n_items);
            if !interacted.contains(&i) {
                out.insert(i);
            }
        }
        return Ok(out.into_iter().collect());
    }
    let candidates: Vec<usize> = (1..=n_items).filter(|i| !interacted.contains(i)).collect();
    let mut out: Vec<usize> = index::sample(&mut rng, candidates.len(), n)
        .into_iter()
        .map(|k| candidates[k])
        .collect();
    out.sort_unstable();
    Ok(out)
}

/// Leave-one-out split: the last target event is the test target, the one
/// before it the validation target. Events on the test item are removed from
/// the history, and both held-out events are excluded from training.
/// Users without any target event are skipped.
pub fn split_leave_one_out(
    sequences: &[UserSequence],
    n_items: usize,
    n_categories: usize,
    n_behaviors: usize,
    target_behavior: usize,
    bucketizer: &Bucketizer,
    config: &SplitConfig,
) -> DatasetSplit {
    let mut users = Vec::new();
    for seq in sequences {
        let Some(&test_pos) = seq.target_positions.last() else {
            continue;
        };
        let test_event = seq.events[test_pos];
        let val_pos = seq
            .target_positions
            .len()
            .checked_sub(2)
            .map(|k| seq.target_positions[k]);

        let mut history = Vec::with_capacity(test_pos);
        let mut validation = None;
        for (k, e) in seq.events[..test_pos].iter().enumerate() {
            if Some(k) == val_pos {
                validation = Some(Holdout {
                    item: e.item,
                    category: e.category,
                    position: history.len(),
                });
                history.push(*e);
            } else if e.item != test_event.item {
                history.push(*e);
            }
        }
        bucketizer.assign(&mut history);

        let interacted: BTreeSet<usize> = seq.events.iter().map(|e| e.item).collect();
        let negatives =
            sample_negatives(seq.user, &interacted, n_items, config.n_negatives, config.seed)
                .unwrap_or_default();
        users.push(UserSplit {
            user: seq.user,
            test: Holdout {
                item: test_event.item,
                category: test_event.category,
                position: history.len(),
            },
            history,
            validation,
            interacted: interacted.into_iter().collect(),
            negatives,
        });
    }
    DatasetSplit {
        users,
        n_items,
        n_categories,
        n_behaviors,
        target_behavior,
        n_negatives: config.n_negatives,
        seed: config.seed,
        bucketizer: bucketizer.clone(),
    }
}
