//! Leave-one-out ranking evaluation against sampled negatives.
//!
//! Each evaluable user contributes one ranking of the held-out item among
//! its negative pool. Ties count against the held-out item.

mod scorer;

pub use scorer::{PopularityBasis, PopularityScorer, RandomScorer, Scorer};

use alloc::format;
use alloc::vec::Vec;

use crate::data::{DatasetSplit, Event, UserSplit};
use crate::error::{Error, Result};

pub const DEFAULT_KS: [usize; 3] = [2, 6, 10];

/// Which held-out event to rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Validation,
    Test,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Validation => "validation",
            Target::Test => "test",
        }
    }
}

/// `1 + #{negatives scoring at least as high as the positive}`.
pub fn rank_of(positive: f64, negatives: &[f64]) -> usize {
    1 + negatives.iter().filter(|&&s| !(s < positive)).count()
}

pub fn hr_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at_k(rank: usize, k: usize) -> f64 {
    if rank <= k {
        1.0 / libm::log2(rank as f64 + 1.0)
    } else {
        0.0
    }
}

/// The held-out item, its model input and the user's negatives.
pub fn holdout<'a>(user: &'a UserSplit, target: Target) -> Option<(usize, &'a [Event])> {
    match target {
        Target::Test => Some((user.test.item, user.test_context())),
        Target::Validation => user
            .validation
            .map(|v| (v.item, &user.history[..v.position])),
    }
}

/// Rank of `item` among `item ∪ negatives` under `scorer`.
pub fn rank_candidates<S: Scorer + ?Sized>(
    scorer: &S,
    user: &UserSplit,
    context: &[Event],
    item: usize,
    negatives: &[usize],
) -> Result<usize> {
    if negatives.contains(&item) {
        return Err(Error::Protocol(format!(
            "user {}: held-out item {item} is among its negatives",
            user.user
        )));
    }
    let mut candidates = Vec::with_capacity(negatives.len() + 1);
    candidates.push(item);
    candidates.extend_from_slice(negatives);
    let scores = scorer.score(user, context, &candidates)?;
    if scores.len() != candidates.len() {
        return Err(Error::Dimension {
            op: "scorer output",
            left: alloc::vec![scores.len()],
            right: alloc::vec![candidates.len()],
        });
    }
    Ok(rank_of(scores[0], &scores[1..]))
}

/// Per-user ranks and the metrics averaged over them.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub target: Target,
    pub ks: Vec<usize>,
    /// `(user, rank)` in split order.
    pub ranks: Vec<(usize, usize)>,
    /// Users skipped because their negative pool is incomplete.
    pub excluded: usize,
    /// Users skipped because they lack the held-out event (validation only).
    pub missing: usize,
    pub hr: Vec<f64>,
    pub ndcg: Vec<f64>,
}

impl Evaluation {
    pub fn users(&self) -> usize {
        self.ranks.len()
    }

    pub fn hr_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.hr[i])
    }

    pub fn ndcg_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.ndcg[i])
    }

    /// Mean metrics over a list of ranks.
    pub fn from_ranks(target: Target, ks: &[usize], ranks: Vec<(usize, usize)>, excluded: usize, missing: usize) -> Self {
        let n = ranks.len().max(1) as f64;
        let hr = ks
            .iter()
            .map(|&k| ranks.iter().map(|&(_, r)| hr_at_k(r, k)).sum::<f64>() / n)
            .collect();
        let ndcg = ks
            .iter()
            .map(|&k| ranks.iter().map(|&(_, r)| ndcg_at_k(r, k)).sum::<f64>() / n)
            .collect();
        Evaluation {
            target,
            ks: ks.to_vec(),
            ranks,
            excluded,
            missing,
            hr,
            ndcg,
        }
    }
}

/// Rank every evaluable user's held-out item.
pub fn evaluate<S: Scorer + ?Sized>(
    scorer: &S,
    split: &DatasetSplit,
    target: Target,
    ks: &[usize],
) -> Result<Evaluation> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::Argument("cutoffs must be a non-empty list of positive integers".into()));
    }
    let mut ranks = Vec::with_capacity(split.users.len());
    let mut excluded = 0;
    let mut missing = 0;
    for user in &split.users {
        if user.negatives.len() != split.n_negatives {
            excluded += 1;
            continue;
        }
        let Some((item, context)) = holdout(user, target) else {
            missing += 1;
            continue;
        };
        if context.is_empty() {
            missing += 1;
            continue;
        }
        let rank = rank_candidates(scorer, user, context, item, &user.negatives)?;
        ranks.push((user.user, rank));
    }
    Ok(Evaluation::from_ranks(target, ks, ranks, excluded, missing))
}

#[cfg(test)]
mod tests;
