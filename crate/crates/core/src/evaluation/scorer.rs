use alloc::vec;
use alloc::vec::Vec;

use crate::data::{DatasetSplit, Event, UserSplit};
use crate::error::Result;
use crate::model::Maint;
use crate::rng::{derive_seed, mix};

/// Anything that assigns a score to candidate items for one user.
pub trait Scorer {
    /// One score per candidate, higher is better. `context` is the model
    /// input preceding the held-out event.
    fn score(&self, user: &UserSplit, context: &[Event], candidates: &[usize]) -> Result<Vec<f64>>;
}

impl Scorer for Maint {
    fn score(&self, _user: &UserSplit, context: &[Event], candidates: &[usize]) -> Result<Vec<f64>> {
        let (items, _) = self.predict_next(context)?;
        candidates
            .iter()
            .map(|&c| {
                items.get(c).copied().ok_or(crate::Error::Index {
                    what: "candidate item",
                    index: c,
                    size: items.len(),
                })
            })
            .collect()
    }
}

/// Which training events count towards popularity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopularityBasis {
    AllEvents,
    TargetEvents,
}

/// Ranks items by how often they occur in the training sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PopularityScorer {
    pub counts: Vec<f64>,
}

impl PopularityScorer {
    pub fn from_split(split: &DatasetSplit, basis: PopularityBasis) -> Self {
        let mut counts = vec![0.0; split.n_items + 1];
        for seq in split.training_sequences() {
            for e in &seq.events {
                if basis == PopularityBasis::AllEvents || e.behavior == split.target_behavior {
                    counts[e.item] += 1.0;
                }
            }
        }
        PopularityScorer { counts }
    }
}

impl Scorer for PopularityScorer {
    fn score(&self, _user: &UserSplit, _context: &[Event], candidates: &[usize]) -> Result<Vec<f64>> {
        Ok(candidates
            .iter()
            .map(|&c| self.counts.get(c).copied().unwrap_or(0.0))
            .collect())
    }
}

/// Independent uniform scores per `(seed, user, item)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn score(&self, user: &UserSplit, _context: &[Event], candidates: &[usize]) -> Result<Vec<f64>> {
        let base = derive_seed(self.seed, &[user.user as u64]);
        Ok(candidates
            .iter()
            .map(|&c| (mix(base ^ c as u64) >> 11) as f64 / (1u64 << 53) as f64)
            .collect())
    }
}
