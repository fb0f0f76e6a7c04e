use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use super::{Event, UserSequence};
use crate::rng::rng_for;

/// A right-padded mini-batch of user sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    /// Indices into the sequence list the iterator was built from.
    pub rows: Vec<usize>,
    pub events: Vec<Vec<Event>>,
    pub event_mask: Vec<Vec<bool>>,
    pub target_mask: Vec<Vec<bool>>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn width(&self) -> usize {
        self.events.first().map_or(0, Vec::len)
    }
}

/// Seeded per-epoch shuffle over users, cut into batches of `batch_size`.
pub struct BatchIterator<'a> {
    sequences: &'a [UserSequence],
    order: Vec<usize>,
    batch_size: usize,
    cursor: usize,
}

impl<'a> BatchIterator<'a> {
    pub fn new(sequences: &'a [UserSequence], batch_size: usize, seed: u64, epoch: u64) -> Self {
        let mut order: Vec<usize> = (0..sequences.len()).collect();
        order.shuffle(&mut rng_for(seed, &[0x6261_7463, epoch]));
        BatchIterator {
            sequences,
            order,
            batch_size: batch_size.max(1),
            cursor: 0,
        }
    }
}

impl Iterator for BatchIterator<'_> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.cursor >= self.order.len() {
            return None;
        }
        let end = (self.cursor + self.batch_size).min(self.order.len());
        let rows = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        let width = rows.iter().map(|&r| self.sequences[r].len()).max().unwrap_or(0);
        let mut events = Vec::with_capacity(rows.len());
        let mut event_mask = Vec::with_capacity(rows.len());
        let mut target_mask = Vec::with_capacity(rows.len());
        for &r in &rows {
            let s = &self.sequences[r];
            let mut ev = s.events.clone();
            ev.resize(width, Event::PADDING);
            let mut em = vec![true; s.len()];
            em.resize(width, false);
            let mut tm = vec![false; width];
            for &p in &s.target_positions {
                tm[p] = true;
            }
            events.push(ev);
            event_mask.push(em);
            target_mask.push(tm);
        }
        Some(Batch {
            rows,
            events,
            event_mask,
            target_mask,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seqs(n: usize, len: impl Fn(usize) -> usize) -> Vec<UserSequence> {
        (0..n)
            .map(|u| {
                let events = (0..len(u))
                    .map(|k| Event {
                        item: k + 1,
                        category: 1,
                        behavior: if k % 2 == 0 { 2 } else { 1 },
                        bucket: 0,
                        timestamp: k as i64,
                    })
                    .collect();
                UserSequence::new(u, events, 2)
            })
            .collect()
    }

    #[test]
    fn batch_sizes() {
        let s = seqs(1300, |_| 3);
        let sizes: Vec<_> = BatchIterator::new(&s, 512, 0, 0).map(|b| b.len()).collect();
        assert_eq!(sizes, vec![512, 512, 276]);
    }

    #[test]
    fn equal_lengths_give_full_masks() {
        let s = seqs(10, |_| 4);
        for b in BatchIterator::new(&s, 4, 1, 0) {
            assert!(b.event_mask.iter().flatten().all(|&m| m));
        }
    }

    #[test]
    fn padding_and_target_masks() {
        let s = seqs(3, |u| u + 2);
        let b = BatchIterator::new(&s, 3, 5, 0).next().unwrap();
        assert_eq!(b.width(), 4);
        for (k, &r) in b.rows.iter().enumerate() {
            let n = s[r].len();
            assert_eq!(b.event_mask[k].iter().filter(|&&m| m).count(), n);
            assert!(b.events[k][n..].iter().all(|e| *e == Event::PADDING));
            for (p, &t) in b.target_mask[k].iter().enumerate() {
                assert_eq!(t, s[r].target_positions.contains(&p));
            }
        }
    }

    #[test]
    fn seeded_composition_is_reproducible() {
        let s = seqs(100, |u| u % 5 + 1);
        let a: Vec<_> = BatchIterator::new(&s, 16, 9, 3).collect();
        let b: Vec<_> = BatchIterator::new(&s, 16, 9, 3).collect();
        assert_eq!(a, b);
        let c: Vec<_> = BatchIterator::new(&s, 16, 9, 4).collect();
        assert_ne!(a[0].rows, c[0].rows);
    }
}
