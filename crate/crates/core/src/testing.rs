//! Shared fixtures for unit tests.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::data::{Bucketizer, Event};
use crate::model::{Maint, ModelConfig, Variant};
use crate::rng::rng_for;

pub const BUY: usize = 3;

/// The toy instance used by the end-to-end gradient check.
pub fn toy_config(dim: usize, aspects: usize, variant: Variant) -> ModelConfig {
    ModelConfig {
        dim,
        aspects,
        dropout: 0.0,
        n_items: 12,
        n_categories: 4,
        n_behaviors: 3,
        target_behavior: BUY,
        variant,
        ..ModelConfig::default()
    }
}

pub fn toy_model(dim: usize, aspects: usize, variant: Variant, seed: u64) -> Maint {
    Maint::new(toy_config(dim, aspects, variant), seed).unwrap()
}

/// Random events on the toy vocabulary with real interval buckets.
pub fn toy_events(n: usize, seed: u64) -> Vec<Event> {
    let mut rng = rng_for(seed, &[77]);
    let mut t = 1_000_000i64;
    let mut events: Vec<Event> = (0..n)
        .map(|_| {
            t += rng.gen_range(1..200_000);
            let item = rng.gen_range(1..=12);
            Event {
                item,
                category: (item - 1) % 4 + 1,
                behavior: rng.gen_range(1..=3),
                bucket: 0,
                timestamp: t,
            }
        })
        .collect();
    Bucketizer::default().assign(&mut events);
    events
}

/// Events with targets at the given positions and non-target elsewhere.
pub fn events_with_targets(n: usize, targets: &[usize], seed: u64) -> Vec<Event> {
    let mut e = toy_events(n, seed);
    for (k, x) in e.iter_mut().enumerate() {
        x.behavior = if targets.contains(&k) { BUY } else { 1 + k % 2 };
    }
    e
}

/// Planted synthetic data, prepared and split.
pub fn synthetic_split(n_users: usize, noise: f64, seed: u64) -> crate::data::DatasetSplit {
    use crate::data::{generate_synthetic, prepare, SplitConfig, SyntheticSpec};
    let spec = SyntheticSpec {
        n_users,
        noise,
        seed,
        ..SyntheticSpec::default()
    };
    let data = generate_synthetic(&spec).unwrap();
    let names = spec.behavior_names();
    let names: Vec<&str> = names.iter().map(|s| s.as_str()).collect();
    let cfg = SplitConfig {
        n_negatives: 100,
        seed,
    };
    prepare(data.records, &names, "buy", &Bucketizer::default(), &cfg)
        .unwrap()
        .split
}
