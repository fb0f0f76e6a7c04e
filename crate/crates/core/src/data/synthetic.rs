use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;

use super::BehaviorRecord;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Parameters of the planted-structure generator.
///
/// Every user has a preferred category that drives purchases. Each session
/// has an intent category (equal to the preference unless it drifts) that
/// drives the support events of the session; a `noise` fraction of support
/// events lands on a uniformly random catalog item instead. A session ends
/// with a purchase from the preferred category (probability
/// `preference_strength`) or the intent category, favoring items the user
/// just interacted with.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_users: usize,
    pub n_items: usize,
    pub n_categories: usize,
    pub n_behavior_types: usize,
    pub preference_strength: f64,
    pub intent_drift: f64,
    pub noise: f64,
    pub sessions: (usize, usize),
    pub session_len: (usize, usize),
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_users: 1000,
            n_items: 300,
            n_categories: 15,
            n_behavior_types: 4,
            preference_strength: 0.8,
            intent_drift: 0.3,
            noise: 0.3,
            sessions: (4, 6),
            session_len: (2, 4),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Argument(format!("synthetic spec: {m}")));
        if self.n_users == 0 || self.n_items == 0 || self.n_categories == 0 {
            return bad("counts must be positive");
        }
        if self.n_behavior_types < 2 {
            return bad("need at least one support type and the target type");
        }
        if self.n_items < self.n_categories {
            return bad("every category needs at least one item");
        }
        if !(0.0..1.0).contains(&self.noise) {
            return bad("noise fraction must lie in [0, 1)");
        }
        for p in [self.preference_strength, self.intent_drift] {
            if !(0.0..=1.0).contains(&p) {
                return bad("probabilities must lie in [0, 1]");
            }
        }
        if self.sessions.0 == 0 || self.sessions.0 > self.sessions.1 {
            return bad("session count range must be non-empty and positive");
        }
        if self.session_len.0 > self.session_len.1 {
            return bad("session length range is empty");
        }
        Ok(())
    }

    /// Behavior names; the last one is the target type `buy`.
    pub fn behavior_names(&self) -> Vec<String> {
        let base = ["click", "collect", "cart"];
        let support = self.n_behavior_types - 1;
        let mut names: Vec<String> = match support {
            1 => alloc::vec!["click".into()],
            2 => alloc::vec!["click".into(), "cart".into()],
            _ => base.iter().map(|s| String::from(*s)).collect(),
        };
        for k in names.len()..support {
            names.push(format!("support{k}"));
        }
        names.push("buy".into());
        names
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub records: Vec<BehaviorRecord>,
    /// Parallel to `records`: true for support events drawn as noise.
    pub noise: Vec<bool>,
    /// Preferred category name per user, in user order.
    pub preferred: Vec<String>,
}

impl SyntheticData {
    pub fn noise_fraction(&self) -> f64 {
        let support = self.records.iter().filter(|r| r.behavior != "buy").count();
        let noisy = self.noise.iter().filter(|&&n| n).count();
        noisy as f64 / support.max(1) as f64
    }
}

fn item_name(k: usize) -> String {
    format!("i{k:05}")
}

fn category_name(c: usize) -> String {
    format!("c{c:03}")
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let names = spec.behavior_names();
    let support = &names[..names.len() - 1];
    // items of category c are c+1, c+1+C, c+1+2C, ...
    let members: Vec<Vec<usize>> = (0..spec.n_categories)
        .map(|c| (c + 1..=spec.n_items).step_by(spec.n_categories).collect())
        .collect();
    let category_of = |item: usize| (item - 1) % spec.n_categories;

    let mut records = Vec::new();
    let mut noise = Vec::new();
    let mut preferred = Vec::new();
    for u in 0..spec.n_users {
        let mut rng = rng_for(spec.seed, &[0x7379_6e74, u as u64]);
        let user = format!("u{u:05}");
        let pref = rng.gen_range(0..spec.n_categories);
        preferred.push(category_name(pref));
        let mut t: i64 = 1_500_000_000 + rng.gen_range(0..86_400);
        let sessions = rng.gen_range(spec.sessions.0..=spec.sessions.1);
        for _ in 0..sessions {
            let intent = if spec.n_categories > 1 && rng.gen::<f64>() < spec.intent_drift {
                (pref + rng.gen_range(1..spec.n_categories)) % spec.n_categories
            } else {
                pref
            };
            let len = rng.gen_range(spec.session_len.0..=spec.session_len.1);
            let mut seen: Vec<usize> = Vec::new();
            for _ in 0..len {
                let is_noise = rng.gen::<f64>() < spec.noise;
                let item = if is_noise {
                    rng.gen_range(1..=spec.n_items)
                } else {
                    let pool = &members[intent];
                    pool[rng.gen_range(0..pool.len())]
                };
                if !is_noise {
                    seen.push(item);
                }
                // clicks dominate the support types
                let b = if rng.gen::<f64>() < 0.6 {
                    0
                } else {
                    rng.gen_range(0..support.len())
                };
                records.push(BehaviorRecord::new(
                    user.clone(),
                    item_name(item),
                    category_name(category_of(item)),
                    support[b].clone(),
                    t,
                ));
                noise.push(is_noise);
                t += rng.gen_range(30..600);
            }
            let buy_cat = if rng.gen::<f64>() < spec.preference_strength {
                pref
            } else {
                intent
            };
            let recent: Vec<usize> = seen
                .iter()
                .copied()
                .filter(|&i| category_of(i) == buy_cat)
                .collect();
            let item = if !recent.is_empty() && rng.gen::<f64>() < 0.5 {
                recent[rng.gen_range(0..recent.len())]
            } else {
                let pool = &members[buy_cat];
                pool[rng.gen_range(0..pool.len())]
            };
            t += rng.gen_range(60..1800);
            records.push(BehaviorRecord::new(
                user.clone(),
                item_name(item),
                category_name(buy_cat),
                "buy",
                t,
            ));
            noise.push(false);
            t += rng.gen_range(86_400..5 * 86_400);
        }
    }
    Ok(SyntheticData {
        records,
        noise,
        preferred,
    })
}
