use alloc::vec;
use alloc::vec::Vec;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng as _;

use super::*;
use crate::data::{Bucketizer, Holdout};
use crate::rng::rng_for;

/// Full re-sort of the candidates; the positive goes after every tie.
fn brute_force_rank(positive: f64, negatives: &[f64]) -> usize {
    let mut all: Vec<(f64, bool)> = negatives.iter().map(|&s| (s, false)).collect();
    all.push((positive, true));
    all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    all.iter().position(|x| x.1).unwrap() + 1
}

fn brute_force_ndcg(rank: usize, k: usize) -> f64 {
    // DCG of a single relevant item at `rank` within the top k, ideal DCG 1
    let mut dcg = 0.0;
    for pos in 1..=k {
        if pos == rank {
            dcg += 1.0 / libm::log2(pos as f64 + 1.0);
        }
    }
    dcg
}

#[test]
fn metric_spot_values() {
    assert_eq!(hr_at_k(1, 1), 1.0);
    assert_eq!(ndcg_at_k(1, 10), 1.0);
    assert_eq!(ndcg_at_k(3, 10), 0.5);
    assert_eq!(hr_at_k(11, 10), 0.0);
    assert_eq!(ndcg_at_k(11, 10), 0.0);
}

#[test]
fn rank_examples() {
    assert_eq!(rank_of(0.9, &[0.1, 0.5, 0.3]), 1);
    assert_eq!(rank_of(0.5, &[0.5; 100]), 101);
    // hand-sorted: 0.8, 0.7 (positive), 0.7, 0.2 -> the tie goes first
    assert_eq!(rank_of(0.7, &[0.2, 0.8, 0.7]), 3);
}

#[test]
fn ten_thousand_fixtures_match_brute_force() {
    let mut rng = rng_for(5, &[]);
    for _ in 0..10_000 {
        let n = rng.gen_range(1..120);
        // coarse scores so ties are common
        let levels = rng.gen_range(1..20);
        let negs: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64).collect();
        let pos = rng.gen_range(0..levels) as f64;
        let r = rank_of(pos, &negs);
        assert_eq!(r, brute_force_rank(pos, &negs));
        for k in [1, 2, 6, 10, 50] {
            assert_eq!(hr_at_k(r, k), if r <= k { 1.0 } else { 0.0 });
            assert_eq!(ndcg_at_k(r, k), brute_force_ndcg(r, k));
        }
    }
}

/// Users with a one-event history and a full negative pool.
fn fake_split(n_users: usize, n_items: usize, seed: u64) -> DatasetSplit {
    let mut rng = rng_for(seed, &[1]);
    let users = (0..n_users)
        .map(|u| {
            let mut items: Vec<usize> = (1..=n_items).collect();
            items.shuffle(&mut rng);
            let event = Event {
                item: items[0],
                category: 1,
                behavior: 1,
                bucket: 9,
                timestamp: 0,
            };
            let test = items[1];
            let mut negatives = items[2..102].to_vec();
            negatives.sort_unstable();
            let mut interacted = vec![items[0], test];
            interacted.sort_unstable();
            UserSplit {
                user: u + 1,
                history: vec![event],
                validation: None,
                test: Holdout {
                    item: test,
                    category: 1,
                    position: 1,
                },
                interacted,
                negatives,
            }
        })
        .collect();
    DatasetSplit {
        users,
        n_items,
        n_categories: 1,
        n_behaviors: 2,
        target_behavior: 2,
        n_negatives: 100,
        seed,
        bucketizer: Bucketizer::default(),
    }
}

struct Oracle;

impl Scorer for Oracle {
    fn score(&self, user: &UserSplit, _: &[Event], candidates: &[usize]) -> Result<Vec<f64>> {
        Ok(candidates.iter().map(|&c| if c == user.test.item { 1.0 } else { 0.0 }).collect())
    }
}

struct Constant;

impl Scorer for Constant {
    fn score(&self, _: &UserSplit, _: &[Event], candidates: &[usize]) -> Result<Vec<f64>> {
        Ok(vec![0.25; candidates.len()])
    }
}

#[test]
fn perfect_scorer_hits_everywhere() {
    let split = fake_split(50, 300, 0);
    let e = evaluate(&Oracle, &split, Target::Test, &DEFAULT_KS).unwrap();
    assert_eq!(e.hr, vec![1.0; 3]);
    assert_eq!(e.ndcg, vec![1.0; 3]);
    assert_eq!(e.users(), 50);
}

#[test]
fn constant_scorer_never_hits() {
    let split = fake_split(50, 300, 0);
    let e = evaluate(&Constant, &split, Target::Test, &[10]).unwrap();
    assert_eq!(e.hr_at(10), Some(0.0));
    assert!(e.ranks.iter().all(|&(_, r)| r == 101));
}

#[test]
fn random_scorer_is_calibrated() {
    let split = fake_split(3000, 400, 2);
    let e = evaluate(&RandomScorer { seed: 9 }, &split, Target::Test, &[10]).unwrap();
    let hr = e.hr_at(10).unwrap();
    assert!((hr - 10.0 / 101.0).abs() < 0.02, "HR@10 = {hr}");
}

#[test]
fn incomplete_pools_are_excluded_and_counted() {
    let mut split = fake_split(20, 300, 0);
    split.users[3].negatives.pop();
    split.users[7].negatives.clear();
    let e = evaluate(&Oracle, &split, Target::Test, &[10]).unwrap();
    assert_eq!(e.excluded, 2);
    assert_eq!(e.users(), 18);
    let v = evaluate(&Oracle, &split, Target::Validation, &[10]).unwrap();
    assert_eq!(v.missing, 18);
}

#[test]
fn positive_among_negatives_is_a_protocol_error() {
    let mut split = fake_split(3, 300, 0);
    let test = split.users[1].test.item;
    split.users[1].negatives[0] = test;
    let err = evaluate(&Oracle, &split, Target::Test, &[10]).unwrap_err();
    assert!(matches!(err, Error::Protocol(_)));
}

#[test]
fn popularity_counts_training_events() {
    let split = fake_split(30, 300, 4);
    let pop = PopularityScorer::from_split(&split, PopularityBasis::AllEvents);
    let total: f64 = pop.counts.iter().sum();
    assert_eq!(total, 30.0);
    let buys = PopularityScorer::from_split(&split, PopularityBasis::TargetEvents);
    assert_eq!(buys.counts.iter().sum::<f64>(), 0.0);
}

#[test]
fn model_evaluation_leaves_parameters_untouched() {
    let mut split = fake_split(20, 300, 1);
    split.n_categories = 4;
    let cfg = crate::model::ModelConfig {
        dim: 4,
        aspects: 2,
        n_items: 300,
        n_categories: 4,
        n_behaviors: 2,
        target_behavior: 2,
        ..Default::default()
    };
    let model = Maint::new(cfg, 0).unwrap();
    let before = model.params.clone();
    let e = evaluate(&model, &split, Target::Test, &DEFAULT_KS).unwrap();
    assert_eq!(model.params, before);
    assert_eq!(e.users(), 20);
}

use crate::model::Maint;

proptest! {
    #[test]
    fn metrics_are_monotone_in_k(ranks in proptest::collection::vec(1usize..102, 1..50)) {
        let ranks: Vec<(usize, usize)> = ranks.into_iter().enumerate().collect();
        let ks: Vec<usize> = (1..=101).collect();
        let e = Evaluation::from_ranks(Target::Test, &ks, ranks, 0, 0);
        for w in 0..100 {
            prop_assert!(e.hr[w] <= e.hr[w + 1]);
            prop_assert!(e.ndcg[w] <= e.ndcg[w + 1]);
            prop_assert!(e.ndcg[w] <= e.hr[w]);
            prop_assert!((0.0..=1.0).contains(&e.hr[w]));
        }
    }
}
