use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{accumulate_gradients, compute_loss};
use crate::data::{Bucketizer, Event, UserSequence};
use crate::error::Result;
use crate::model::{LeakageMode, Maint, ModelConfig, Variant};
use crate::numerics::{relative_error, ridders_derivative, ParamStore};
use crate::rng::rng_for;

/// Worst finite-difference disagreement within one parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    pub name: String,
    pub worst: f64,
    pub entries: usize,
}

/// Compare the backward pass against Ridders-extrapolated central differences of the full loss
/// for every parameter entry. Dropout is never applied.
/// `h` is the initial step of the extrapolation.
pub fn gradient_check(
    model: &Maint,
    sequences: &[UserSequence],
    leakage: LeakageMode,
    h: f64,
) -> Result<Vec<GroupError>> {
    gradient_check_with(model, sequences, leakage, h, |_| {})
}

/// [`gradient_check`] with a hook that may alter the analytic gradients
/// before comparison, for exercising the harness itself.
pub fn gradient_check_with(
    model: &Maint,
    sequences: &[UserSequence],
    leakage: LeakageMode,
    h: f64,
    mut tamper: impl FnMut(&mut ParamStore),
) -> Result<Vec<GroupError>> {
    let mut probe = model.clone();
    let refs: Vec<&UserSequence> = sequences.iter().collect();
    accumulate_gradients(&mut probe, &refs, leakage, None)?;
    tamper(&mut probe.params);
    let analytic: Vec<_> = probe.params.iter().map(|p| p.grad.clone()).collect();
    let ids: Vec<_> = probe.params.ids().collect();
    let mut out = Vec::with_capacity(ids.len());
    for (id, grad) in ids.into_iter().zip(analytic) {
        let mut worst: f64 = 0.0;
        for k in 0..grad.len() {
            let orig = probe.params.value(id).data()[k];
            let mut failure = None;
            let (numeric, _) = ridders_derivative(
                |x| {
                    probe.params.get_mut(id).value.data_mut()[k] = x;
                    compute_loss(&probe, sequences, leakage).unwrap_or_else(|e| {
                        failure = Some(e);
                        f64::NAN
                    })
                },
                orig,
                h,
            );
            probe.params.get_mut(id).value.data_mut()[k] = orig;
            if let Some(e) = failure {
                return Err(e);
            }
            worst = worst.max(relative_error(grad.data()[k], numeric));
        }
        out.push(GroupError {
            name: probe.params.get(id).name.clone(),
            worst,
            entries: grad.len(),
        });
    }
    Ok(out)
}

/// The small instance used for gradient checks: 12 items, 4 categories,
/// 3 behavior types (the third is the target), `d = 4`, `J = 2`, dropout
/// off, and two 6-event sequences with several target events each.
pub fn toy_problem(variant: Variant, seed: u64) -> Result<(Maint, Vec<UserSequence>)> {
    let config = ModelConfig {
        dim: 4,
        aspects: 2,
        dropout: 0.0,
        n_items: 12,
        n_categories: 4,
        n_behaviors: 3,
        target_behavior: 3,
        variant,
        ..ModelConfig::default()
    };
    let model = Maint::new(config, seed)?;
    let bucketizer = Bucketizer::default();
    let mut rng = rng_for(seed, &[0x746f_79]);
    let patterns: [[usize; 6]; 2] = [[1, 3, 2, 3, 1, 3], [3, 1, 3, 2, 2, 3]];
    let sequences = patterns
        .iter()
        .enumerate()
        .map(|(u, behaviors)| {
            let mut t = 0i64;
            let mut events: Vec<Event> = behaviors
                .iter()
                .map(|&b| {
                    t += rng.gen_range(1..100_000);
                    let item = rng.gen_range(1..=12);
                    Event {
                        item,
                        category: (item - 1) % 4 + 1,
                        behavior: b,
                        bucket: 0,
                        timestamp: t,
                    }
                })
                .collect();
            bucketizer.assign(&mut events);
            UserSequence::new(u + 1, events, 3)
        })
        .collect();
    Ok((model, sequences))
}
