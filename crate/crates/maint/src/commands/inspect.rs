use std::collections::BTreeSet;

use maint_core::data::Event;
use maint_core::model::{Maint, StepSpec};
use maint_core::training::{gradient_check_with, toy_problem, GroupError};

use super::run::check_compatible;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::io::Dataset;
use crate::report::Table;

/// The most recent `max_len` events of a user's full sequence.
fn recent_events<'a>(ds: &'a Dataset, model: &Maint, user: &str) -> Result<(usize, &'a [Event])> {
    let u = ds.user_index(user)?;
    let seq = ds
        .sequence_of(u)
        .ok_or_else(|| CliError::input(format!("user {user:?} has no stored sequence")))?;
    let start = seq.events.len().saturating_sub(model.config().max_len.max(1));
    Ok((u, &seq.events[start..]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub rank: usize,
    pub item: String,
    pub index: usize,
    pub score: f64,
}

/// Top-`k` items the user never interacted with, by predicted probability
/// after the user's latest events. Ties go to the lower item index.
pub fn recommend(ds: &Dataset, model: &Maint, user: &str, k: usize) -> Result<Vec<Recommendation>> {
    check_compatible(model.config(), &ds.split)?;
    let (u, context) = recent_events(ds, model, user)?;
    let seen: BTreeSet<usize> = ds
        .sequence_of(u)
        .map(|s| s.events.iter().map(|e| e.item).collect())
        .unwrap_or_default();
    let (probs, _) = model.predict_next(context)?;
    let mut ranked: Vec<(usize, f64)> = probs
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(i, _)| !seen.contains(i))
        .map(|(i, &p)| (i, p))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(r, (index, score))| Recommendation {
            rank: r + 1,
            item: ds.vocabs.items.decode(index).unwrap_or("").to_string(),
            index,
            score,
        })
        .collect())
}

pub fn recommendations_table(recs: &[Recommendation]) -> Table {
    let mut t = Table::new(&["rank", "item", "score"]);
    for r in recs {
        t.push(vec![r.rank.to_string(), r.item.clone(), r.score.to_string()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq)]
pub struct Explanation {
    /// aspect, position, item, category, behavior, timestamp, alpha
    pub attention: Table,
    /// aspect, beta
    pub gates: Table,
}

/// Attention weights of every aspect over the user's latest events and the
/// per-aspect fusion gates, for a prediction after the last event.
pub fn explain(ds: &Dataset, model: &Maint, user: &str) -> Result<Explanation> {
    check_compatible(model.config(), &ds.split)?;
    let (_, events) = recent_events(ds, model, user)?;
    let trace = model.trace(events, StepSpec::full(events, model.config().target_behavior))?;
    let v = &ds.vocabs;
    let name = |voc: &maint_core::data::Vocab, i: usize| voc.decode(i).unwrap_or("").to_string();
    let mut attention = Table::new(&["aspect", "position", "item", "category", "behavior", "timestamp", "alpha"]);
    let mut gates = Table::new(&["aspect", "beta"]);
    for (j, a) in trace.aspects.iter().enumerate() {
        for (n, (e, alpha)) in events.iter().zip(&a.alpha).enumerate() {
            attention.push(vec![
                (j + 1).to_string(),
                (n + 1).to_string(),
                name(&v.items, e.item),
                name(&v.categories, e.category),
                name(&v.behaviors, e.behavior),
                e.timestamp.to_string(),
                alpha.to_string(),
            ]);
        }
        gates.push(vec![
            (j + 1).to_string(),
            a.beta.map_or_else(|| "NA".to_string(), |b| b.to_string()),
        ]);
    }
    Ok(Explanation { attention, gates })
}

/// Gradient check results for the toy model.
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub groups: Vec<GroupError>,
    pub tolerance: f64,
}

impl GradcheckReport {
    pub fn offenders(&self) -> Vec<&GroupError> {
        self.groups.iter().filter(|g| !(g.worst < self.tolerance)).collect()
    }

    pub fn passed(&self) -> bool {
        self.offenders().is_empty()
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(&["parameter", "entries", "worst_rel_error", "status"]);
        for g in &self.groups {
            let status = if g.worst < self.tolerance { "ok" } else { "FAIL" };
            t.push(vec![g.name.clone(), g.entries.to_string(), format!("{:.3e}", g.worst), status.into()]);
        }
        t
    }
}

pub const GRADCHECK_TOLERANCE: f64 = 1e-4;
/// Initial step of the Ridders extrapolation.
pub const GRADCHECK_STEP: f64 = 1e-2;

/// Check the toy model's gradients. The variant, leakage mode and seed come
/// from `config`; sizes are fixed and dropout is always off. `corrupt`
/// perturbs the analytic gradient of the named parameter before comparison.
pub fn gradcheck(config: &RunConfig, corrupt: Option<&str>) -> Result<GradcheckReport> {
    let (model, sequences) = toy_problem(config.kv.model.variant, config.kv.train.seed)?;
    debug_assert_eq!(model.config().dropout, 0.0);
    if let Some(name) = corrupt {
        if model.params.find(name).is_none() {
            let names: Vec<&str> = model.params.iter().map(|p| p.name.as_str()).collect();
            return Err(CliError::input(format!(
                "no parameter {name:?}; parameters: {}",
                names.join(", ")
            )));
        }
    }
    let groups = gradient_check_with(&model, &sequences, config.kv.train.leakage, GRADCHECK_STEP, |store| {
        if let Some(id) = corrupt.and_then(|n| store.find(n)) {
            let g = &mut store.get_mut(id).grad.data_mut()[0];
            *g = *g * 1.5 + 0.1;
        }
    })?;
    Ok(GradcheckReport {
        groups,
        tolerance: GRADCHECK_TOLERANCE,
    })
}
