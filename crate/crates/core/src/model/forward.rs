use alloc::vec;
use alloc::vec::Vec;

use super::layers::{self, AspectOutput, EventEmbedding};
use super::Maint;
use crate::data::Event;
use crate::error::{Error, Result};
use crate::numerics::{Tape, Var};
use crate::rng::Rng;

/// What one prediction may see: the first `prefix` events, of which the
/// first `targets` target-type events feed the preference encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepSpec {
    pub targets: usize,
    pub prefix: usize,
}

impl StepSpec {
    /// Step `m` (1-based count of consumed target events): the prefix ends
    /// just before the `(m+1)`-th target event, or covers everything when
    /// there is none.
    pub fn for_step(events: &[Event], target_behavior: usize, m: usize) -> Result<Self> {
        let positions: Vec<usize> = events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.behavior == target_behavior)
            .map(|(n, _)| n)
            .collect();
        if m > positions.len() {
            return Err(Error::Argument(alloc::format!(
                "step {m} exceeds the {} target events",
                positions.len()
            )));
        }
        let prefix = positions.get(m).copied().unwrap_or(events.len());
        if prefix == 0 {
            return Err(Error::EmptyPrefix);
        }
        Ok(StepSpec { targets: m, prefix })
    }

    /// A whole context: every event and every target event is visible.
    pub fn full(events: &[Event], target_behavior: usize) -> Self {
        StepSpec {
            targets: events.iter().filter(|e| e.behavior == target_behavior).count(),
            prefix: events.len(),
        }
    }
}

/// Per-sequence computation shared by every prediction step on one tape:
/// embeddings, both encoders over the full sequence, and attention keys and
/// values per aspect.
pub struct StepGraph<'a> {
    model: &'a Maint,
    events: &'a [Event],
    target_states: Vec<Var>,
    behavior_states: Vec<(Var, Var)>,
    keys: Vec<Vec<Var>>,
    values: Vec<Vec<Var>>,
}

/// Tape handles of one prediction.
#[derive(Debug, Clone)]
pub struct StepOutput {
    pub spec: StepSpec,
    pub h_s: Var,
    pub h_d: Vec<Var>,
    pub aspects: Vec<AspectOutput>,
    pub h_f: Var,
    pub item_probs: Var,
    pub category_probs: Var,
}

impl<'a> StepGraph<'a> {
    pub fn build(model: &'a Maint, tape: &mut Tape, events: &'a [Event]) -> Result<Self> {
        let store = &model.params;
        let ids = &model.ids;
        let cfg = &model.config;
        let embeddings = events
            .iter()
            .map(|e| layers::embed_event(tape, store, ids, e))
            .collect::<Result<Vec<_>>>()?;
        let targets: Vec<EventEmbedding> = events
            .iter()
            .zip(&embeddings)
            .filter(|(e, _)| e.behavior == cfg.target_behavior)
            .map(|(_, x)| *x)
            .collect();
        let target_states = layers::target_lstm(tape, store, ids, &targets)?;

        let d = cfg.dim;
        let mut h = tape.zeros(d);
        let mut c = tape.zeros(d);
        let mut behavior_states = Vec::with_capacity(events.len());
        for x in &embeddings {
            (h, c) = layers::behavior_cell(tape, store, ids, cfg.variant, x, h, c)?;
            behavior_states.push((h, c));
        }
        let mut keys = Vec::with_capacity(ids.aspects.len());
        let mut values = Vec::with_capacity(ids.aspects.len());
        for a in &ids.aspects {
            let mut k = Vec::with_capacity(events.len());
            let mut v = Vec::with_capacity(events.len());
            for &(h, _) in &behavior_states {
                k.push(layers::attention_key(tape, store, a, h)?);
                v.push(layers::attention_value(tape, store, a, h)?);
            }
            keys.push(k);
            values.push(v);
        }
        Ok(StepGraph {
            model,
            events,
            target_states,
            behavior_states,
            keys,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Record one prediction. The last visible event's interval depends on
    /// its successor, which the prefix does not include, so that event is
    /// re-encoded with the terminal bucket.
    pub fn step(&self, tape: &mut Tape, spec: StepSpec, rng: Option<&mut Rng>) -> Result<StepOutput> {
        let model = self.model;
        let store = &model.params;
        let ids = &model.ids;
        let cfg = &model.config;
        let n = spec.prefix;
        if n == 0 {
            return Err(Error::EmptyPrefix);
        }
        if n > self.events.len() || spec.targets > self.target_states.len() {
            return Err(Error::Argument(alloc::format!(
                "step sees {} events and {} targets, sequence has {} and {}",
                n,
                spec.targets,
                self.events.len(),
                self.target_states.len()
            )));
        }

        let h_s = match spec.targets {
            0 => tape.zeros(cfg.dim),
            m => self.target_states[m - 1],
        };

        let terminal = cfg.terminal_bucket();
        let last = &self.events[n - 1];
        let branch = if last.bucket == terminal {
            None
        } else {
            let mut e = *last;
            e.bucket = terminal;
            let x = layers::embed_event(tape, store, ids, &e)?;
            let (h, c) = if n >= 2 {
                self.behavior_states[n - 2]
            } else {
                (tape.zeros(cfg.dim), tape.zeros(cfg.dim))
            };
            Some(layers::behavior_cell(tape, store, ids, cfg.variant, &x, h, c)?.0)
        };

        let mut h_d: Vec<Var> = self.behavior_states[..n].iter().map(|s| s.0).collect();
        if let Some(b) = branch {
            h_d[n - 1] = b;
        }
        let mask = vec![true; n];
        let projected = layers::project_aspects(tape, store, ids, h_s)?;
        let mut aspects = Vec::with_capacity(ids.aspects.len());
        for (j, a) in ids.aspects.iter().enumerate() {
            let mut keys = self.keys[j][..n].to_vec();
            let mut values = self.values[j][..n].to_vec();
            if let Some(b) = branch {
                keys[n - 1] = layers::attention_key(tape, store, a, b)?;
                values[n - 1] = layers::attention_value(tape, store, a, b)?;
            }
            let (hd, alpha) = layers::attend(tape, store, a, projected[j], &keys, &values, &mask)?;
            let (hh, beta) = layers::gated_fusion(tape, store, a, projected[j], hd)?;
            aspects.push(AspectOutput {
                h_s: projected[j],
                h_d: hd,
                alpha,
                beta,
                h_h: hh,
            });
        }
        let fused: Vec<Var> = aspects.iter().map(|a| a.h_h).collect();
        let h_f = layers::finalize(tape, store, ids, &fused, cfg.dropout, rng)?;
        let (item_probs, category_probs) =
            layers::predict(tape, store, ids, h_f, &model.item_mask, &model.category_mask)?;
        Ok(StepOutput {
            spec,
            h_s,
            h_d,
            aspects,
            h_f,
            item_probs,
            category_probs,
        })
    }
}

/// Values of one aspect's intermediate quantities.
#[derive(Debug, Clone, PartialEq)]
pub struct AspectTrace {
    pub h_s: Vec<f64>,
    pub h_d: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Option<f64>,
    pub h_h: Vec<f64>,
}

/// Values of one inference-mode prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub spec: StepSpec,
    /// Preference states `h^S_1..h^S_m`.
    pub preference_states: Vec<Vec<f64>>,
    /// Behavior states over the visible prefix.
    pub behavior_states: Vec<Vec<f64>>,
    pub aspects: Vec<AspectTrace>,
    pub h_f: Vec<f64>,
    pub item_probs: Vec<f64>,
    pub category_probs: Vec<f64>,
}

impl ForwardTrace {
    pub(crate) fn read(tape: &Tape, graph: &StepGraph<'_>, out: &StepOutput) -> Self {
        let val = |v: Var| tape.value(v).to_vec();
        ForwardTrace {
            spec: out.spec,
            preference_states: graph.target_states[..out.spec.targets].iter().map(|&v| val(v)).collect(),
            behavior_states: out.h_d.iter().map(|&v| val(v)).collect(),
            aspects: out
                .aspects
                .iter()
                .map(|a| AspectTrace {
                    h_s: val(a.h_s),
                    h_d: val(a.h_d),
                    alpha: val(a.alpha),
                    beta: a.beta.map(|b| tape.scalar(b)),
                    h_h: val(a.h_h),
                })
                .collect(),
            h_f: val(out.h_f),
            item_probs: val(out.item_probs),
            category_probs: val(out.category_probs),
        }
    }
}

impl Maint {
    /// Inference-mode trace of one prediction over `events`.
    pub fn trace(&self, events: &[Event], spec: StepSpec) -> Result<ForwardTrace> {
        let mut tape = Tape::new();
        let graph = StepGraph::build(self, &mut tape, &events[..spec.prefix.min(events.len())])?;
        let out = graph.step(&mut tape, spec, None)?;
        Ok(ForwardTrace::read(&tape, &graph, &out))
    }

    /// Trace of step `m`: the first `m` target events feed the preference
    /// encoder and only events before the `(m+1)`-th target are visible.
    pub fn forward(&self, events: &[Event], m: usize) -> Result<ForwardTrace> {
        let spec = StepSpec::for_step(events, self.config.target_behavior, m)?;
        self.trace(events, spec)
    }

    /// Next-item and next-category distributions given a history whose last
    /// event carries the terminal bucket. Only the last `max_len` events are
    /// used.
    pub fn predict_next(&self, context: &[Event]) -> Result<(Vec<f64>, Vec<f64>)> {
        let start = context.len().saturating_sub(self.config.max_len);
        let ctx = &context[start..];
        if ctx.is_empty() {
            return Err(Error::EmptyPrefix);
        }
        let t = self.trace(ctx, StepSpec::full(ctx, self.config.target_behavior))?;
        Ok((t.item_probs, t.category_probs))
    }
}
