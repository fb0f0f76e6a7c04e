//! Tape-level building blocks. Every function records its computation on the
//! given tape and reads parameter values from the store.

use alloc::vec;
use alloc::vec::Vec;

use super::params::{AspectParams, LstmParams, ParamIds};
use super::Variant;
use crate::data::Event;
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tape, Var};
use crate::rng::Rng;

/// Item, category, behavior and interval embeddings of one event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventEmbedding {
    pub p: Var,
    pub q: Var,
    pub r: Var,
    pub s: Var,
}

/// Tape handles produced for one aspect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AspectOutput {
    pub h_s: Var,
    pub h_d: Var,
    pub alpha: Var,
    /// `None` for the concatenation-fusion variant.
    pub beta: Option<Var>,
    pub h_h: Var,
}

fn lookup(tape: &mut Tape, store: &ParamStore, table: crate::numerics::ParamId, index: usize) -> Result<Var> {
    if index == 0 {
        let d = store.value(table).cols();
        return Ok(tape.zeros(d));
    }
    tape.row(store, table, index)
}

/// Row lookups for one event. Index 0 of the item, category and behavior
/// tables is padding and yields a constant zero vector.
pub fn embed_event(tape: &mut Tape, store: &ParamStore, ids: &ParamIds, event: &Event) -> Result<EventEmbedding> {
    Ok(EventEmbedding {
        p: lookup(tape, store, ids.item_embedding, event.item)?,
        q: lookup(tape, store, ids.category_embedding, event.category)?,
        r: lookup(tape, store, ids.behavior_embedding, event.behavior)?,
        s: tape.row(store, ids.interval_embedding, event.bucket)?,
    })
}

/// One LSTM step. Gates read `gate_in ++ [h]`, the candidate reads
/// `cell_in ++ [h]`.
pub fn lstm_cell(
    tape: &mut Tape,
    store: &ParamStore,
    lp: &LstmParams,
    gate_in: &[Var],
    cell_in: &[Var],
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    let mut gx = gate_in.to_vec();
    gx.push(h);
    let gx = tape.concat(&gx)?;
    let cx = if gate_in == cell_in {
        gx
    } else {
        let mut parts = cell_in.to_vec();
        parts.push(h);
        tape.concat(&parts)?
    };
    let i = tape.linear(store, lp.w_input, gx, Some(lp.b_input))?;
    let i = tape.sigmoid(i)?;
    let f = tape.linear(store, lp.w_forget, gx, Some(lp.b_forget))?;
    let f = tape.sigmoid(f)?;
    let o = tape.linear(store, lp.w_output, gx, Some(lp.b_output))?;
    let o = tape.sigmoid(o)?;
    let g = tape.linear(store, lp.w_cell, cx, Some(lp.b_cell))?;
    let g = tape.tanh(g)?;
    let keep = tape.mul(f, c)?;
    let write = tape.mul(i, g)?;
    let c = tape.add(keep, write)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(o, tc)?;
    Ok((h, c))
}

/// Standard LSTM over `[p, q]` of target events, zero initial state.
pub fn target_lstm(tape: &mut Tape, store: &ParamStore, ids: &ParamIds, inputs: &[EventEmbedding]) -> Result<Vec<Var>> {
    let lp = &ids.target_lstm;
    let d = store.value(lp.b_input).len();
    let mut h = tape.zeros(d);
    let mut c = tape.zeros(d);
    let mut out = Vec::with_capacity(inputs.len());
    for e in inputs {
        let x = [e.p, e.q];
        (h, c) = lstm_cell(tape, store, lp, &x, &x, h, c)?;
        out.push(h);
    }
    Ok(out)
}

/// One behavior-enhanced LSTM step.
pub fn behavior_cell(
    tape: &mut Tape,
    store: &ParamStore,
    ids: &ParamIds,
    variant: Variant,
    e: &EventEmbedding,
    h: Var,
    c: Var,
) -> Result<(Var, Var)> {
    let lp = &ids.behavior_lstm;
    let cell = [e.p, e.q];
    if variant == Variant::VanillaLstm {
        lstm_cell(tape, store, lp, &cell, &cell, h, c)
    } else {
        lstm_cell(tape, store, lp, &[e.p, e.q, e.r, e.s], &cell, h, c)
    }
}

/// Behavior-enhanced LSTM over all events. Masked steps keep the state and
/// emit a zero vector.
pub fn behavior_lstm(
    tape: &mut Tape,
    store: &ParamStore,
    ids: &ParamIds,
    variant: Variant,
    inputs: &[EventEmbedding],
    mask: &[bool],
) -> Result<Vec<Var>> {
    if inputs.len() != mask.len() {
        return Err(Error::Dimension {
            op: "behavior_lstm mask",
            left: vec![inputs.len()],
            right: vec![mask.len()],
        });
    }
    let d = store.value(ids.behavior_lstm.b_input).len();
    let mut h = tape.zeros(d);
    let mut c = tape.zeros(d);
    let mut out = Vec::with_capacity(inputs.len());
    for (e, &keep) in inputs.iter().zip(mask) {
        if keep {
            (h, c) = behavior_cell(tape, store, ids, variant, e, h, c)?;
            out.push(h);
        } else {
            out.push(tape.zeros(d));
        }
    }
    Ok(out)
}

/// `W^P_j · h_S` for every aspect; identity when the projection is absent.
pub fn project_aspects(tape: &mut Tape, store: &ParamStore, ids: &ParamIds, h_s: Var) -> Result<Vec<Var>> {
    ids.aspects
        .iter()
        .map(|a| match a.projection {
            Some(w) => tape.linear(store, w, h_s, None),
            None => Ok(h_s),
        })
        .collect()
}

/// `W^K h_n + b^A`, the query-independent part of the score.
pub fn attention_key(tape: &mut Tape, store: &ParamStore, aspect: &AspectParams, h_d: Var) -> Result<Var> {
    tape.linear(store, aspect.key, h_d, Some(aspect.attn_bias))
}

pub fn attention_value(tape: &mut Tape, store: &ParamStore, aspect: &AspectParams, h_d: Var) -> Result<Var> {
    tape.linear(store, aspect.value, h_d, None)
}

/// Attention from precomputed keys and values. Masked positions get weight
/// exactly zero. Returns `(h̃D, α)`.
pub fn attend(
    tape: &mut Tape,
    store: &ParamStore,
    aspect: &AspectParams,
    h_s: Var,
    keys: &[Var],
    values: &[Var],
    mask: &[bool],
) -> Result<(Var, Var)> {
    if keys.len() != mask.len() || values.len() != mask.len() {
        return Err(Error::Dimension {
            op: "attention mask",
            left: vec![keys.len(), values.len()],
            right: vec![mask.len()],
        });
    }
    if !mask.iter().any(|&m| m) {
        return Err(Error::EmptyAttention);
    }
    let query = match aspect.query {
        Some(q) => Some(tape.linear(store, q, h_s, None)?),
        None => None,
    };
    let v = tape.param(store, aspect.attn_vector);
    let mut scores = Vec::with_capacity(keys.len());
    for (&k, &keep) in keys.iter().zip(mask) {
        if !keep {
            scores.push(tape.zeros(1));
            continue;
        }
        let pre = match query {
            Some(q) => tape.add(q, k)?,
            None => k,
        };
        let t = tape.tanh(pre)?;
        scores.push(tape.dot(v, t)?);
    }
    let scores = tape.concat(&scores)?;
    let alpha = tape.masked_softmax(scores, mask)?;
    let h_d = tape.weighted_sum(alpha, values)?;
    Ok((h_d, alpha))
}

/// Additive attention of one aspect over behavior states.
pub fn refinement_attention(
    tape: &mut Tape,
    store: &ParamStore,
    aspect: &AspectParams,
    h_s: Var,
    h_d: &[Var],
    mask: &[bool],
) -> Result<(Var, Var)> {
    let mut keys = Vec::with_capacity(h_d.len());
    let mut values = Vec::with_capacity(h_d.len());
    for &h in h_d {
        keys.push(attention_key(tape, store, aspect, h)?);
        values.push(attention_value(tape, store, aspect, h)?);
    }
    attend(tape, store, aspect, h_s, &keys, &values, mask)
}

/// Mix preference and intent. Returns `(h̃H, β)`; the concatenation variant
/// has no gate and returns `None` for `β`.
pub fn gated_fusion(
    tape: &mut Tape,
    store: &ParamStore,
    aspect: &AspectParams,
    h_s: Var,
    h_d: Var,
) -> Result<(Var, Option<Var>)> {
    let both = tape.concat(&[h_s, h_d])?;
    if let Some(w) = aspect.concat {
        return Ok((tape.linear(store, w, both, None)?, None));
    }
    let (Some(w), Some(b)) = (aspect.gate_weight, aspect.gate_bias) else {
        return Err(Error::Config("aspect has neither a gate nor a concatenation map".into()));
    };
    let w = tape.param(store, w);
    let b = tape.param(store, b);
    let z = tape.dot(w, both)?;
    let z = tape.add(z, b)?;
    let beta = tape.sigmoid(z)?;
    let keep = tape.one_minus(beta)?;
    let a = tape.scale_by(keep, h_s)?;
    let c = tape.scale_by(beta, h_d)?;
    Ok((tape.add(a, c)?, Some(beta)))
}

/// Dropout on the concatenated fused vectors, then `W^ρ`. `rng` is `None`
/// at inference time.
pub fn finalize(
    tape: &mut Tape,
    store: &ParamStore,
    ids: &ParamIds,
    fused: &[Var],
    rate: f64,
    rng: Option<&mut Rng>,
) -> Result<Var> {
    let joined = tape.concat(fused)?;
    let joined = match rng {
        Some(rng) => tape.dropout(joined, rate, true, rng)?,
        None => joined,
    };
    tape.linear(store, ids.output_projection, joined, None)
}

/// Item and category distributions; entries where the mask is false are 0.
pub fn predict(
    tape: &mut Tape,
    store: &ParamStore,
    ids: &ParamIds,
    h_f: Var,
    item_mask: &[bool],
    category_mask: &[bool],
) -> Result<(Var, Var)> {
    let li = tape.linear(store, ids.item_head, h_f, None)?;
    let lc = tape.linear(store, ids.category_head, h_f, None)?;
    Ok((tape.masked_softmax(li, item_mask)?, tape.masked_softmax(lc, category_mask)?))
}
