//! The joint item and category objective, the mini-batch loop and early
//! stopping on validation HR@10.

mod checkpoint;
mod gradcheck;
mod kv;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{gradient_check, gradient_check_with, toy_problem, GroupError};
pub use kv::{parse_kv, KvConfig};

use alloc::format;
use alloc::vec::Vec;

use crate::data::{truncate_sequences, BatchIterator, DatasetSplit, Event, UserSequence};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, Target};
use crate::model::{LeakageMode, Maint, StepGraph, StepSpec};
use crate::numerics::{Adam, Tape, Var};
use crate::rng::{rng_for, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a validation HR@10 improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub leakage: LeakageMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 512,
            max_epochs: 30,
            patience: 5,
            seed: 0,
            leakage: LeakageMode::PrefixMasked,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "train.lr must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be at least 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("train.patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// One supervised prediction: what the model sees and what it must predict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Supervision {
    pub spec: StepSpec,
    pub item: usize,
    pub category: usize,
}

/// One tuple per consecutive pair of target events. In prefix-masked mode
/// the input stops just before the later event of the pair; the literal mode
/// shows every step the whole sequence.
pub fn step_targets(seq: &UserSequence, leakage: LeakageMode) -> Vec<Supervision> {
    let pos = &seq.target_positions;
    let n = seq.events.len();
    (1..pos.len())
        .map(|k| {
            let label = seq.events[pos[k]];
            let spec = match leakage {
                LeakageMode::PrefixMasked => StepSpec {
                    targets: k,
                    prefix: pos[k],
                },
                LeakageMode::Algorithm1Literal => StepSpec {
                    targets: pos.len(),
                    prefix: n,
                },
            };
            Supervision {
                spec,
                item: label.item,
                category: label.category,
            }
        })
        .collect()
}

/// Record the summed cross-entropy of every tuple of one sequence. Returns
/// `None` when the sequence has no tuple.
pub fn sequence_loss(
    model: &Maint,
    tape: &mut Tape,
    events: &[Event],
    tuples: &[Supervision],
    mut rng: Option<&mut Rng>,
) -> Result<Option<Var>> {
    if tuples.is_empty() {
        return Ok(None);
    }
    let gamma = model.config().gamma;
    let graph = StepGraph::build(model, tape, events)?;
    let mut terms = Vec::with_capacity(tuples.len() * 2);
    for t in tuples {
        let out = match graph.step(tape, t.spec, rng.as_deref_mut()) {
            Ok(out) => out,
            Err(Error::EmptyPrefix) => continue,
            Err(e) => return Err(e),
        };
        terms.push(tape.cross_entropy(out.item_probs, t.item)?);
        if gamma != 0.0 {
            let c = tape.cross_entropy(out.category_probs, t.category)?;
            terms.push(tape.scale(c, gamma)?);
        }
    }
    if terms.is_empty() {
        return Ok(None);
    }
    Ok(Some(tape.sum_all(&terms)?))
}

/// Loss of a set of sequences without touching gradients: the summed
/// cross-entropy terms plus `λ·‖Θ‖²`. Inference mode, no dropout.
pub fn compute_loss(model: &Maint, sequences: &[UserSequence], leakage: LeakageMode) -> Result<f64> {
    let mut total = 0.0;
    for seq in sequences {
        let tuples = step_targets(seq, leakage);
        let mut tape = Tape::new();
        if let Some(l) = sequence_loss(model, &mut tape, &seq.events, &tuples, None)? {
            total += tape.scalar(l);
        }
    }
    Ok(total + model.config().lambda * model.params.l2_penalty())
}

/// Zero the gradients, then accumulate `∂L/∂Θ` of the summed loss over
/// `sequences` into them. Returns the loss value and the tuple count.
pub fn accumulate_gradients(
    model: &mut Maint,
    sequences: &[&UserSequence],
    leakage: LeakageMode,
    mut rng: Option<&mut Rng>,
) -> Result<(f64, usize)> {
    model.params.zero_grad();
    let mut total = 0.0;
    let mut count = 0;
    for seq in sequences {
        let tuples = step_targets(seq, leakage);
        let mut tape = Tape::new();
        let loss = sequence_loss(model, &mut tape, &seq.events, &tuples, rng.as_deref_mut())?;
        if let Some(l) = loss {
            total += tape.scalar(l);
            count += tuples.len();
            tape.backward(l, &mut model.params)?;
        }
    }
    let lambda = model.config().lambda;
    if lambda != 0.0 {
        let mut tape = Tape::new();
        let l2 = tape.l2_penalty(&model.params);
        let l2 = tape.scale(l2, lambda)?;
        total += tape.scalar(l2);
        tape.backward(l2, &mut model.params)?;
    }
    Ok((total, count))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean over batches of the summed batch loss.
    pub mean_loss: f64,
    pub batches: usize,
    pub tuples: usize,
}

/// Training sequences of a split cut to the model's `max_len`.
pub fn training_sequences(split: &DatasetSplit, max_len: usize) -> Vec<UserSequence> {
    truncate_sequences(&split.training_sequences(), max_len, split.target_behavior)
}

/// One pass over `sequences` in seeded mini-batches with one Adam step per
/// batch.
pub fn train_epoch(
    model: &mut Maint,
    sequences: &[UserSequence],
    optimizer: &Adam,
    config: &TrainConfig,
    epoch: usize,
) -> Result<EpochStats> {
    let mut losses = Vec::new();
    let mut tuples = 0;
    let training = model.config().dropout > 0.0;
    for (b, batch) in BatchIterator::new(sequences, config.batch_size, config.seed, epoch as u64).enumerate() {
        let rows: Vec<&UserSequence> = batch.rows.iter().map(|&r| &sequences[r]).collect();
        let mut rng = rng_for(config.seed, &[0x6472_6f70, epoch as u64, b as u64]);
        let rng = training.then_some(&mut rng);
        let (loss, n) = accumulate_gradients(model, &rows, config.leakage, rng)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, batch: b, loss });
        }
        optimizer.step(&mut model.params);
        losses.push(loss);
        tuples += n;
    }
    let batches = losses.len();
    let mean_loss = if batches == 0 {
        0.0
    } else {
        losses.iter().sum::<f64>() / batches as f64
    };
    Ok(EpochStats {
        epoch,
        mean_loss,
        batches,
        tuples,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub stats: EpochStats,
    pub validation_hr10: f64,
    pub improved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_hr10: f64,
}

/// Train with early stopping on validation HR@10; `model` ends with the
/// parameters of the best epoch.
pub fn fit(
    model: &mut Maint,
    split: &DatasetSplit,
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    if split.users.iter().all(|u| u.validation.is_none()) {
        return Err(Error::Protocol("no user has a validation target".into()));
    }
    let sequences = training_sequences(split, model.config().max_len);
    fit_with(model, &sequences, config, |m| {
        let e = evaluate(m, split, Target::Validation, &[10])?;
        Ok(e.hr[0])
    }, on_epoch)
}

/// [`fit`] with a caller-supplied validation score.
pub fn fit_with(
    model: &mut Maint,
    sequences: &[UserSequence],
    config: &TrainConfig,
    mut validate: impl FnMut(&Maint) -> Result<f64>,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<FitResult> {
    config.validate()?;
    let optimizer = Adam::new(config.learning_rate);
    let mut best = model.params.clone();
    let mut best_hr = f64::NEG_INFINITY;
    let mut best_epoch = 0;
    let mut stale = 0;
    let mut history = Vec::new();
    for epoch in 1..=config.max_epochs {
        let stats = train_epoch(model, sequences, &optimizer, config, epoch)?;
        let hr = validate(model)?;
        let improved = hr > best_hr;
        if improved {
            best_hr = hr;
            best_epoch = epoch;
            best = model.params.clone();
            stale = 0;
        } else {
            stale += 1;
        }
        let record = EpochRecord {
            stats,
            validation_hr10: hr,
            improved,
        };
        on_epoch(&record);
        history.push(record);
        if stale >= config.patience {
            break;
        }
    }
    if best_epoch > 0 {
        model.params = best;
    }
    Ok(FitResult {
        history,
        best_epoch,
        best_hr10: if best_epoch > 0 { best_hr } else { 0.0 },
    })
}
