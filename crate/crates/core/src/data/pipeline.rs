use alloc::format;
use alloc::vec::Vec;

use super::{
    encode_sequences, sort_records, split_leave_one_out, BehaviorRecord, Bucketizer, DatasetSplit,
    SplitConfig, UserSequence, Vocabularies,
};
use crate::error::{Error, Result};

/// Encoded data ready for training: vocabularies, full sequences and the
/// leave-one-out split.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub vocabs: Vocabularies,
    pub sequences: Vec<UserSequence>,
    pub split: DatasetSplit,
}

/// Vocabularies, encoding, buckets and the split for already filtered
/// records. `behaviors` fixes the order of behavior indices; `target` names
/// the target behavior.
pub fn prepare(
    mut records: Vec<BehaviorRecord>,
    behaviors: &[&str],
    target: &str,
    bucketizer: &Bucketizer,
    config: &SplitConfig,
) -> Result<Prepared> {
    if records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    sort_records(&mut records);
    let vocabs = Vocabularies::build(&records, behaviors);
    let target_idx = vocabs
        .behaviors
        .encode(target)
        .ok_or_else(|| Error::Data(format!("target behavior {target:?} never occurs")))?;
    let sequences = encode_sequences(&records, &vocabs, target_idx, bucketizer)?;
    let split = split_leave_one_out(
        &sequences,
        vocabs.items.len(),
        vocabs.categories.len(),
        vocabs.behaviors.len(),
        target_idx,
        bucketizer,
        config,
    );
    Ok(Prepared {
        vocabs,
        sequences,
        split,
    })
}
