//! Behavior logs, vocabularies, per-user sequences, the leave-one-out split
//! with sampled negatives, conversion rates and planted synthetic data.

mod batch;
mod pipeline;
mod records;
mod sequence;
mod split;
mod synthetic;
mod vocab;

pub use batch::{Batch, BatchIterator};
pub use pipeline::{prepare, Prepared};
pub use records::{
    conversion_rate, filter_dataset, resolve_lowest_category, sort_records, BehaviorRecord,
    FilterConfig,
};
pub use sequence::{
    bucketize_interval, encode_sequences, truncate_sequences, Bucketizer, Event, UserSequence,
    DEFAULT_BOUNDARIES,
};
pub use split::{sample_negatives, split_leave_one_out, DatasetSplit, Holdout, SplitConfig, UserSplit};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticSpec};
pub use vocab::{Vocab, Vocabularies};
