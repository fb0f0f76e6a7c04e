//! Reading and writing files: raw logs, dataset directories, checkpoints.

pub mod checkpoint;
pub mod dataset;
pub mod formats;

pub use checkpoint::{config_snapshot_path, load_checkpoint, save_checkpoint};
pub use dataset::{read_dataset, write_dataset, Dataset, DatasetMeta};
pub use formats::{behavior_order, parse_events, parse_retailrocket, Format, FormatSpec, ParsedLog, TimeFormat};
