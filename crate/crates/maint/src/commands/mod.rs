//! The operations behind each subcommand, usable without the binary.

pub mod data;
pub mod inspect;
pub mod run;

pub use data::{
    dataset_stats, load_log, preprocess, preprocess_log, synth, write_synth, BehaviorStat, PreprocessOptions,
    PreprocessSummary, StatsSummary,
};
pub use inspect::{
    explain, gradcheck, recommend, recommendations_table, Explanation, GradcheckReport, Recommendation,
};
pub use run::{
    ablate, check_compatible, evaluate_model, parse_variants, pool_checksum, pools_for, sweep, train,
    train_model, write_report, Ablation, AblationRow, Sweep, SweepParam, TrainOutcome,
};
