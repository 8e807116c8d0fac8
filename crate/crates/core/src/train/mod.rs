//! Data ingestion, the Adam fitting loop, checkpoints and evaluation.

mod adam;
mod config;
mod corpus;
mod eval;
mod fit;

pub use adam::{adam_step, AdamState, BETA1, BETA2, EPSILON};
pub use config::{CbPolicy, TrainingConfig, DEFAULT_INIT_DB, PROFOUND_INIT_DB, PROFOUND_PTA_DB};
pub use corpus::{load_corpus, CorpusEntry, CorpusIndex, Split};
pub use eval::{
    evaluate, paired_t_test, rows_to_csv, scores, summarize, summary_to_csv, write_text, EvalRow, PairedTest,
    Processor, ProcessorSummary,
};
pub use fit::{train, train_with, Checkpoint, EpochRecord, History, TrainOptions, TrainOutcome, CHECKPOINT_VERSION};
