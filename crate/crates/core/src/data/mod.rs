//! Embedding-pair sets, the synthetic generator and on-disk formats.

mod checkpoint;
mod format;
mod pairs;
mod report;
mod synthetic;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_align, load_checkpoint, load_vlsae, save_checkpoint, Checkpoint, Model,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use format::{
    decode_pairs, encode_pairs, load_pairs, load_pairs_with_dim, read_pairs_header, save_pairs, write_atomic,
    PairsHeader, FLAG_LATENTS, FORMAT_VERSION, HEADER_LEN, PAIRS_MAGIC,
};
pub use pairs::{ratio_to_fraction, split, EmbeddingPairSet, Split, DEFAULT_TRAIN_FRACTION};
pub use report::{decode_report, encode_report, load_report, save_report, summarize, ReportSummary};
pub use synthetic::{generate_synthetic, SyntheticSet, SyntheticSpec};
